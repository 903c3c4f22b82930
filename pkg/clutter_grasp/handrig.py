from __future__ import absolute_import, division

import math
from collections import namedtuple

import numpy as np

from .core import ValidationError
from .geometry import Pose, transform_points


__all__ = ('HandRig', 'HandState', 'ActionVector', 'DEFAULT_RIG',
           'ACTION_DIM', 'N_KEYPOINTS', 'clamp_action', 'apply_action',
           'forward_keypoints', 'tcp_observation')


ACTION_DIM = 19
N_FINGERS = 4
JOINTS_PER_FINGER = 3
N_FINGER_JOINTS = N_FINGERS * JOINTS_PER_FINGER
N_PALM_KEYPOINTS = 6
N_KEYPOINTS = N_PALM_KEYPOINTS + N_FINGER_JOINTS

# Action layout
ARM_TRANSLATION = slice(0, 3)
ARM_ROTATION = slice(3, 6)
FINGERS = slice(7, 19)

JOINT_TOLERANCE = 1e-12


class HandRig(namedtuple('HandRig', ('link_lengths', 'palm_pitch',
                                     'finger_offset', 'finger_spread',
                                     'joint_limits', 'action_scale'))):
    """Fixed dimensions of the simplified arm and hand.

    Parameters
    ----------
    link_lengths : tuple of float
        Proximal, medial and distal link lengths of every finger, meters.
    palm_pitch : float
        Spacing of the 2x3 grid of palm keypoints, meters.
    finger_offset : float
        Distance of the finger bases from the palm center along the TCP x
        axis. Fingers 0 and 1 sit on the +x side, 2 and 3 on the -x side.
    finger_spread : float
        Offset of the two fingers on each side along the TCP y axis.
    joint_limits : tuple of float
        ``(lo, hi)`` limits shared by every finger joint, radians.
    action_scale : float
        Per-step scale of the relative action, radians (or meters for the
        translational dimensions).
    """
    __slots__ = ()

    def __new__(cls, link_lengths=(0.04, 0.03, 0.02), palm_pitch=0.02,
                finger_offset=0.05, finger_spread=0.02,
                joint_limits=(0.0, math.pi / 2), action_scale=0.05):
        link_lengths = tuple(float(l) for l in link_lengths)
        joint_limits = tuple(float(l) for l in joint_limits)
        if len(link_lengths) != JOINTS_PER_FINGER or min(link_lengths) <= 0:
            raise ValidationError("Expected 3 positive link lengths, got %r"
                                  % (link_lengths,))
        if len(joint_limits) != 2 or joint_limits[0] > joint_limits[1]:
            raise ValidationError("Invalid joint limits %r" % (joint_limits,))
        if min(palm_pitch, finger_offset, action_scale) <= 0 or finger_spread < 0:
            raise ValidationError("Hand rig dimensions must be positive")
        return super(HandRig, cls).__new__(cls, link_lengths, float(palm_pitch),
                                           float(finger_offset),
                                           float(finger_spread), joint_limits,
                                           float(action_scale))

    @classmethod
    def from_config(cls, config):
        return cls(link_lengths=config.link_lengths,
                   palm_pitch=config.palm_pitch,
                   finger_offset=config.finger_offset,
                   finger_spread=config.finger_spread,
                   joint_limits=config.joint_limits,
                   action_scale=config.action_scale)

    @property
    def finger_sides(self):
        """Sign of the TCP x coordinate of each finger base."""
        return (1.0, 1.0, -1.0, -1.0)

    def palm_points(self):
        p = self.palm_pitch
        return np.array([(x, y, 0.0) for x in (-p / 2, p / 2)
                         for y in (-p, 0.0, p)])

    def finger_bases(self):
        s = self.finger_spread
        return np.array([(side * self.finger_offset, y, 0.0)
                         for side, y in zip(self.finger_sides, (s, -s, s, -s))])

    def reach(self):
        return sum(self.link_lengths)


DEFAULT_RIG = HandRig()


class HandState(namedtuple('HandState', ('tcp_pose', 'finger_joints',
                                         'joint_limits'))):
    """Kinematic state of the hand.

    Parameters
    ----------
    tcp_pose : Pose
        Pose of the tool center point, the center of the palm.
    finger_joints : sequence of float
        12 joint angles, 3 per finger, finger-major.
    joint_limits : sequence of (float, float), optional
        Per-joint limits. Defaults to the rig's shared limits.
    """
    __slots__ = ()

    def __new__(cls, tcp_pose=None, finger_joints=None, joint_limits=None):
        if tcp_pose is None:
            tcp_pose = Pose()
        if not isinstance(tcp_pose, Pose):
            tcp_pose = Pose(*tcp_pose)
        if finger_joints is None:
            finger_joints = (0.0,) * N_FINGER_JOINTS
        if joint_limits is None:
            joint_limits = (DEFAULT_RIG.joint_limits,) * N_FINGER_JOINTS
        finger_joints = tuple(float(q) for q in finger_joints)
        joint_limits = tuple((float(lo), float(hi)) for lo, hi in joint_limits)
        if len(finger_joints) != N_FINGER_JOINTS or len(joint_limits) != N_FINGER_JOINTS:
            raise ValidationError("Expected %d finger joints and limits"
                                  % N_FINGER_JOINTS)
        for q, (lo, hi) in zip(finger_joints, joint_limits):
            if not (lo - JOINT_TOLERANCE <= q <= hi + JOINT_TOLERANCE):
                raise ValidationError("Finger joint %r outside its limits [%r, %r]"
                                      % (q, lo, hi))
        return super(HandState, cls).__new__(cls, tcp_pose, finger_joints,
                                             joint_limits)

    @classmethod
    def at(cls, tcp_pose, rig=DEFAULT_RIG):
        """An open hand at ``tcp_pose``."""
        lo = rig.joint_limits[0]
        return cls(tcp_pose, (lo,) * N_FINGER_JOINTS,
                   (rig.joint_limits,) * N_FINGER_JOINTS)

    def with_tcp(self, tcp_pose):
        return self._replace(tcp_pose=tcp_pose)

    def with_joints(self, finger_joints):
        return HandState(self.tcp_pose, finger_joints, self.joint_limits)

    def open(self):
        return self.with_joints(lo for lo, _ in self.joint_limits)

    def to_dict(self):
        return {'tcp': {'position': list(self.tcp_pose.position),
                        'orientation': list(self.tcp_pose.orientation)},
                'finger_joints': list(self.finger_joints)}


class ActionVector(namedtuple('ActionVector', ('values',))):
    """A 19 dimensional relative action, every component in [-1, 1].

    Dimensions 1-6 drive the TCP (translation, then roll/pitch/yaw), dimension
    7 is unused, and dimensions 8-19 drive the finger joints.
    """
    __slots__ = ()

    @property
    def array(self):
        return np.array(self.values)

    def norm(self):
        return float(np.linalg.norm(self.values))


def clamp_action(raw):
    """Clamp a raw 19 dimensional action into ``[-1, 1]``.

    Parameters
    ----------
    raw : array_like
        19 finite values.

    Returns
    -------
    action : ActionVector

    Examples
    --------
    >>> clamp_action([1.7] + [0] * 18).values[0]
    1.0
    """
    try:
        raw = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("Actions must be numeric")
    if raw.shape != (ACTION_DIM,):
        raise ValidationError("Actions must have %d components, got shape %r"
                              % (ACTION_DIM, raw.shape))
    if not np.isfinite(raw).all():
        raise ValidationError("Actions must be finite")
    return ActionVector(tuple(float(v) for v in np.clip(raw, -1.0, 1.0)))


def apply_action(state, action, rig=DEFAULT_RIG):
    """Apply one relative-control step to a hand state.

    The TCP moves by ``scale * a[0:3]`` meters in the world frame and rotates
    by ``scale * a[3:6]`` radians of roll/pitch/yaw. Finger joints move by
    ``scale * a[7:19]`` radians and are clamped to their limits.
    """
    a = np.asarray(action.values if isinstance(action, ActionVector) else action,
                   dtype=float)
    scale = rig.action_scale
    pose = state.tcp_pose
    position = np.array(pose.position) + scale * a[ARM_TRANSLATION]
    orientation = np.array(pose.orientation) + scale * a[ARM_ROTATION]
    limits = np.array(state.joint_limits)
    joints = np.clip(np.array(state.finger_joints) + scale * a[FINGERS],
                     limits[:, 0], limits[:, 1])
    return HandState(Pose(position, orientation), joints, state.joint_limits)


def _finger_chain(base, side, joints, link_lengths):
    """Link centers of one planar finger.

    At zero joints the finger hangs along -z; positive joints curl it toward
    the palm center.
    """
    out = []
    joint = np.array(base)
    phi = 0.0
    for q, length in zip(joints, link_lengths):
        phi += q
        direction = np.array([-side * math.sin(phi), 0.0, -math.cos(phi)])
        out.append(joint + 0.5 * length * direction)
        joint = joint + length * direction
    return out


def local_keypoints(state, rig=DEFAULT_RIG):
    """The 18 keypoints in the TCP frame: 6 palm points then 3 per finger."""
    points = list(rig.palm_points())
    bases = rig.finger_bases()
    for f, side in enumerate(rig.finger_sides):
        joints = state.finger_joints[f * JOINTS_PER_FINGER:
                                     (f + 1) * JOINTS_PER_FINGER]
        points.extend(_finger_chain(bases[f], side, joints, rig.link_lengths))
    return np.array(points)


def forward_keypoints(state, rig=DEFAULT_RIG):
    """World positions of the 18 hand keypoints.

    Returns
    -------
    keypoints : np.ndarray
        An ``(18, 3)`` array: rows 0-5 are the palm grid, rows 6-17 the
        proximal, medial and distal link centers of fingers 0 through 3.
    """
    return transform_points(local_keypoints(state, rig), state.tcp_pose)


def finger_keypoint_sides(rig=DEFAULT_RIG):
    return np.repeat(rig.finger_sides, JOINTS_PER_FINGER)


def tcp_observation(state):
    """``(z, roll, pitch, yaw)`` of the TCP."""
    pose = state.tcp_pose
    return (pose.z,) + tuple(pose.orientation)
