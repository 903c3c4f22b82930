from __future__ import absolute_import, division

import logging
from collections import namedtuple

import numpy as np

from .core import ValidationError, normalize_seed
from .geometry import (Pose, PointCloud, nearest_vectors, sample_primitive_cloud,
                       transform_cloud)
from .handrig import (DEFAULT_RIG, ACTION_DIM, N_KEYPOINTS, N_PALM_KEYPOINTS,
                      JOINTS_PER_FINGER, FINGERS, ActionVector, HandState,
                      clamp_action, apply_action, forward_keypoints,
                      finger_keypoint_sides, tcp_observation)
from .world import attach, release, tick_attached, GRAVITY


__all__ = ('GraspObservation', 'RewardState', 'RewardWeights', 'DRSample',
           'GraspSettings', 'GraspOutcome', 'GeoController', 'encode_observation',
           'reward_terms', 'step_reward', 'count_contacts',
           'sample_domain_randomization', 'geo_controller', 'pregrasp_hand',
           'run_grasp_episode')


logger = logging.getLogger(__name__)

OBS_DIM = 3 * N_KEYPOINTS + 1 + 4
ZERO_BLOCK_DISTANCE = 1e-6


class GraspObservation(namedtuple('GraspObservation', ('geom', 'target_height',
                                                       'tcp', 'distances'))):
    """The 59 value observation of the grasp controller.

    Parameters
    ----------
    geom : tuple of float
        54 values: the unit vector from each of the 18 keypoints to its
        nearest object point, keypoint-major. A keypoint closer than 1e-6 m
        gets the zero vector.
    target_height : float
        Height of the target object, meters.
    tcp : tuple of float
        ``(z, roll, pitch, yaw)`` of the TCP.
    distances : tuple of float, optional
        The 18 nearest-point distances. Not part of the observation vector.
    """
    __slots__ = ()

    def __new__(cls, geom, target_height, tcp, distances=None):
        geom = tuple(float(v) for v in geom)
        tcp = tuple(float(v) for v in tcp)
        if len(geom) != 3 * N_KEYPOINTS or len(tcp) != 4:
            raise ValidationError("Observations need 54 geometry and 4 TCP values")
        if distances is not None:
            distances = tuple(float(d) for d in distances)
        return super(GraspObservation, cls).__new__(cls, geom,
                                                    float(target_height), tcp,
                                                    distances)

    @property
    def vector(self):
        """The flat 59 value observation."""
        return np.array(self.geom + (self.target_height,) + self.tcp)

    @property
    def blocks(self):
        return np.array(self.geom).reshape(N_KEYPOINTS, 3)


class RewardState(namedtuple('RewardState', ('object_height', 'initial_height',
                                             'contact_count', 'nn_distance'))):
    """Per-tick quantities entering the reward."""
    __slots__ = ()

    def __new__(cls, object_height, initial_height, contact_count, nn_distance):
        if not 0 <= contact_count <= N_KEYPOINTS:
            raise ValidationError("Contact count must be in [0, %d], got %r"
                                  % (N_KEYPOINTS, contact_count))
        if nn_distance < 0:
            raise ValidationError("Nearest-neighbor distance must be >= 0")
        return super(RewardState, cls).__new__(cls, float(object_height),
                                               float(initial_height),
                                               int(contact_count),
                                               float(nn_distance))


class RewardWeights(namedtuple('RewardWeights', ('lift', 'success', 'contact',
                                                 'nn', 'action', 'success_height',
                                                 'clip'))):
    """Weights of the shaped grasp reward."""
    __slots__ = ()

    def __new__(cls, lift=50.0, success=200.0, contact=10.0, nn=10.0,
                action=0.03, success_height=0.15, clip=(-100.0, 100.0)):
        lo, hi = clip
        if lo > hi:
            raise ValidationError("Invalid reward clip %r" % (clip,))
        return super(RewardWeights, cls).__new__(cls, float(lift), float(success),
                                                 float(contact), float(nn),
                                                 float(action),
                                                 float(success_height),
                                                 (float(lo), float(hi)))

    @classmethod
    def from_config(cls, config):
        return cls(**dict(config))


DEFAULT_WEIGHTS = RewardWeights()


class DRSample(namedtuple('DRSample', ('friction_scale', 'mass_scale',
                                       'cloud_noise_sigma', 'init_joint_offset'))):
    """One draw of the domain randomization parameters."""
    __slots__ = ()


class GraspSettings(namedtuple('GraspSettings', ('contact_threshold',
                                                 'pregrasp_height', 'tick_rate',
                                                 'hold_time', 'max_ticks',
                                                 'squeeze_rate', 'grip_force',
                                                 'cloud_points', 'cloud_seed',
                                                 'min_contacts'))):
    """Thresholds and limits of a grasp episode.

    The target must stay above the success height for ``hold_time`` seconds
    of simulation at ``tick_rate`` ticks per second.
    """
    __slots__ = ()

    def __new__(cls, contact_threshold=0.005, pregrasp_height=0.15, tick_rate=60,
                hold_time=2.0, max_ticks=600, squeeze_rate=0.5, grip_force=1.5,
                cloud_points=1024, cloud_seed=0, min_contacts=3):
        if int(tick_rate) < 1:
            raise ValidationError("Tick rate must be at least 1, got %r"
                                  % (tick_rate,))
        if not float(hold_time) * int(tick_rate) >= 1:
            raise ValidationError("Hold time must span at least one tick, got %r"
                                  % (hold_time,))
        return super(GraspSettings, cls).__new__(
            cls, float(contact_threshold), float(pregrasp_height), int(tick_rate),
            float(hold_time), int(max_ticks), float(squeeze_rate),
            float(grip_force), int(cloud_points), int(cloud_seed),
            int(min_contacts))

    @classmethod
    def from_config(cls, config):
        fields = set(cls._fields)
        return cls(**{k: v for k, v in config.items() if k in fields})

    @property
    def hold_ticks(self):
        """Consecutive ticks above the success height that count as held."""
        return int(round(self.hold_time * self.tick_rate))


class GraspOutcome(namedtuple('GraspOutcome', ('success', 'ticks',
                                               'cumulative_reward', 'nn_reward',
                                               'initial_nn_distance',
                                               'final_nn_distance',
                                               'final_height', 'slipped',
                                               'scene'))):
    """Result of one grasp episode.

    ``scene`` is the world after the episode; it is left out of ``to_dict``.
    """
    __slots__ = ()

    def to_dict(self):
        out = self._asdict()
        out.pop('scene')
        return dict(out)


def encode_observation(hand, target_cloud, target_height, rig=DEFAULT_RIG):
    """Build the grasp observation.

    Parameters
    ----------
    hand : HandState
    target_cloud : PointCloud
        The target's surface points in the world frame.
    target_height : float
    rig : HandRig, optional

    Returns
    -------
    obs : GraspObservation
    """
    keypoints = forward_keypoints(hand, rig)
    vectors, distances, _ = nearest_vectors(keypoints, target_cloud)
    units = np.zeros_like(vectors)
    far = distances >= ZERO_BLOCK_DISTANCE
    units[far] = vectors[far] / distances[far, None]
    return GraspObservation(units.ravel(), target_height, tcp_observation(hand),
                            distances)


def _action_norm(action):
    values = action.values if isinstance(action, ActionVector) else action
    return float(np.linalg.norm(values))


def reward_terms(prev, cur, action, w=DEFAULT_WEIGHTS):
    """The individual terms of the shaped reward, before clipping.

    ``action`` is a cost and is returned as a positive number.
    """
    return {'lift': w.lift * (cur.object_height - cur.initial_height),
            'success': w.success if cur.object_height > w.success_height else 0.0,
            'contact': w.contact * cur.contact_count,
            'nn': w.nn * (prev.nn_distance - cur.nn_distance),
            'action': w.action * _action_norm(action)}


def step_reward(prev, cur, action, w=DEFAULT_WEIGHTS):
    """The shaped reward of one tick.

    ``lift + success + contact + nn - action``, clipped to ``w.clip``.

    Examples
    --------
    >>> prev = RewardState(0.0, 0.0, 0, 0.5)
    >>> cur = RewardState(0.16, 0.0, 0, 0.5)
    >>> step_reward(prev, cur, clamp_action([0] * 19))
    100.0
    """
    t = reward_terms(prev, cur, action, w)
    raw = t['lift'] + t['success'] + t['contact'] + t['nn'] - t['action']
    lo, hi = w.clip
    return float(min(max(raw, lo), hi))


def _finger_distances(hand, cloud, rig):
    _, distances, _ = nearest_vectors(forward_keypoints(hand, rig), cloud)
    return distances[N_PALM_KEYPOINTS:]


def count_contacts(hand, cloud, threshold=0.005, rig=DEFAULT_RIG):
    """Number of the 12 finger keypoints within ``threshold`` of the cloud.

    Palm keypoints never count.
    """
    return int((_finger_distances(hand, cloud, rig) <= threshold).sum())


def sample_domain_randomization(seed):
    """Draw friction, mass, noise and initial-offset randomization.

    Friction scale is uniform in [0.5, 2.0], mass scale uniform in
    [0.8, 1.2], and the 19 initial offsets uniform in [-0.05, 0.05] radians.
    """
    rng = np.random.default_rng(normalize_seed(seed))
    friction = rng.uniform(0.5, 2.0)
    mass = rng.uniform(0.8, 1.2)
    offsets = rng.uniform(-0.05, 0.05, size=ACTION_DIM)
    return DRSample(float(friction), float(mass), 0.005,
                    tuple(float(o) for o in offsets))


class GeoController(object):
    """A deterministic grasp controller driven by the geometry observation.

    The TCP moves by a fraction of the mean nearest-neighbor vector, so the
    hand settles onto the object. Once the palm is close, each finger closes
    at a speed proportional to its remaining distance. When contacts are
    made on both sides of the hand the TCP lifts.

    Parameters
    ----------
    squeeze_rate : float, optional
        Finger action used when in full contact.
    arm_gain : float, optional
        Fraction of the mean nearest-neighbor vector travelled per tick.
    close_scale : float, optional
        Finger distance, meters, at which fingers close at full speed.
    approach_distance : float, optional
        Palm distance, meters, below which fingers start closing.
    contact_threshold : float, optional
    min_contacts : int, optional
    lift_height : float, optional
        Target height at which lifting stops.
    lift_rate : float, optional
        Vertical action while lifting.
    rig : HandRig, optional
    """
    def __init__(self, squeeze_rate=0.5, arm_gain=0.3, close_scale=0.02,
                 approach_distance=0.03, contact_threshold=0.005,
                 min_contacts=3, lift_height=0.20, lift_rate=0.2,
                 rig=DEFAULT_RIG):
        self.squeeze_rate = squeeze_rate
        self.arm_gain = arm_gain
        self.close_scale = close_scale
        self.approach_distance = approach_distance
        self.contact_threshold = contact_threshold
        self.min_contacts = min_contacts
        self.lift_height = lift_height
        self.lift_rate = lift_rate
        self.rig = rig
        self._sides = finger_keypoint_sides(rig)

    def __repr__(self):
        return 'GeoController<squeeze_rate=%r>' % self.squeeze_rate

    def __call__(self, obs):
        blocks = obs.blocks
        raw = np.zeros(ACTION_DIM)
        if not blocks.any():
            raw[FINGERS] = self.squeeze_rate
            return clamp_action(raw)

        if obs.distances is None:
            distances = np.linalg.norm(blocks, axis=1)
        else:
            distances = np.array(obs.distances)
        fingers = distances[N_PALM_KEYPOINTS:]
        touching = fingers <= self.contact_threshold
        if (touching.sum() >= self.min_contacts and
                (self._sides[touching] > 0).any() and
                (self._sides[touching] < 0).any()):
            if obs.target_height < self.lift_height:
                raw[2] = self.lift_rate
            raw[FINGERS] = self.squeeze_rate
            return clamp_action(raw)

        mean = (blocks * distances[:, None]).mean(axis=0)
        raw[0:3] = self.arm_gain * mean / self.rig.action_scale
        palm_near = distances[:N_PALM_KEYPOINTS].min() <= self.approach_distance
        if palm_near or np.linalg.norm(mean) <= 0.1 * self.contact_threshold:
            per_finger = fingers.reshape(-1, JOINTS_PER_FINGER).min(axis=1)
            for f, d in enumerate(per_finger):
                if d < ZERO_BLOCK_DISTANCE:
                    rate = self.squeeze_rate
                else:
                    rate = (d - self.contact_threshold / 2) / self.close_scale
                lo = 7 + f * JOINTS_PER_FINGER
                raw[lo:lo + JOINTS_PER_FINGER] = min(max(rate, 0.0), 1.0)
        return clamp_action(raw)


_DEFAULT_CONTROLLER = GeoController()


def geo_controller(obs):
    """Run the default :class:`GeoController` on one observation."""
    return _DEFAULT_CONTROLLER(obs)


def pregrasp_hand(hand, target, height=0.15, rig=DEFAULT_RIG, dr=None):
    """An open hand ``height`` above the target centroid, aligned to its yaw."""
    position = np.array(target.pose.position) + (0.0, 0.0, height)
    orientation = np.array([0.0, 0.0, target.pose.yaw])
    lo = rig.joint_limits[0]
    joints = np.full(len(hand.finger_joints), lo)
    if dr is not None:
        offset = np.array(dr.init_joint_offset)
        position += 0.1 * offset[0:3]
        orientation += offset[3:6]
        limits = np.array(hand.joint_limits)
        joints = np.clip(joints + offset[FINGERS], limits[:, 0], limits[:, 1])
    return HandState(Pose(position, orientation), joints, hand.joint_limits)


def _closure(keypoints, finger_distances, centroid, axis, threshold, min_contacts):
    touching = finger_distances <= threshold
    if touching.sum() < min_contacts:
        return False
    side = (keypoints[N_PALM_KEYPOINTS:][touching] - centroid).dot(axis)
    return bool((side > 0).any() and (side < 0).any())


def run_grasp_episode(world, target_id, controller=geo_controller, max_ticks=None,
                      dr=None, settings=None, weights=DEFAULT_WEIGHTS,
                      rig=DEFAULT_RIG, seed=0):
    """Run the grasp controller until the target is held up or time runs out.

    Unless the target is already attached, the hand is first placed at the
    pre-grasp pose above the target. Every tick the controller sees the
    observation, its action is applied, attached objects follow the TCP, and
    the reward is accumulated. The target is attached once finger contacts
    close around it on opposite sides, provided the grip can carry its
    weight. Fingers are frozen while an object is attached.

    Parameters
    ----------
    world : SceneState
    target_id : str
    controller : callable, optional
        Maps a GraspObservation to an ActionVector (or 19 raw values).
    max_ticks : int, optional
        Defaults to ``settings.max_ticks``.
    dr : DRSample, optional
        Domain randomization for this episode.
    settings : GraspSettings, optional
    weights : RewardWeights, optional
    rig : HandRig, optional
    seed : int, optional
        Seed of the observation noise, used only with ``dr``.

    Returns
    -------
    outcome : GraspOutcome
    """
    if settings is None:
        settings = GraspSettings()
    if max_ticks is None:
        max_ticks = settings.max_ticks
    target = world.get(target_id)
    canonical = sample_primitive_cloud(target.shape, settings.cloud_points,
                                       settings.cloud_seed)
    scene = world
    if not target.attached:
        scene = scene.with_hand(pregrasp_hand(scene.hand, target,
                                              settings.pregrasp_height, rig, dr))
    noise = np.random.default_rng(normalize_seed(seed)) if dr is not None else None
    friction = target.friction_static * (dr.friction_scale if dr else 1.0)
    weight = target.mass * (dr.mass_scale if dr else 1.0) * GRAVITY
    h0 = target.pose.z

    def measure(scene):
        target = scene.get(target_id)
        cloud = transform_cloud(canonical, target.pose)
        keypoints = forward_keypoints(scene.hand, rig)
        _, distances, _ = nearest_vectors(keypoints, cloud)
        fingers = distances[N_PALM_KEYPOINTS:]
        contacts = int((fingers <= settings.contact_threshold).sum())
        state = RewardState(target.pose.z, h0, contacts, float(distances.sum()))
        return target, cloud, keypoints, fingers, state

    target, cloud, _, _, prev = measure(scene)
    initial_nn = prev.nn_distance
    total = nn_total = 0.0
    hold = ticks = 0
    success = slipped = False

    while ticks < max_ticks:
        observed = cloud
        if noise is not None and dr.cloud_noise_sigma > 0:
            observed = PointCloud(cloud.points +
                                  noise.normal(0, dr.cloud_noise_sigma,
                                               cloud.points.shape))
        obs = encode_observation(scene.hand, observed, target.pose.z, rig)
        action = controller(obs)
        if not isinstance(action, ActionVector):
            action = clamp_action(action)
        hand = apply_action(scene.hand, action, rig)
        if target.attached:
            hand = hand.with_joints(scene.hand.finger_joints)
        scene = tick_attached(scene.with_hand(hand)).advanced()
        target, cloud, keypoints, fingers, cur = measure(scene)

        if not target.attached:
            axis = scene.hand.tcp_pose.rotation().as_matrix()[:, 0]
            if _closure(keypoints, fingers, np.array(target.pose.position), axis,
                        settings.contact_threshold, settings.min_contacts):
                if cur.contact_count * settings.grip_force * friction >= weight:
                    scene = attach(scene, target_id)
                    target = scene.get(target_id)
                    logger.debug("Attached %r at tick %d", target_id, scene.tick)
                elif not slipped:
                    slipped = True
                    logger.debug("Grip on %r slipped at tick %d", target_id,
                                 scene.tick)

        terms = reward_terms(prev, cur, action, weights)
        nn_total += terms['nn']
        total += step_reward(prev, cur, action, weights)
        ticks += 1
        prev = cur

        hold = hold + 1 if cur.object_height > weights.success_height else 0
        if hold >= settings.hold_ticks:
            success = True
            break

    if not success and target.attached:
        scene = release(scene, target_id)
    return GraspOutcome(success, ticks, total, nn_total, initial_nn,
                        prev.nn_distance, prev.object_height, slipped, scene)
