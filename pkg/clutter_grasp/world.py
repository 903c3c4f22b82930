from __future__ import absolute_import, division

import math
from collections import namedtuple

import numpy as np

from .core import ValidationError, SettleError
from .geometry import Pose, ShapeDescriptor
from .handrig import HandState


__all__ = ('SceneObject', 'SceneState', 'settle', 'displace_object',
           'approach_clearance', 'escaped_objects', 'tick_attached',
           'attach', 'release', 'scene_snapshot')


GRAVITY = 9.81
SNAPSHOT_VERSION = '1.0'

# Overlaps at or below this are treated as touching
CONTACT_EPS = 1e-12


class SceneObject(namedtuple('SceneObject', ('id', 'name', 'shape', 'pose',
                                             'footprint_radius', 'mass',
                                             'friction_static',
                                             'friction_dynamic', 'is_target',
                                             'attach_offset'))):
    """A rigid object on the table.

    Parameters
    ----------
    id : str
        Unique id within a scene.
    name : str
        Catalog name of the object (``'mug'``, ``'cube'``, ...).
    shape : ShapeDescriptor
    pose : Pose
    footprint_radius : float, optional
        Radius of the planar contact disc. Defaults to the shape's.
    mass : float, optional
        Kilograms.
    friction_static, friction_dynamic : float, optional
    is_target : bool, optional
    attach_offset : Pose, optional
        Pose of the object in the TCP frame while grasped, ``None`` otherwise.
    """
    __slots__ = ()

    def __new__(cls, id, name, shape, pose, footprint_radius=None, mass=0.1,
                friction_static=1.0, friction_dynamic=1.0, is_target=False,
                attach_offset=None):
        if not isinstance(shape, ShapeDescriptor):
            raise ValidationError("Object %r needs a ShapeDescriptor" % (id,))
        if not isinstance(pose, Pose):
            raise ValidationError("Object %r needs a Pose" % (id,))
        if footprint_radius is None:
            footprint_radius = shape.footprint_radius()
        if not footprint_radius > 0:
            raise ValidationError("Object %r has a non-positive footprint" % (id,))
        if not (friction_static > 0 and friction_dynamic > 0):
            raise ValidationError("Object %r has non-positive friction" % (id,))
        if not mass > 0:
            raise ValidationError("Object %r has non-positive mass" % (id,))
        return super(SceneObject, cls).__new__(
            cls, id, name, shape, pose, float(footprint_radius), float(mass),
            float(friction_static), float(friction_dynamic), bool(is_target),
            attach_offset)

    @property
    def attached(self):
        return self.attach_offset is not None

    @property
    def xy(self):
        return np.array(self.pose.position[:2])

    @property
    def rest_height(self):
        """z of the object origin when resting upright on the table."""
        return -self.shape.z_extent()[0]

    def moved_to(self, x, y):
        return self._replace(pose=Pose((x, y, self.pose.z), self.pose.orientation))

    def summary(self):
        x, y, z = self.pose.position
        return {'id': self.id, 'name': self.name, 'x': round(x, 4),
                'y': round(y, 4), 'z': round(z, 4),
                'theta': round(self.pose.yaw, 4), 'is_target': self.is_target}


class SceneState(namedtuple('SceneState', ('objects', 'hand',
                                           'workspace_halfwidth', 'tick',
                                           'lift_offset'))):
    """The full world state. Every operation returns a new state.

    Parameters
    ----------
    objects : sequence of SceneObject
        Exactly one must be the target.
    hand : HandState, optional
    workspace_halfwidth : float, optional
        Objects with ``|x|`` or ``|y|`` beyond this have left the workspace.
    tick : int, optional
        Simulation clock.
    lift_offset : float, optional
        Height accumulated by lift skills since the last lower.
    """
    __slots__ = ()

    def __new__(cls, objects, hand=None, workspace_halfwidth=0.30, tick=0,
                lift_offset=0.0):
        objects = tuple(objects)
        ids = [o.id for o in objects]
        if len(set(ids)) != len(ids):
            raise ValidationError("Object ids must be unique, got %r" % (ids,))
        ntargets = sum(o.is_target for o in objects)
        if ntargets != 1:
            raise ValidationError("A scene needs exactly one target, found %d"
                                  % ntargets)
        if hand is None:
            hand = HandState()
        return super(SceneState, cls).__new__(cls, objects, hand,
                                              float(workspace_halfwidth),
                                              int(tick), float(lift_offset))

    def __repr__(self):
        return 'SceneState<%d objects, tick=%d>' % (len(self.objects), self.tick)

    def get(self, id):
        for o in self.objects:
            if o.id == id:
                return o
        raise ValidationError("Unknown object id %r" % (id,))

    def find(self, key):
        """Look up an object by id, or failing that by name."""
        for o in self.objects:
            if o.id == key:
                return o
        for o in self.objects:
            if o.name == key:
                return o
        return None

    @property
    def target(self):
        return next(o for o in self.objects if o.is_target)

    @property
    def obstacles(self):
        return [o for o in self.objects if not o.is_target]

    @property
    def attached(self):
        return next((o for o in self.objects if o.attached), None)

    def with_objects(self, objects):
        return self._replace(objects=tuple(objects))

    def replace_object(self, obj):
        self.get(obj.id)
        return self._replace(objects=tuple(obj if o.id == obj.id else o
                                           for o in self.objects))

    def with_hand(self, hand):
        return self._replace(hand=hand)

    def advanced(self, ticks=1):
        return self._replace(tick=self.tick + ticks)


def _overlap(p, q, rp, rq):
    return rp + rq - math.hypot(q[0] - p[0], q[1] - p[1])


def _away(p, q):
    """Unit vector pointing from p to q."""
    d = q - p
    n = math.hypot(d[0], d[1])
    if n == 0:
        return np.array([1.0, 0.0])
    return d / n


def _separation_step(pos, radii, masses):
    n = len(pos)
    disp = np.zeros_like(pos)
    moved = False
    for i in range(n):
        for j in range(i + 1, n):
            overlap = _overlap(pos[i], pos[j], radii[i], radii[j])
            if overlap <= CONTACT_EPS:
                continue
            moved = True
            u = _away(pos[j], pos[i])
            total = masses[i] + masses[j]
            disp[i] += u * overlap * masses[j] / total
            disp[j] -= u * overlap * masses[i] / total
    return pos + disp, moved


def _max_overlap(pos, radii):
    out = -np.inf
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            out = max(out, _overlap(pos[i], pos[j], radii[i], radii[j]))
    return out


def settle(scene, phase1=30, phase2=60, tolerance=1e-4):
    """Resolve footprint overlaps until the scene is at rest.

    Overlapping pairs are pushed apart along their center line, each by a
    share of the overlap proportional to the other object's mass. The first
    phase runs up to ``phase1`` iterations; the second runs up to ``phase2``
    more while accumulating the distance travelled by every object.

    Parameters
    ----------
    scene : SceneState
    phase1, phase2 : int, optional
        Iteration counts of the two phases.
    tolerance : float, optional
        Largest overlap allowed to remain, meters.

    Returns
    -------
    scene : SceneState
        The settled scene. Attached objects are left where they are.
    max_displacement : float
        Largest distance travelled by one object during the second phase.
    """
    free = [o for o in scene.objects if not o.attached]
    if len(free) < 2:
        return scene, 0.0
    for o in free:
        if not all(math.isfinite(v) for v in o.pose.position):
            raise ValidationError("Object %r has a non-finite pose" % o.id)
    start = np.array([o.pose.position[:2] for o in free])
    radii = np.array([o.footprint_radius for o in free])
    masses = np.array([o.mass for o in free])

    pos = start
    for _ in range(phase1):
        pos, moved = _separation_step(pos, radii, masses)
        if not moved:
            break

    travelled = np.zeros(len(free))
    for _ in range(phase2):
        new, moved = _separation_step(pos, radii, masses)
        if not moved:
            break
        travelled += np.hypot(*(new - pos).T)
        pos = new

    residual = _max_overlap(pos, radii)
    if residual > tolerance:
        raise SettleError("Overlap of %.6f m remains after settling" % residual)

    updated = {o.id: o.moved_to(*p) for o, p, p0 in zip(free, pos, start)
               if not np.array_equal(p, p0)}
    if updated:
        scene = scene.with_objects(updated.get(o.id, o) for o in scene.objects)
    return scene, float(travelled.max())


def displace_object(scene, id, direction, dist, step=0.005, stop_on=(),
                    max_force=None):
    """Slide an object across the table, pushing what it meets.

    The object moves along ``direction`` in increments of ``step``. After
    each increment any object overlapping it is pushed out along their
    center line by the overlap; objects pushed this way push their own
    neighbours once, without further propagation. Objects further down a
    chain stay where they are and can be left overlapping the last object
    that moved; such overlaps are only resolved by the next :func:`settle`.

    Parameters
    ----------
    scene : SceneState
    id : str
        The object to move. It must not be attached.
    direction : sequence of float
        Planar direction of motion, normalized before use.
    dist : float
        Commanded distance, meters, ``>= 0``.
    step : float, optional
        Increment length, meters.
    stop_on : collection of str, optional
        Ids that must not be touched. Motion halts before the first increment
        that would move any of them, and the touched id is reported.
    max_force : float, optional
        Pushing force budget, Newtons. Motion stalls before the first
        increment whose sliding friction exceeds it.

    Returns
    -------
    scene : SceneState
    contacts : list of str
        Ids of every object touched, in order of first contact.
    """
    obj = scene.get(id)
    if obj.attached:
        raise ValidationError("Cannot displace attached object %r" % (id,))
    try:
        direction = np.asarray(direction, dtype=float).reshape(2)
    except (TypeError, ValueError):
        raise ValidationError("Direction must be a planar vector, got %r"
                              % (direction,))
    norm = math.hypot(direction[0], direction[1])
    if not (math.isfinite(norm) and norm > 0):
        raise ValidationError("Direction must be finite and non-zero")
    direction = direction / norm
    if not (math.isfinite(dist) and dist >= 0):
        raise ValidationError("Distance must be finite and non-negative, got %r"
                              % (dist,))

    free = [o for o in scene.objects if not o.attached]
    pos = {o.id: o.xy for o in free}
    radius = {o.id: o.footprint_radius for o in free}
    weight = {o.id: o.mass * o.friction_dynamic * GRAVITY for o in free}
    others = [o.id for o in free if o.id != id]

    contacts = []
    moved = 0.0
    while dist - moved > 1e-12:
        inc = min(step, dist - moved)
        trial = dict(pos)
        trial[id] = pos[id] + direction * inc
        pushed = []
        for other in others:
            o = _overlap(trial[id], trial[other], radius[id], radius[other])
            if o > CONTACT_EPS:
                trial[other] = trial[other] + _away(trial[id], trial[other]) * o
                pushed.append(other)
        secondary = []
        for p in pushed:
            for other in others:
                if other in pushed or other in secondary:
                    continue
                o = _overlap(trial[p], trial[other], radius[p], radius[other])
                if o > CONTACT_EPS:
                    trial[other] = (trial[other] +
                                    _away(trial[p], trial[other]) * o)
                    secondary.append(other)
        touched = pushed + secondary
        guarded = [t for t in touched if t in stop_on]
        if guarded:
            contacts.extend(t for t in guarded if t not in contacts)
            break
        if max_force is not None:
            force = weight[id] + sum(weight[t] for t in touched)
            if force > max_force:
                break
        pos = trial
        moved += inc
        contacts.extend(t for t in touched if t not in contacts)

    changed = {o.id: o.moved_to(*pos[o.id]) for o in free
               if not np.array_equal(pos[o.id], o.xy)}
    if changed:
        scene = scene.with_objects(changed.get(o.id, o) for o in scene.objects)
    return scene, contacts


def approach_clearance(scene, target_id, corridor_halfwidth=0.04):
    """Obstacles blocking a vertical approach to the target.

    An obstacle blocks when its footprint intersects the vertical cylinder of
    radius ``target footprint + corridor_halfwidth`` around the target.

    Returns
    -------
    blocking : list of str
        Ids ordered by center distance to the target, then by id.
    """
    target = scene.get(target_id)
    radius = target.footprint_radius + corridor_halfwidth
    out = []
    for o in scene.objects:
        if o.id == target_id or o.attached:
            continue
        d = math.hypot(o.pose.x - target.pose.x, o.pose.y - target.pose.y)
        if d < radius + o.footprint_radius:
            out.append((d, o.id))
    return [i for _, i in sorted(out)]


def escaped_objects(scene):
    """Ids of objects outside the workspace square."""
    hw = scene.workspace_halfwidth
    return [o.id for o in scene.objects
            if abs(o.pose.x) > hw or abs(o.pose.y) > hw]


def tick_attached(scene):
    """Move every attached object rigidly with the TCP."""
    if scene.attached is None:
        return scene
    tcp = scene.hand.tcp_pose
    return scene.with_objects(
        o._replace(pose=tcp.compose(o.attach_offset)) if o.attached else o
        for o in scene.objects)


def attach(scene, id):
    """Rigidly attach an object to the TCP at their current relative pose."""
    obj = scene.get(id)
    offset = scene.hand.tcp_pose.inverse().compose(obj.pose)
    return scene.replace_object(obj._replace(attach_offset=offset))


def release(scene, id):
    """Drop an object straight down onto the table."""
    obj = scene.get(id)
    pose = Pose((obj.pose.x, obj.pose.y, obj.rest_height), (0.0, 0.0, obj.pose.yaw))
    return scene.replace_object(obj._replace(pose=pose, attach_offset=None))


def _placed(obj):
    return {'name': obj.name, 'x': obj.pose.x, 'y': obj.pose.y,
            'theta': obj.pose.yaw}


def scene_snapshot(scene):
    """A JSON-ready description of a scene.

    Objects are listed in the scenario layout (``target`` and ``obstacles``)
    with their full 3D pose, followed by the hand state.
    """
    def entry(o):
        out = _placed(o)
        out.update(id=o.id, z=o.pose.z)
        return out

    attached = scene.attached
    return {'schema_version': SNAPSHOT_VERSION,
            'tick': scene.tick,
            'target': entry(scene.target),
            'obstacles': [entry(o) for o in scene.obstacles],
            'hand': scene.hand.to_dict(),
            'attached': None if attached is None else attached.id,
            'lift_offset': scene.lift_offset}
