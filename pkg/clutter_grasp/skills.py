from __future__ import absolute_import, division

import logging
import math
from collections import namedtuple

import numpy as np

from .core import ValidationError, get_config
from .geometry import Pose, wrap_angle
from .grasping import (GeoController, GraspSettings, RewardWeights,
                       run_grasp_episode)
from .handrig import HandRig
from .world import (approach_clearance, displace_object, escaped_objects,
                    release, tick_attached)


__all__ = ('SkillRequest', 'SkillResult', 'SKILL_NAMES', 'FAILURE_MESSAGES',
           'tool_manifest', 'validate_arguments', 'scene_summary', 'execute',
           'skill_push', 'skill_pull', 'skill_move_to', 'skill_lift',
           'skill_lower', 'skill_grasp', 'skill_initarm', 'skill_inithand')


logger = logging.getLogger(__name__)

SKILL_NAMES = ('push', 'pull', 'move_to', 'lift', 'lower', 'grasp', 'initarm',
               'inithand')
SIDES = ('left', 'center', 'right')

OK = 'ok'
COLLISION = 'collision detected'
NOT_FOUND = 'target not found'
NOT_REACHED = 'target not reached'
ESCAPED = 'object escaped'
NO_OBSTACLE = 'no obstacle'
STUCK = 'stuck detected'
FAILURE_MESSAGES = frozenset([COLLISION, NOT_FOUND, NOT_REACHED, ESCAPED,
                              NO_OBSTACLE, STUCK])


class SkillRequest(namedtuple('SkillRequest', ('name', 'args'))):
    """A validated call of one skill.

    Parameters
    ----------
    name : str
        One of ``SKILL_NAMES``.
    args : dict, optional
        Arguments, checked against the skill's schema.
    """
    __slots__ = ()

    def __new__(cls, name, args=None, config=None):
        args = {} if args is None else args
        validate_arguments(name, args, config)
        return super(SkillRequest, cls).__new__(cls, name, dict(args))


class SkillResult(namedtuple('SkillResult', ('success', 'message', 'detail',
                                             'observation'))):
    """Structured feedback of one skill execution.

    Parameters
    ----------
    success : bool
    message : str
        ``'ok'`` on success, otherwise one of ``FAILURE_MESSAGES``.
    detail : str
        Free-form explanation.
    observation : dict
        Summary of the resulting scene (see :func:`scene_summary`).
    """
    __slots__ = ()

    def __new__(cls, success, message, detail='', observation=None):
        if not success and message not in FAILURE_MESSAGES:
            raise ValidationError("Unknown failure message %r" % (message,))
        return super(SkillResult, cls).__new__(cls, bool(success), message,
                                               detail, observation or {})

    def to_dict(self):
        return {'success': self.success, 'message': self.message,
                'detail': self.detail, 'observation': self.observation}


def _schemas(config):
    cfg = config.skills
    side = {'type': 'string', 'enum': list(SIDES),
            'description': 'Side of the obstacle to approach from'}
    dist = {'type': 'number', 'exclusiveMinimum': 0, 'maximum': cfg.max_dist,
            'description': 'Displacement in meters (default %g)'
                           % cfg.default_dist}
    none = {'type': 'object', 'properties': {}, 'additionalProperties': False}
    return {
        'push': ("Approaches the nearest obstacle from a specified side and "
                 "pushes it away to clear a path to the target.",
                 {'type': 'object', 'properties': {'side': side, 'dist': dist},
                  'additionalProperties': False}),
        'pull': ("Hooks the nearest obstacle from its far side and pulls it "
                 "toward the robot base.",
                 {'type': 'object', 'properties': {'side': side, 'dist': dist},
                  'additionalProperties': False}),
        'move_to': ("Moves the end-effector to the pre-grasp hover position "
                    "above the specified object.",
                    {'type': 'object',
                     'properties': {'target': {
                         'type': 'string',
                         'description': 'Object id or name'}},
                     'required': ['target'], 'additionalProperties': False}),
        'lift': ("Lifts the end-effector vertically by a specified distance.",
                 {'type': 'object',
                  'properties': {'height': {
                      'type': 'number', 'exclusiveMinimum': 0,
                      'maximum': cfg.max_tcp_height,
                      'description': 'Lift distance in meters (default %g)'
                                     % cfg.lift_height}},
                  'additionalProperties': False}),
        'lower': ("Lowers the end-effector by the distance of the preceding "
                  "lifts.", none),
        'grasp': ("Runs the geometry-driven grasp controller on the target "
                  "and lifts it.", none),
        'initarm': ("Resets the arm to its safe home pose.", none),
        'inithand': ("Opens the hand, releasing anything it holds.", none),
    }


def tool_manifest(config=None):
    """The machine-readable description of every skill.

    Returns
    -------
    tools : list of dict
        One ``{'name', 'description', 'inputSchema'}`` entry per skill, in
        ``SKILL_NAMES`` order.
    """
    schemas = _schemas(get_config(config))
    return [{'name': name, 'description': schemas[name][0],
             'inputSchema': schemas[name][1]} for name in SKILL_NAMES]


def _is_number(value):
    return (isinstance(value, (int, float)) and not isinstance(value, bool) and
            math.isfinite(value))


def _check_value(key, value, schema):
    kind = schema['type']
    if kind == 'string':
        if not isinstance(value, str):
            return "%r must be a string" % key
    elif kind == 'number':
        if not _is_number(value):
            return "%r must be a finite number" % key
        if 'exclusiveMinimum' in schema and value <= schema['exclusiveMinimum']:
            return "%r must be > %g" % (key, schema['exclusiveMinimum'])
        if 'maximum' in schema and value > schema['maximum']:
            return "%r must be <= %g" % (key, schema['maximum'])
    if 'enum' in schema and value not in schema['enum']:
        return "%r must be one of %s" % (key, ', '.join(schema['enum']))
    return None


def validate_arguments(name, args, config=None):
    """Check skill arguments against the tool manifest.

    Raises
    ------
    ValidationError
        On an unknown skill name or any invalid argument.
    """
    if name not in SKILL_NAMES:
        raise ValidationError("Unknown skill %r, expected one of %s"
                              % (name, ', '.join(SKILL_NAMES)))
    if not isinstance(args, dict):
        raise ValidationError("Arguments of %r must be an object" % name)
    schema = _schemas(get_config(config))[name][1]
    props = schema['properties']
    errors = []
    for key in schema.get('required', ()):
        if key not in args:
            errors.append("missing required argument %r" % key)
    for key, value in sorted(args.items()):
        if key not in props:
            errors.append("unexpected argument %r" % (key,))
            continue
        msg = _check_value(key, value, props[key])
        if msg is not None:
            errors.append(msg)
    if errors:
        raise ValidationError("Invalid arguments for %r: %s"
                              % (name, '; '.join(errors)))
    return args


def _round(v):
    return round(float(v), 4)


def scene_summary(scene, config=None):
    """A JSON-ready summary of the scene for planners and clients."""
    cfg = get_config(config)
    tcp = scene.hand.tcp_pose
    attached = scene.attached
    return {'objects': [o.summary() for o in scene.objects],
            'blocking': approach_clearance(scene, scene.target.id,
                                           cfg.world.corridor_halfwidth),
            'escaped': escaped_objects(scene),
            'tcp': {'x': _round(tcp.x), 'y': _round(tcp.y), 'z': _round(tcp.z),
                    'yaw': _round(tcp.yaw)},
            'attached': None if attached is None else attached.id}


def _result(scene, cfg, success, message, detail='', **extra):
    observation = scene_summary(scene, cfg)
    observation.update(extra)
    return SkillResult(success, message, detail, observation)


def _set_tcp(scene, pose):
    return tick_attached(scene.with_hand(scene.hand.with_tcp(pose)))


def _check_dist(dist, cfg):
    if dist is None:
        return cfg.skills.default_dist
    if not _is_number(dist) or not 0 < dist <= cfg.skills.max_dist:
        raise ValidationError("dist must be in (0, %g], got %r"
                              % (cfg.skills.max_dist, dist))
    return float(dist)


def side_yaw(side, config=None):
    """Yaw offset of the approach for a side: left +, center 0, right -."""
    offset = get_config(config).skills.side_yaw
    try:
        return {'left': offset, 'center': 0.0, 'right': -offset}[side]
    except KeyError:
        raise ValidationError("side must be one of %s, got %r"
                              % (', '.join(SIDES), side))


def _select_obstacle(scene, cfg):
    target = scene.target
    blocking = approach_clearance(scene, target.id, cfg.world.corridor_halfwidth)
    if blocking:
        return scene.get(blocking[0])
    free = [o for o in scene.obstacles if not o.attached]
    return min(free, key=lambda o: (math.hypot(o.pose.x - target.pose.x,
                                               o.pose.y - target.pose.y), o.id))


def _rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _clear(scene, kind, side, dist, config):
    cfg = get_config(config)
    offset = side_yaw(side, cfg)
    dist = _check_dist(dist, cfg)
    if not [o for o in scene.obstacles if not o.attached]:
        return scene, _result(scene, cfg, False, NO_OBSTACLE,
                              "there are no obstacles to %s" % kind)
    target = scene.target
    obj = _select_obstacle(scene, cfg)
    if kind == 'push':
        base = obj.xy - target.xy
        n = math.hypot(*base)
        base = base / n if n > 0 else np.array([1.0, 0.0])
    else:
        base = np.array([0.0, -1.0])
    direction = _rotate(base, offset)
    yaw = wrap_angle(math.atan2(base[1], base[0]) + offset)

    moved_scene, contacts = displace_object(scene, obj.id, direction, dist,
                                            step=cfg.world.push_step,
                                            stop_on=(target.id,),
                                            max_force=cfg.world.max_push_force)
    after = moved_scene.get(obj.id)
    moved = math.hypot(*(after.xy - obj.xy))
    contact = after.xy - direction * after.footprint_radius
    pose = Pose((contact[0], contact[1], after.pose.z), (0.0, 0.0, yaw))
    moved_scene = _set_tcp(moved_scene, pose)
    extra = dict(selected=obj.id, approach_yaw=yaw, moved=_round(moved),
                 contacts=contacts)
    logger.debug("%s %s by %.4f of %.4f m", kind, obj.id, moved, dist)

    escaped = escaped_objects(moved_scene)
    if escaped:
        return moved_scene, _result(moved_scene, cfg, False, ESCAPED,
                                    "%s left the workspace" % ', '.join(escaped),
                                    **extra)
    if target.id in contacts:
        return moved_scene, _result(moved_scene, cfg, False, COLLISION,
                                    "%s of %s stopped after %.3f m to avoid the "
                                    "target" % (kind, obj.id, moved), **extra)
    if moved < cfg.skills.stuck_fraction * dist:
        return moved_scene, _result(moved_scene, cfg, False, STUCK,
                                    "%s moved %.3f of %.3f m"
                                    % (obj.id, moved, dist), **extra)
    return moved_scene, _result(moved_scene, cfg, True, OK,
                                "%s %s %.3f m" % (kind, obj.id, moved), **extra)


def skill_push(scene, side='center', dist=None, config=None):
    """Push the nearest blocking obstacle away from the target.

    The obstacle moves along the direction from the target to it, rotated
    by the side's yaw offset.

    Parameters
    ----------
    scene : SceneState
    side : {'left', 'center', 'right'}, optional
    dist : float, optional
        Meters, in ``(0, 0.15]``. Defaults to 0.08.
    config : AttrDict, optional

    Returns
    -------
    scene : SceneState
    result : SkillResult
    """
    return _clear(scene, 'push', side, dist, config)


def skill_pull(scene, side='center', dist=None, config=None):
    """Pull the nearest blocking obstacle toward the robot base (-y)."""
    return _clear(scene, 'pull', side, dist, config)


def skill_move_to(scene, target, config=None):
    """Hover the TCP above an object, aligned with its yaw."""
    cfg = get_config(config)
    obj = scene.find(target)
    if obj is None:
        return scene, _result(scene, cfg, False, NOT_FOUND,
                              "no object named %r" % (target,))
    pose = Pose((obj.pose.x, obj.pose.y, obj.pose.z + cfg.skills.hover_height),
                (0.0, 0.0, obj.pose.yaw))
    scene = _set_tcp(scene, pose)._replace(lift_offset=0.0)
    return scene, _result(scene, cfg, True, OK, "hovering above %s" % obj.id)


def skill_lift(scene, height=None, config=None):
    """Raise the TCP, clamped to the maximum TCP height."""
    cfg = get_config(config)
    if height is None:
        height = cfg.skills.lift_height
    if not _is_number(height) or height <= 0:
        raise ValidationError("height must be a positive number, got %r"
                              % (height,))
    tcp = scene.hand.tcp_pose
    z = min(tcp.z + height, cfg.skills.max_tcp_height)
    dz = max(z - tcp.z, 0.0)
    scene = _set_tcp(scene, tcp.translated(dz=dz))
    scene = scene._replace(lift_offset=scene.lift_offset + dz)
    if dz < height:
        detail = ("lift clamped at %g m, raised %.3f of %.3f m"
                  % (cfg.skills.max_tcp_height, dz, height))
    else:
        detail = "raised %.3f m" % dz
    return scene, _result(scene, cfg, True, OK, detail)


def skill_lower(scene, config=None):
    """Undo the lifts made since the last reset or move."""
    cfg = get_config(config)
    dz = scene.lift_offset
    scene = _set_tcp(scene, scene.hand.tcp_pose.translated(dz=-dz))
    scene = scene._replace(lift_offset=0.0)
    return scene, _result(scene, cfg, True, OK, "lowered %.3f m" % dz)


def grasp_controller(config=None):
    cfg = get_config(config)
    return GeoController(squeeze_rate=cfg.grasp.squeeze_rate,
                         contact_threshold=cfg.grasp.contact_threshold,
                         min_contacts=cfg.grasp.min_contacts,
                         lift_height=cfg.skills.lift_height,
                         rig=HandRig.from_config(cfg.hand))


def skill_grasp(scene, config=None, dr=None, seed=0):
    """Grasp and lift the target with the geometry controller.

    Returns
    -------
    scene : SceneState
    result : SkillResult
    outcome : GraspOutcome or None
        ``None`` when a precondition failed and no episode ran.
    """
    cfg = get_config(config)
    target = scene.target
    reach = np.linalg.norm(np.subtract(scene.hand.tcp_pose.position,
                                       target.pose.position))
    if reach > cfg.grasp.reach:
        return scene, _result(scene, cfg, False, NOT_REACHED,
                              "hand is %.3f m from the target" % reach), None
    blockers = approach_clearance(scene, target.id, cfg.grasp.clearance)
    if blockers:
        return scene, _result(scene, cfg, False, COLLISION,
                              "grasp blocked by %s" % ', '.join(blockers)), None

    settings = GraspSettings.from_config(cfg.grasp)
    outcome = run_grasp_episode(scene, target.id, grasp_controller(cfg),
                                dr=dr, settings=settings,
                                weights=RewardWeights.from_config(cfg.reward),
                                rig=HandRig.from_config(cfg.hand), seed=seed)
    scene = outcome.scene
    extra = dict(ticks=outcome.ticks, height=_round(outcome.final_height))
    if outcome.success:
        return scene, _result(scene, cfg, True, OK,
                              "target held above %g m for %d ticks"
                              % (cfg.reward.success_height, settings.hold_ticks),
                              **extra), outcome
    if outcome.slipped:
        detail = "grasp failed: gripper slip"
    else:
        detail = "grasp failed: no stable lift within %d ticks" % outcome.ticks
    return scene, _result(scene, cfg, False, STUCK, detail, **extra), outcome


def skill_initarm(scene, config=None):
    """Return the TCP to the home pose."""
    cfg = get_config(config)
    scene = _set_tcp(scene, Pose(cfg.skills.home_position))
    scene = scene._replace(lift_offset=0.0)
    return scene, _result(scene, cfg, True, OK, "arm at home pose")


def skill_inithand(scene, config=None):
    """Open every finger, dropping any held object."""
    cfg = get_config(config)
    held = scene.attached
    if held is not None:
        scene = release(scene, held.id)
    scene = scene.with_hand(scene.hand.open())
    detail = "hand open" if held is None else "hand open, released %s" % held.id
    return scene, _result(scene, cfg, True, OK, detail)


def execute(scene, request, config=None, dr=None, seed=0):
    """Dispatch a skill request.

    Parameters
    ----------
    scene : SceneState
    request : SkillRequest
    config : AttrDict, optional
    dr : DRSample, optional
        Domain randomization for grasp episodes.
    seed : int, optional
        Noise seed for grasp episodes.

    Returns
    -------
    scene : SceneState
    result : SkillResult
    outcome : GraspOutcome or None
        Only set by ``grasp``.
    """
    cfg = get_config(config)
    name, args = request.name, request.args
    if name == 'grasp':
        return skill_grasp(scene, cfg, dr=dr, seed=seed)
    if name in ('push', 'pull'):
        func = skill_push if name == 'push' else skill_pull
        scene, result = func(scene, args.get('side', 'center'), args.get('dist'),
                             config=cfg)
    elif name == 'move_to':
        scene, result = skill_move_to(scene, args['target'], cfg)
    elif name == 'lift':
        scene, result = skill_lift(scene, args.get('height'), cfg)
    elif name == 'lower':
        scene, result = skill_lower(scene, cfg)
    elif name == 'initarm':
        scene, result = skill_initarm(scene, cfg)
    else:
        scene, result = skill_inithand(scene, cfg)
    return scene, result, None
