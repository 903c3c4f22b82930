from __future__ import absolute_import, division

import json
import logging
import math
import os
from collections import namedtuple

import numpy as np
from scipy.spatial.distance import pdist

from .core import (ValidationError, ParseError, SettleError, InfeasibleScenario,
                   DATA_DIR, read_yaml)
from .geometry import Pose, ShapeDescriptor
from .handrig import HandState
from .world import SceneObject, SceneState, settle


__all__ = ('ObjectSpec', 'ObjectRoster', 'PlacedObject', 'ScenarioConfig',
           'load_roster', 'generate_scenario', 'generate_benchmark',
           'serialize', 'parse', 'derive_seed', 'scenario_to_scene',
           'BENCHMARK_TARGETS', 'LEVELS', 'SCENARIOS_PER_CELL')


logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'
BENCHMARK_TARGETS = ('cube', 'can', 'pear', 'apple', 'mug', 'lego', 'ball')
LEVELS = (1, 2, 3)
SCENARIOS_PER_CELL = 10
POOL_SIZE = 6

REGION_HALFWIDTH = 0.10
MIN_DISTANCE = 0.06
MAX_SETTLE_DISPLACEMENT = 0.01
MAX_ATTEMPTS = 1000
PLACEMENT_TRIES = 100
# Footprint overlap a fresh placement may leave for settle to resolve
PLACEMENT_OVERLAP = 0.005
DECIMALS = 6

TARGET_ID = 'target'

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
FNV_MASK = 0xffffffffffffffff

ROSTER_PATH = os.path.join(DATA_DIR, 'roster.yaml')


ObjectSpec = namedtuple('ObjectSpec', ('name', 'shape', 'mass'))


class ObjectRoster(object):
    """The object catalog and the clutter pool of every target.

    Parameters
    ----------
    objects : dict
        Mapping of name to ObjectSpec.
    pools : dict
        Mapping of target name to its ordered pool of 6 obstacle names.
    target_friction, clutter_friction : tuple of float, optional
        ``(static, dynamic)`` friction of targets and of clutter.
    """
    __slots__ = ('objects', 'pools', 'target_friction', 'clutter_friction')

    def __init__(self, objects, pools, target_friction=(2.0, 2.0),
                 clutter_friction=(1.0, 1.0)):
        for target, pool in pools.items():
            if target not in objects:
                raise ValidationError("Target %r is not in the object catalog"
                                      % target)
            if len(pool) != POOL_SIZE:
                raise ValidationError("The pool of %r must list exactly %d "
                                      "objects, got %d"
                                      % (target, POOL_SIZE, len(pool)))
            if len(set(pool)) != len(pool):
                raise ValidationError("The pool of %r has duplicate names" % target)
            missing = [n for n in pool if n not in objects]
            if missing:
                raise ValidationError("The pool of %r names unknown objects: %s"
                                      % (target, ', '.join(missing)))
        self.objects = dict(objects)
        self.pools = {k: tuple(v) for k, v in pools.items()}
        self.target_friction = tuple(target_friction)
        self.clutter_friction = tuple(clutter_friction)

    def __repr__(self):
        return 'ObjectRoster<%d objects, %d targets>' % (len(self.objects),
                                                          len(self.pools))

    @property
    def targets(self):
        return tuple(self.pools)

    def spec(self, name):
        try:
            return self.objects[name]
        except KeyError:
            raise ValidationError("Unknown object %r" % (name,))

    def pool(self, target):
        try:
            return self.pools[target]
        except KeyError:
            raise ValidationError("Unknown target %r, expected one of %s"
                                  % (target, ', '.join(sorted(self.pools))))

    @classmethod
    def from_dict(cls, data):
        try:
            objects = {}
            for name, entry in data['objects'].items():
                objects[name] = ObjectSpec(name, ShapeDescriptor.from_dict(entry),
                                           float(entry['mass']))
            friction = data.get('friction', {})
            return cls(objects, data['targets'],
                       target_friction=friction.get('target', (2.0, 2.0)),
                       clutter_friction=friction.get('clutter', (1.0, 1.0)))
        except (KeyError, TypeError, AttributeError) as e:
            raise ValidationError("Invalid roster: %s" % e)


_ROSTER = None


def load_roster(path=None):
    """Load an object roster from YAML.

    Parameters
    ----------
    path : str, optional
        Defaults to the roster shipped with the package, which covers the
        seven benchmark targets.

    Returns
    -------
    roster : ObjectRoster
    """
    global _ROSTER
    if path is None:
        if _ROSTER is None:
            _ROSTER = ObjectRoster.from_dict(read_yaml(ROSTER_PATH))
        return _ROSTER
    return ObjectRoster.from_dict(read_yaml(path))


class PlacedObject(namedtuple('PlacedObject', ('name', 'x', 'y', 'theta'))):
    """A named object at a planar pose."""
    __slots__ = ()


class ScenarioConfig(namedtuple('ScenarioConfig', ('schema_version', 'seed',
                                                   'level', 'target',
                                                   'obstacles'))):
    """A benchmark scene: the target and its obstacles at fixed poses.

    Constructing a config validates it: ``2 * level`` obstacles, every
    position within the 0.10 m clutter region, and every pair of centers at
    least 0.06 m apart.
    """
    __slots__ = ()

    def __new__(cls, schema_version, seed, level, target, obstacles):
        if schema_version != SCHEMA_VERSION:
            raise ValidationError("Unknown schema version %r, expected %r"
                                  % (schema_version, SCHEMA_VERSION))
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValidationError("Seed must be a non-negative integer, got %r"
                                  % (seed,))
        if level not in LEVELS or isinstance(level, bool):
            raise ValidationError("Level must be 1, 2 or 3, got %r" % (level,))
        target = _placed(target)
        obstacles = tuple(_placed(o) for o in obstacles)
        if len(obstacles) != 2 * level:
            raise ValidationError("Level %d scenarios need %d obstacles, got %d"
                                  % (level, 2 * level, len(obstacles)))
        placed = (target,) + obstacles
        for o in placed:
            if abs(o.x) > REGION_HALFWIDTH or abs(o.y) > REGION_HALFWIDTH:
                raise ValidationError("Object %r at (%r, %r) is outside the "
                                      "clutter region" % (o.name, o.x, o.y))
            if abs(o.theta) > math.pi + 1e-6:
                raise ValidationError("Object %r has orientation %r outside "
                                      "[-pi, pi]" % (o.name, o.theta))
        xy = np.array([(o.x, o.y) for o in placed])
        if pdist(xy).min() < MIN_DISTANCE:
            raise ValidationError("Object centers must be at least %.2f m apart"
                                  % MIN_DISTANCE)
        return super(ScenarioConfig, cls).__new__(cls, schema_version, seed,
                                                  level, target, obstacles)

    @property
    def scenario_id(self):
        return '%s-L%d-%016x' % (self.target.name, self.level, self.seed)


def _placed(obj):
    if isinstance(obj, dict):
        try:
            obj = (obj['name'], obj['x'], obj['y'], obj['theta'])
        except KeyError as e:
            raise ValidationError("Object entry is missing field %s" % e)
    try:
        name, x, y, theta = obj
    except (TypeError, ValueError):
        raise ValidationError("Invalid object entry %r" % (obj,))
    if not isinstance(name, str) or not name:
        raise ValidationError("Object names must be non-empty strings")
    values = []
    for v in (x, y, theta):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError("Object %r has a non-numeric pose" % name)
        if not math.isfinite(v):
            raise ValidationError("Object %r has a non-finite pose" % name)
        values.append(float(v))
    return PlacedObject(name, *values)


def derive_seed(master_seed, target, level, index):
    """64-bit FNV-1a hash of ``"master_seed|target|level|index"``.

    >>> derive_seed(42, 'cube', 1, 0) == derive_seed(42, 'cube', 1, 0)
    True
    """
    text = '%d|%s|%d|%d' % (master_seed, target, level, index)
    h = FNV_OFFSET
    for byte in text.encode('utf-8'):
        h = ((h ^ byte) * FNV_PRIME) & FNV_MASK
    return h


def _sample_layout(rng, radii, tries=PLACEMENT_TRIES):
    """Place one center per footprint radius, one at a time.

    Each center keeps at least ``MIN_DISTANCE`` from the ones placed before
    it, and its footprint overlaps theirs by at most ``PLACEMENT_OVERLAP``.

    Returns ``(None, None)`` if some object finds no free spot in ``tries``
    samples.
    """
    radii = np.asarray(radii, dtype=float)
    n = len(radii)
    xy = np.empty((n, 2))
    for i in range(n):
        spacing = np.maximum(MIN_DISTANCE, radii[:i] + radii[i] - PLACEMENT_OVERLAP)
        for _ in range(tries):
            p = np.round(rng.uniform(-REGION_HALFWIDTH, REGION_HALFWIDTH, size=2),
                         DECIMALS)
            if (np.hypot(*(xy[:i] - p).T) >= spacing).all():
                xy[i] = p
                break
        else:
            return None, None
    theta = np.round(rng.uniform(-math.pi, math.pi, size=n), DECIMALS)
    return xy, theta


def generate_scenario(target_name, level, seed, roster=None,
                      max_attempts=MAX_ATTEMPTS):
    """Sample a valid scenario for one target and clutter level.

    The target and the first ``2 * level`` objects of its pool are placed one
    at a time, uniformly in the clutter region with uniform yaw. Each object
    is resampled up to ``PLACEMENT_TRIES`` times until its center is 0.06 m
    from every center already placed and its footprint barely overlaps
    theirs. A layout where some object finds no spot, or that moves more
    than 0.01 m while settling, is one rejected attempt, and the whole
    layout is resampled.

    Parameters
    ----------
    target_name : str
    level : {1, 2, 3}
    seed : int
        Seed of the layout sampler. The result is a pure function of
        ``(target_name, level, seed, roster)``.
    roster : ObjectRoster, optional
    max_attempts : int, optional
        Consecutive rejections before giving up.

    Returns
    -------
    config : ScenarioConfig
    """
    roster = load_roster() if roster is None else roster
    if level not in LEVELS:
        raise ValidationError("Level must be 1, 2 or 3, got %r" % (level,))
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("Scenario seed must be a non-negative integer, got %r"
                              % (seed,))
    names = (target_name,) + roster.pool(target_name)[:2 * level]
    radii = [roster.spec(n).shape.footprint_radius() for n in names]
    rng = np.random.default_rng(seed)
    for attempt in range(max_attempts):
        xy, theta = _sample_layout(rng, radii)
        if xy is None:
            continue
        placed = [PlacedObject(n, float(x), float(y), float(t))
                  for n, (x, y), t in zip(names, xy, theta)]
        config = ScenarioConfig(SCHEMA_VERSION, seed, level, placed[0],
                                placed[1:])
        try:
            _, displacement = settle(_build_scene(config, roster))
        except SettleError:
            continue
        if displacement > MAX_SETTLE_DISPLACEMENT:
            continue
        logger.debug("Accepted %s after %d attempts", config.scenario_id,
                     attempt + 1)
        return config
    raise InfeasibleScenario("No valid layout for %r at level %d after %d "
                             "attempts" % (target_name, level, max_attempts))


def benchmark_plan(master_seed, targets=BENCHMARK_TARGETS, levels=LEVELS,
                   count=SCENARIOS_PER_CELL):
    """The ``(target, level, index, seed)`` of every benchmark scenario."""
    return [(t, l, i, derive_seed(master_seed, t, l, i))
            for t in targets for l in levels for i in range(count)]


def generate_benchmark(master_seed, roster=None, targets=BENCHMARK_TARGETS,
                       levels=LEVELS, count=SCENARIOS_PER_CELL):
    """Generate the full scenario matrix.

    Returns
    -------
    scenarios : list of (str, ScenarioConfig)
        ``(file name, config)`` pairs in target, level, index order.
    """
    roster = load_roster() if roster is None else roster
    missing = [t for t in targets if t not in roster.pools]
    if missing:
        raise ValidationError("Roster does not cover targets: %s"
                              % ', '.join(missing))
    return [(scenario_filename(t, l, i), generate_scenario(t, l, seed, roster))
            for t, l, i, seed in benchmark_plan(master_seed, targets, levels,
                                                count)]


def scenario_filename(target, level, index):
    return '%s_level%d_%02d.json' % (target, level, index)


def _fmt(v):
    out = '%.*f' % (DECIMALS, v)
    return '0.000000' if out == '-0.000000' else out


def _fmt_object(o):
    return ('{"name": %s, "x": %s, "y": %s, "theta": %s}'
            % (json.dumps(o.name), _fmt(o.x), _fmt(o.y), _fmt(o.theta)))


def serialize(config):
    """Encode a scenario as canonical JSON bytes.

    Keys are written in schema order and numbers with 6 fixed decimals, so
    equal configs always produce identical bytes.
    """
    lines = ['{',
             '  "schema_version": %s,' % json.dumps(config.schema_version),
             '  "seed": %d,' % config.seed,
             '  "level": %d,' % config.level,
             '  "target": %s,' % _fmt_object(config.target),
             '  "obstacles": [']
    body = ['    %s' % _fmt_object(o) for o in config.obstacles]
    lines.append(',\n'.join(body))
    lines.extend(['  ]', '}', ''])
    return '\n'.join(lines).encode('utf-8')


def parse(data):
    """Decode and validate scenario JSON bytes.

    Raises
    ------
    ParseError
        If the document isn't valid JSON.
    ValidationError
        If the document doesn't describe a valid scenario.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode('utf-8')
        except UnicodeDecodeError as e:
            raise ParseError("Scenario is not valid UTF-8: %s" % e)
    try:
        doc = json.loads(data)
    except ValueError as e:
        raise ParseError("Malformed scenario document: %s" % e)
    if not isinstance(doc, dict):
        raise ValidationError("Scenario document must be a JSON object")
    missing = [k for k in ScenarioConfig._fields if k not in doc]
    if missing:
        raise ValidationError("Scenario document is missing fields: %s"
                              % ', '.join(missing))
    if doc['schema_version'] != SCHEMA_VERSION:
        raise ValidationError("Unknown schema version %r" % (doc['schema_version'],))
    if not isinstance(doc['obstacles'], list):
        raise ValidationError("Scenario obstacles must be a list")
    return ScenarioConfig(doc['schema_version'], doc['seed'], doc['level'],
                          doc['target'], doc['obstacles'])


def read_scenario(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except (IOError, OSError) as e:
        raise ValidationError("Failed to read scenario %r: %s" % (path, e))
    return parse(data)


def _scene_object(id, placed, spec, friction, is_target):
    obj = SceneObject(id, placed.name, spec.shape, Pose(), mass=spec.mass,
                      friction_static=friction[0], friction_dynamic=friction[1],
                      is_target=is_target)
    pose = Pose((placed.x, placed.y, obj.rest_height), (0.0, 0.0, placed.theta))
    return obj._replace(pose=pose)


def _build_scene(config, roster, hand=None, workspace_halfwidth=0.30):
    objects = [_scene_object(TARGET_ID, config.target,
                             roster.spec(config.target.name),
                             roster.target_friction, True)]
    for i, o in enumerate(config.obstacles, 1):
        objects.append(_scene_object('obstacle_%d' % i, o, roster.spec(o.name),
                                     roster.clutter_friction, False))
    return SceneState(objects, hand, workspace_halfwidth)


def scenario_to_scene(config, roster=None, hand=None, workspace_halfwidth=0.30,
                      tolerance=1e-4):
    """Instantiate and settle the world described by a scenario.

    The target gets id ``'target'`` and the obstacles ``'obstacle_1'``,
    ``'obstacle_2'``, ... in order. Objects rest upright on the table.

    Parameters
    ----------
    config : ScenarioConfig
    roster : ObjectRoster, optional
    hand : HandState, optional
        Defaults to an open hand at the origin.
    workspace_halfwidth : float, optional
    tolerance : float, optional
        Largest footprint overlap allowed to remain after settling, meters.

    Returns
    -------
    scene : SceneState
    """
    roster = load_roster() if roster is None else roster
    if hand is None:
        hand = HandState()
    scene, _ = settle(_build_scene(config, roster, hand, workspace_halfwidth),
                      tolerance=tolerance)
    return scene
