from __future__ import absolute_import, division

import math

import numpy as np
import pytest

from clutter_grasp.core import ValidationError, SettleError
from clutter_grasp.geometry import Pose, ShapeDescriptor
from clutter_grasp.handrig import HandState
from clutter_grasp.world import (SceneObject, SceneState, settle, displace_object,
                                 approach_clearance, escaped_objects,
                                 tick_attached, attach, release, scene_snapshot)

from .conftest import CUBE, BALL, make_object, make_scene

DISC = ShapeDescriptor('cylinder', (0.03, 0.05))


def disc_scene(positions, masses=None):
    masses = masses or [0.1] * len(positions)
    objects = [make_object('o%d' % i, x, y, DISC, mass=m, is_target=(i == 0))
               for i, ((x, y), m) in enumerate(zip(positions, masses))]
    return SceneState(objects)


def min_gap(scene):
    objs = scene.objects
    gaps = [math.hypot(*(a.xy - b.xy)) - a.footprint_radius - b.footprint_radius
            for i, a in enumerate(objs) for b in objs[i + 1:]]
    return min(gaps)


def test_scene_state_validation():
    a = make_object('a', 0, 0, is_target=True)
    with pytest.raises(ValidationError):
        SceneState([a, a])
    with pytest.raises(ValidationError):
        SceneState([make_object('a', 0, 0)])
    scene = SceneState([a, make_object('b', 0.1, 0, name='mug')])
    assert scene.find('b').id == 'b'
    assert scene.find('mug').id == 'b'
    assert scene.find('nothing') is None
    with pytest.raises(ValidationError):
        scene.get('nothing')


def test_scene_object_validation():
    with pytest.raises(ValidationError):
        SceneObject('a', 'a', CUBE, Pose(), mass=0)
    with pytest.raises(ValidationError):
        SceneObject('a', 'a', CUBE, Pose(), friction_static=0)
    with pytest.raises(ValidationError):
        SceneObject('a', 'a', (0.1,), Pose())


def test_settle_fixed_point():
    scene = disc_scene([(0, 0), (0.1, 0), (0, 0.1)])
    out, travelled = settle(scene)
    assert travelled == 0
    assert out == scene


def test_settle_symmetric_separation():
    # discs of radius 0.03 overlapping by 0.01
    scene = disc_scene([(0, 0), (0.05, 0)])
    out, _ = settle(scene)
    assert out.get('o0').pose.x == pytest.approx(-0.005)
    assert out.get('o1').pose.x == pytest.approx(0.055)
    assert out.get('o1').pose.y == 0


def test_settle_mass_weighted():
    scene = disc_scene([(0, 0), (0.05, 0)], masses=[0.3, 0.1])
    out, _ = settle(scene)
    assert out.get('o0').pose.x == pytest.approx(-0.0025)
    assert out.get('o1').pose.x == pytest.approx(0.0575)


def test_settle_random_scenes():
    rng = np.random.default_rng(0)
    for _ in range(20):
        scene = disc_scene(rng.uniform(-0.15, 0.15, (6, 2)))
        out, _ = settle(scene)
        assert min_gap(out) >= -1e-4
        assert len(out.objects) == 6
        # settling a settled scene is a no-op
        again, travelled = settle(out)
        assert travelled < 1e-9


def test_settle_reports_residual_overlap():
    scene = disc_scene([(0, 0), (0.01, 0)])
    with pytest.raises(SettleError):
        settle(scene, phase1=0, phase2=0)


def test_displace_zero_distance():
    scene = make_scene([('a', 0.1, 0.1)])
    out, contacts = displace_object(scene, 'a', (1, 0), 0.0)
    assert out == scene
    assert contacts == []


def test_displace_free_object():
    scene = make_scene([('a', 0.1, 0.1)])
    out, contacts = displace_object(scene, 'a', (0, 2), 0.08)
    assert out.get('a').pose.y == pytest.approx(0.18)
    assert out.get('a').pose.x == pytest.approx(0.1)
    assert contacts == []
    assert scene.get('a').pose.y == 0.1


def test_displace_pushes_neighbour():
    scene = make_scene([('a', 0.1, 0.1), ('b', 0.17, 0.1)])
    out, contacts = displace_object(scene, 'a', (1, 0), 0.05)
    assert contacts == ['b']
    moved_b = out.get('b').pose.x - 0.17
    assert 0 < moved_b <= 0.05
    assert min_gap(out) >= -1e-9


def test_displace_propagates_one_level():
    d = 2 * CUBE.footprint_radius() + 0.0008
    scene = make_scene([(name, i * d, 0.15) for i, name in enumerate('abcd')])
    out, contacts = displace_object(scene, 'a', (1, 0), 0.02)
    assert contacts == ['b', 'c']
    assert out.get('c').pose.x > scene.get('c').pose.x
    assert out.get('d') == scene.get('d')
    assert min_gap(out) < -0.01
    # the overlap left at the end of the chain is settled afterwards
    settled, _ = settle(out)
    assert min_gap(settled) >= -1e-4


def test_displace_stops_on_guarded():
    scene = make_scene([('a', 0.1, 0.0)])
    out, contacts = displace_object(scene, 'a', (-1, 0), 0.1,
                                    stop_on=('target',))
    assert contacts == ['target']
    assert out.get('target') == scene.get('target')
    gap = out.get('a').pose.x - 2 * CUBE.footprint_radius()
    assert 0 <= gap < 0.005


def test_displace_force_budget():
    scene = make_scene([('a', 0.1, 0.1)])
    out, _ = displace_object(scene, 'a', (1, 0), 0.05, max_force=0.01)
    assert out == scene


def test_displace_validation():
    scene = make_scene([('a', 0.1, 0.1)])
    with pytest.raises(ValidationError):
        displace_object(scene, 'a', (0, 0), 0.05)
    with pytest.raises(ValidationError):
        displace_object(scene, 'a', (1, 0), -0.05)
    with pytest.raises(ValidationError):
        displace_object(scene, 'zzz', (1, 0), 0.05)


def test_displace_random_scenes_bounded():
    rng = np.random.default_rng(1)
    for _ in range(20):
        scene, _ = settle(disc_scene(rng.uniform(-0.15, 0.15, (4, 2))))
        angle = rng.uniform(-math.pi, math.pi)
        dist = rng.uniform(0, 0.1)
        out, _ = displace_object(scene, 'o1', (math.cos(angle), math.sin(angle)),
                                 dist)
        assert len(out.objects) == len(scene.objects)
        shifts = {o.id: math.hypot(*(o.xy - scene.get(o.id).xy))
                  for o in out.objects}
        assert all(np.isfinite(o.pose.position).all() for o in out.objects)
        assert shifts['o1'] == pytest.approx(dist)
        others = [v for k, v in shifts.items() if k != 'o1']
        assert max(others) <= dist + 1e-3
        assert sum(others) <= 3 * dist + 1e-3


def test_approach_clearance():
    assert approach_clearance(make_scene(), 'target') == []
    # obstacle center 0.02 m beyond the target edge
    r = CUBE.footprint_radius()
    scene = make_scene([('near', r + 0.02 + r, 0), ('far', 0.25, 0)])
    assert approach_clearance(scene, 'target', 0.04) == ['near']
    assert approach_clearance(scene, 'target', 0.0) == []


def test_approach_clearance_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(20):
        xy = rng.uniform(-0.15, 0.15, (5, 2))
        scene = make_scene([('o%d' % i, x, y, BALL) for i, (x, y) in enumerate(xy)])
        target = scene.target
        expected = sorted(
            (math.hypot(*(o.xy - target.xy)), o.id) for o in scene.obstacles
            if math.hypot(*(o.xy - target.xy)) <
            target.footprint_radius + 0.04 + o.footprint_radius)
        assert approach_clearance(scene, 'target') == [i for _, i in expected]


def test_escaped_objects():
    assert escaped_objects(make_scene([('a', 0, 0)])) == []
    scene = make_scene([('a', 0.31, 0), ('b', 0.30, 0), ('c', 0, -0.4)])
    assert escaped_objects(scene) == ['a', 'c']


def test_attach_follows_tcp():
    scene = make_scene(hand=HandState.at(Pose((0, 0, 0.1))))
    assert tick_attached(scene) is scene
    scene = attach(scene, 'target')
    z0 = scene.target.pose.z
    raised = scene.with_hand(scene.hand.with_tcp(Pose((0, 0, 0.15))))
    assert tick_attached(raised).target.pose.z == pytest.approx(z0 + 0.05)


def test_attach_preserves_relative_pose():
    scene = attach(make_scene(hand=HandState.at(Pose((0, 0, 0.1)))), 'target')
    offset = scene.target.attach_offset
    rng = np.random.default_rng(3)
    for _ in range(10):
        tcp = Pose(rng.uniform(-0.1, 0.1, 3), rng.uniform(-1, 1, 3))
        moved = tick_attached(scene.with_hand(scene.hand.with_tcp(tcp)))
        relative = tcp.inverse().compose(moved.target.pose)
        assert np.allclose(relative.position, offset.position, atol=1e-9)
        assert np.allclose(relative.matrix(), offset.matrix(), atol=1e-9)


def test_release_drops_to_table():
    scene = attach(make_scene(hand=HandState.at(Pose((0, 0, 0.1)))), 'target')
    scene = tick_attached(scene.with_hand(scene.hand.with_tcp(Pose((0.05, 0, 0.3)))))
    out = release(scene, 'target')
    assert out.attached is None
    assert out.target.pose.z == pytest.approx(0.028)
    assert out.target.pose.x == pytest.approx(0.05)


def test_scene_snapshot():
    scene = make_scene([('a', 0.1, 0.0)])
    snap = scene_snapshot(scene)
    assert snap['target']['id'] == 'target'
    assert [o['id'] for o in snap['obstacles']] == ['a']
    assert snap['attached'] is None
    assert snap['tick'] == 0
    assert len(snap['hand']['finger_joints']) == 12
