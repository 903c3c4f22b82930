from __future__ import absolute_import

from clutter_grasp.render import OBSTACLE_COLOR, TARGET_COLOR, render_scene
from clutter_grasp.scenes import generate_scenario

from .conftest import make_scene


def test_render_scene():
    scene = make_scene([('a', 0.07, 0.0), ('b', -0.1, 0.1)])
    svg = render_scene(scene)
    assert svg.startswith(b'<?xml')
    text = svg.decode('utf-8')
    for gid in ['workspace', 'approach-corridor', 'footprint-target',
                'footprint-a', 'footprint-b', 'tcp']:
        assert 'id="%s"' % gid in text
    assert TARGET_COLOR in text
    assert OBSTACLE_COLOR in text


def test_render_is_deterministic():
    scene = make_scene([('a', 0.07, 0.0)])
    assert render_scene(scene) == render_scene(scene)


def test_render_changes_with_scene():
    a = render_scene(make_scene([('a', 0.07, 0.0)]))
    b = render_scene(make_scene([('a', -0.07, 0.0)]))
    assert a != b


def test_render_scenario():
    scenario = generate_scenario('mug', 1, 4)
    text = render_scene(scenario).decode('utf-8')
    assert scenario.scenario_id in text
    assert 'id="footprint-obstacle_2"' in text
