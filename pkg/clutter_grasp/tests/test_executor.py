from __future__ import absolute_import, division

import csv
import io
import json

import pytest

from clutter_grasp.core import (ClutterGraspException, SettleError, ValidationError,
                                default_config)
from clutter_grasp.executor import (ABLATIONS, OUTCOMES, BenchmarkTable,
                                    EpisodeLimits, EpisodeReport, home_hand,
                                    load_scenarios, load_scene, run_benchmark,
                                    run_episode)
from clutter_grasp.formats import write_bundle
from clutter_grasp.planner import GraspOnlyPlanner, PlanAction, make_planner
from clutter_grasp.scenes import (ScenarioConfig, generate_scenario, serialize,
                                  scenario_filename)

# Obstacles well outside the approach corridor
CLEAR = ScenarioConfig('1.0', 7, 1, ('cube', 0.0, 0.0, 0.0),
                       [('can', -0.1, 0.1, 0.0), ('foam_brick', 0.1, 0.1, 0.3)])
# The can sits in the approach corridor, on the right of the target
BLOCKED = ScenarioConfig('1.0', 8, 1, ('cube', 0.0, 0.0, 0.0),
                         [('can', 0.07, 0.0, 0.0), ('foam_brick', -0.1, 0.1, 0.0)])
# The can blocks the target and is wedged against the mug behind it
JAMMED = ScenarioConfig('1.0', 9, 1, ('cube', -0.06, 0.0, 0.0),
                        [('can', 0.03, 0.0, 0.0), ('mug', 0.0958, -0.038, 0.0)])


def actions(report):
    return [a.action for a, _ in report.trace]


def test_episode_limits():
    assert EpisodeLimits() == (40, 5)
    assert EpisodeLimits.from_config() == (40, 5)
    for kwargs in [dict(max_steps=0), dict(max_steps=41), dict(max_steps=True),
                   dict(replan_limit=6), dict(replan_limit=-1),
                   dict(max_steps=2.0)]:
        with pytest.raises(ValidationError):
            EpisodeLimits(**kwargs)


def test_load_scene():
    scene = load_scene(CLEAR)
    assert scene.hand == home_hand()
    assert scene.hand.tcp_pose.position == (0.0, -0.3, 0.4)
    assert scene.target.name == 'cube'
    assert len(scene.obstacles) == 2


def test_load_scene_uses_penetration_tolerance():
    config = default_config()
    config.world.penetration_tolerance = -1.0
    with pytest.raises(SettleError):
        load_scene(CLEAR, config)
    config.world.penetration_tolerance = 1e-4
    assert load_scene(CLEAR, config) == load_scene(CLEAR)


def test_clear_scenario_is_grasped():
    report = run_episode(CLEAR, make_planner('scripted'))
    assert report.outcome == 'success'
    assert report.success
    assert actions(report) == ['move_to', 'grasp']
    assert report.steps_used == 2
    assert report.replans_used == 0
    assert report.flags == ()
    assert report.scenario_id == CLEAR.scenario_id
    assert report.row() == ('cube', 1, 7, 'success', 2, 0)


def test_blocked_scenario_is_cleared_then_grasped():
    report = run_episode(BLOCKED, make_planner('scripted'))
    assert report.outcome == 'success'
    assert actions(report) == ['move_to', 'push', 'move_to', 'grasp']
    push, result = report.trace[1]
    assert push.args == {'side': 'right'}
    assert result.success
    assert result.observation['selected'] == 'obstacle_1'


def test_grasp_only_fails_on_blocked_scenario():
    limits = EpisodeLimits(max_steps=6)
    report = run_episode(BLOCKED, GraspOnlyPlanner(), limits)
    assert report.outcome == 'fail_steps'
    assert actions(report) == ['move_to'] + ['grasp'] * 5
    assert report.steps_used == 6
    assert report.replans_used == 5
    assert all(r.message == 'collision detected' for _, r in report.trace[1:])


def test_feedback_is_withheld_after_replan_limit():
    seen = []
    inner = GraspOnlyPlanner()

    def planner(ctx):
        seen.append(ctx.last_feedback)
        return inner(ctx)

    report = run_episode(BLOCKED, planner, EpisodeLimits(6, 2))
    assert report.replans_used == 2
    assert seen[0] is None
    assert seen[1].success
    assert [f.message for f in seen[2:4]] == ['collision detected'] * 2
    assert seen[4:] == [None, None]


def test_no_replan_never_feeds_back_failures():
    report = run_episode(BLOCKED, GraspOnlyPlanner(), EpisodeLimits(4, 0))
    assert report.replans_used == 0
    assert report.steps_used == 4


def test_failure_feedback_frees_jammed_obstacle():
    config = default_config()
    # enough to slide the can, not the can and the mug together
    config.world.max_push_force = 4.0
    full = run_episode(JAMMED, make_planner('scripted'), config=config)
    assert full.outcome == 'success'
    assert actions(full)[:4] == ['move_to', 'push', 'move_to', 'pull']
    assert full.trace[1][1].message == 'stuck detected'
    assert full.replans_used == 1

    blind = run_episode(JAMMED, make_planner('scripted'), EpisodeLimits(40, 0),
                        config)
    assert blind.outcome == 'fail_steps'
    assert blind.steps_used == 40
    assert 'pull' not in actions(blind)
    assert all(r.message == 'stuck detected' for a, r in blind.trace
               if a.action == 'push')


def test_planner_error_ends_episode():
    def broken(ctx):
        raise RuntimeError("no idea")

    report = run_episode(CLEAR, broken)
    assert report.outcome == 'fail_steps'
    assert report.steps_used == 0
    assert report.flags == ('planner_error',)

    report = run_episode(CLEAR, lambda ctx: 'grasp')
    assert report.flags == ('planner_error',)


def test_escape_ends_episode():
    def shove(ctx):
        return PlanAction('push', {'dist': 0.15})

    report = run_episode(BLOCKED, shove)
    assert report.outcome == 'fail_escape'
    assert report.trace[-1][1].message == 'object escaped'
    assert report.steps_used <= 5


def test_episode_is_deterministic():
    scenario = generate_scenario('mug', 2, 3)
    a = run_episode(scenario, make_planner('scripted'))
    b = run_episode(scenario, make_planner('scripted'))
    assert a.to_dict() == b.to_dict()
    assert a.outcome in OUTCOMES
    assert a.steps_used == len(a.trace) <= 40
    assert a.replans_used <= 5


def test_randomized_episode_is_deterministic():
    a = run_episode(CLEAR, make_planner('scripted'), randomize=True)
    b = run_episode(CLEAR, make_planner('scripted'), randomize=True)
    assert a.to_dict() == b.to_dict()


def test_rendered_contexts():
    renders = []

    def planner(ctx):
        renders.append(ctx.render)
        return PlanAction('initarm')

    run_episode(CLEAR, planner, EpisodeLimits(2, 5), render=True)
    assert len(renders) == 2
    assert all(r.startswith(b'<?xml') for r in renders)


def test_report_to_dict():
    report = run_episode(CLEAR, make_planner('scripted'))
    doc = json.loads(json.dumps(report.to_dict()))
    assert doc['outcome'] == 'success'
    assert doc['trace'][0]['action'] == {'action': 'move_to',
                                         'args': {'target': 'target'},
                                         'reason': report.trace[0][0].reason}
    assert doc['trace'][1]['result']['success']


def report(target, level, seed, outcome):
    return EpisodeReport('%s-L%d-%016x' % (target, level, seed), target, level,
                         seed, outcome, 3, 0, (), ())


def test_benchmark_table():
    table = BenchmarkTable([report('mug', 1, 2, 'success'),
                            report('cube', 1, 1, 'fail_steps'),
                            report('cube', 1, 0, 'success'),
                            report('cube', 2, 0, 'fail_escape')])
    assert len(table) == 4
    assert [r.scenario_id for r in table.reports] == sorted(
        r.scenario_id for r in table.reports)
    assert table.targets == ['cube', 'mug']
    assert table.levels == [1, 2]
    assert table.rate('cube', 1) == 0.5
    assert table.rate('mug', 2) is None
    assert table.level_rates() == {1: 2 / 3, 2: 0.0}
    assert table.overall == 0.5
    assert table.cells() == {('cube', 1): (1, 2), ('cube', 2): (0, 1),
                             ('mug', 1): (1, 1)}

    text = table.format()
    lines = text.splitlines()
    assert lines[0].split(' | ')[1:] == ['Level 1', 'Level 2', 'Average']
    assert 'Average' in lines[-1]
    assert ' 50%' in lines[-1]


def test_benchmark_table_csv():
    table = BenchmarkTable([report('cube', 1, 0, 'success')])
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert rows == [['target', 'level', 'scenario_seed', 'outcome', 'steps',
                     'replans'],
                    ['cube', '1', '0', 'success', '3', '0']]
    assert table.to_csv().endswith('0\n')
    assert json.loads(table.to_json())[0]['outcome'] == 'success'


def test_empty_benchmark_table():
    table = BenchmarkTable([])
    assert table.format() == 'No episodes'
    assert table.overall is None
    assert table.to_csv() == 'target,level,scenario_seed,outcome,steps,replans\n'


def test_run_benchmark():
    table = run_benchmark([BLOCKED, CLEAR])
    assert [r.scenario_id for r in table.reports] == sorted(
        [BLOCKED.scenario_id, CLEAR.scenario_id])
    assert table.overall == 1.0

    table = run_benchmark([BLOCKED, CLEAR], 'grasp-only', EpisodeLimits(4, 5))
    assert table.overall == 0.5


def test_run_benchmark_progress():
    out = io.StringIO()
    run_benchmark([CLEAR], progress=True, file=out)
    text = out.getvalue()
    assert '1/1 episodes' in text
    assert '1 succeeded' in text


def test_ablations():
    assert list(ABLATIONS) == ['full', 'grasp-only', 'no-replan']
    assert ABLATIONS['no-replan'] == ('scripted', 0)


def test_load_scenarios_directory(tmp_path):
    for i, s in enumerate([CLEAR, BLOCKED]):
        (tmp_path / scenario_filename('cube', 1, i)).write_bytes(serialize(s))
    (tmp_path / 'cube_level1_02.json').write_bytes(b'{"broken": ')
    (tmp_path / 'notes.txt').write_text('ignored')
    scenarios, skipped = load_scenarios(str(tmp_path),
                                        [str(tmp_path / 'missing.json')])
    assert scenarios == [CLEAR, BLOCKED]
    assert skipped == [str(tmp_path / 'cube_level1_02.json'),
                       str(tmp_path / 'missing.json')]


def test_load_scenarios_bundle(tmp_path):
    path = str(tmp_path / 'bench.zip')
    write_bundle(path, [('b.json', serialize(BLOCKED)), ('a.json', serialize(CLEAR))])
    scenarios, skipped = load_scenarios(path)
    assert scenarios == [CLEAR, BLOCKED]
    assert skipped == []

    with pytest.raises(ClutterGraspException):
        load_scenarios(str(tmp_path / 'nothing-here'))


@pytest.mark.slow
def test_run_benchmark_parallel():
    scenarios = [generate_scenario('cube', 2, s) for s in range(4)]
    serial = run_benchmark(scenarios)
    parallel = run_benchmark(scenarios, parallel=2)
    assert [r.to_dict() for r in parallel.reports] == \
        [r.to_dict() for r in serial.reports]


@pytest.mark.slow
def test_full_loop_beats_grasp_only():
    scenarios = [generate_scenario(t, 3, s) for t in ('cube', 'mug', 'can')
                 for s in range(3)]
    full = run_benchmark(scenarios, ABLATIONS['full'][0])
    grasp_only = run_benchmark(scenarios, ABLATIONS['grasp-only'][0])
    assert full.overall >= grasp_only.overall
    assert all(r.steps_used <= 40 and r.replans_used <= 5 for r in full.reports)


@pytest.mark.slow
def test_benchmark_matrix():
    from clutter_grasp.scenes import generate_benchmark
    scenarios = [c for _, c in generate_benchmark(42, targets=('ball', 'lego'),
                                                  count=2)]
    table = run_benchmark(scenarios)
    assert len(table) == 12
    assert set(table.cells()) == {(t, l) for t in ('ball', 'lego')
                                  for l in (1, 2, 3)}


@pytest.fixture(scope='module')
def benchmark():
    from clutter_grasp.scenes import generate_benchmark
    return [c for _, c in generate_benchmark(42)]


@pytest.mark.slow
def test_failing_planner_uses_every_step(benchmark):
    def adversary(ctx):
        return PlanAction('move_to', {'target': 'nowhere'})

    table = run_benchmark(benchmark, adversary)
    assert len(table) == 210
    for r in table.reports:
        assert r.outcome == 'fail_steps'
        assert r.steps_used == 40
        assert r.replans_used == 5
        assert r.flags == ()


@pytest.mark.slow
def test_ablation_trend(benchmark):
    full = run_benchmark(benchmark, ABLATIONS['full'][0])
    grasp_only = run_benchmark(benchmark, ABLATIONS['grasp-only'][0])
    no_replan = run_benchmark(benchmark, ABLATIONS['no-replan'][0],
                              EpisodeLimits(replan_limit=ABLATIONS['no-replan'][1]))
    full_rates = full.level_rates()
    grasp_rates = grasp_only.level_rates()
    for level in (2, 3):
        assert full_rates[level] - grasp_rates[level] >= 0.10
    assert grasp_rates[1] > grasp_rates[2] > grasp_rates[3]
    assert no_replan.overall <= full.overall
