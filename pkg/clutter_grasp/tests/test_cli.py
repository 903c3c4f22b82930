from __future__ import absolute_import, print_function, division

import csv
import json
import os

import pytest

import clutter_grasp
from clutter_grasp.__main__ import main
from clutter_grasp.formats import read_bundle
from clutter_grasp.scenes import ScenarioConfig, read_scenario, serialize

from .conftest import FakeClient

CLEAR = ScenarioConfig('1.0', 7, 1, ('cube', 0.0, 0.0, 0.0),
                       [('can', -0.1, 0.1, 0.0), ('foam_brick', 0.1, 0.1, 0.3)])
BLOCKED = ScenarioConfig('1.0', 8, 1, ('cube', 0.0, 0.0, 0.0),
                         [('can', 0.07, 0.0, 0.0), ('foam_brick', -0.1, 0.1, 0.0)])


@pytest.fixture
def scenario_dir(tmpdir):
    path = str(tmpdir.mkdir('scenarios'))
    for name, scenario in [('cube_level1_00.json', CLEAR),
                           ('cube_level1_01.json', BLOCKED)]:
        with open(os.path.join(path, name), 'wb') as f:
            f.write(serialize(scenario))
    return path


def run(args, **kwargs):
    with pytest.raises(SystemExit) as exc:
        main(args, **kwargs)
    return exc.value.code


def test_help(capsys):
    assert run(["-h"]) == 0
    out, err = capsys.readouterr()
    assert not err
    assert 'usage: clutter-grasp' in out


def test_version(capsys):
    assert run(["--version"]) == 0
    out, err = capsys.readouterr()
    assert not err
    assert out == 'clutter-grasp %s\n' % clutter_grasp.__version__


def test_command_required(capsys):
    assert run([]) == 1
    out, err = capsys.readouterr()
    assert not out
    assert 'a command is required' in err


def test_gen_directory(capsys, tmpdir):
    out_dir = os.path.join(str(tmpdir), 'out')
    assert run(["-q", "gen", "-o", out_dir, "--seed", "42", "--target", "cube",
                "--level", "1", "--count", "2"]) == 0
    assert sorted(os.listdir(out_dir)) == ['cube_level1_00.json',
                                           'cube_level1_01.json']
    scenario = read_scenario(os.path.join(out_dir, 'cube_level1_00.json'))
    assert scenario.target.name == 'cube'
    assert len(scenario.obstacles) == 2
    out, err = capsys.readouterr()
    assert out == 'Wrote 2 scenarios to %s\n' % out_dir


def test_gen_bundle_is_reproducible(capsys, tmpdir):
    paths = [os.path.join(str(tmpdir), name) for name in ('a.tar.gz', 'b.tar.gz')]
    for path in paths:
        assert run(["-q", "gen", "-o", path, "--target", "mug", "--target",
                    "ball", "--level", "2", "--count", "1"]) == 0
    names = [name for name, _ in read_bundle(paths[0])]
    assert names == ['ball_level2_00.json', 'mug_level2_00.json']
    with open(paths[0], 'rb') as a, open(paths[1], 'rb') as b:
        assert a.read() == b.read()


def test_gen_progress(capsys, tmpdir):
    assert run(["gen", "-o", str(tmpdir), "--target", "lego", "--level", "3",
                "--count", "1"]) == 0
    out, err = capsys.readouterr()
    assert '1/1 scenarios' in out


def test_run(capsys, scenario_dir, tmpdir):
    trace = os.path.join(str(tmpdir), 'trace.json')
    path = os.path.join(scenario_dir, 'cube_level1_01.json')
    assert run(["-q", "run", "-s", path, "--trace-out", trace]) == 0
    out, err = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0].startswith(' 1. move_to')
    assert lines[1].startswith(' 2. push')
    assert lines[-1] == ('%s: success after 4 steps, 0 replans'
                         % BLOCKED.scenario_id)
    with open(trace) as f:
        report = json.load(f)
    assert report['outcome'] == 'success'
    assert len(report['trace']) == 4


def test_run_with_language_model(capsys, monkeypatch, scenario_dir):
    monkeypatch.setenv('CLUTTER_GRASP_LLM_MODEL', 'local-model')
    client = FakeClient(['{"action": "move_to", "args": {"target": "target"}}',
                         'Grasping now: {"action": "grasp", "reason": "clear"}'])
    path = os.path.join(scenario_dir, 'cube_level1_00.json')
    assert run(["-q", "run", "-s", path, "--planner", "llm"], client=client) == 0
    out, err = capsys.readouterr()
    assert out.splitlines()[-1] == ('%s: success after 2 steps, 0 replans'
                                    % CLEAR.scenario_id)
    assert [c['model'] for c in client.calls] == ['local-model'] * 2


def test_run_falls_back_without_model_reply(capsys, monkeypatch, scenario_dir):
    monkeypatch.setenv('CLUTTER_GRASP_LLM_MODEL', 'local-model')
    path = os.path.join(scenario_dir, 'cube_level1_00.json')
    assert run(["-q", "run", "-s", path, "--planner", "llm"],
               client=FakeClient([])) == 0
    out, err = capsys.readouterr()
    assert out.splitlines()[-1].endswith('[planner_fallback]')


def test_bench(capsys, scenario_dir, tmpdir):
    csv_path = os.path.join(str(tmpdir), 'results.csv')
    json_path = os.path.join(str(tmpdir), 'results.json')
    assert run(["-q", "bench", "-d", scenario_dir, "-o", csv_path,
                "--json", json_path]) == 0
    out, err = capsys.readouterr()
    assert 'Level 1' in out
    assert out.splitlines()[-1].split()[-1] == '100%'
    with open(csv_path) as f:
        rows = list(csv.DictReader(f))
    assert [r['outcome'] for r in rows] == ['success', 'success']
    assert [r['scenario_seed'] for r in rows] == ['7', '8']
    with open(json_path) as f:
        assert len(json.load(f)) == 2


def test_bench_ablation(capsys, scenario_dir, tmpdir):
    csv_path = os.path.join(str(tmpdir), 'results.csv')
    assert run(["-q", "bench", "-d", scenario_dir, "--ablation", "grasp-only",
                "--max-steps", "4", "-o", csv_path]) == 0
    with open(csv_path) as f:
        rows = list(csv.DictReader(f))
    assert [(r['outcome'], r['steps']) for r in rows] == [('success', '2'),
                                                          ('fail_steps', '4')]
    out, err = capsys.readouterr()
    assert out.splitlines()[-1].split()[-1] == '50%'


def test_bench_skips_invalid(capsys, scenario_dir, tmpdir):
    broken = os.path.join(str(tmpdir), 'broken.json')
    with open(broken, 'w') as f:
        f.write('{"seed": ')
    assert run(["-q", "bench", "-d", scenario_dir, "-s", broken]) == 0
    out, err = capsys.readouterr()
    assert 'Skipped 1 scenarios: %s' % broken in err


def test_render(scenario_dir, tmpdir):
    out_path = os.path.join(str(tmpdir), 'scene.svg')
    assert run(["render", "-s", os.path.join(scenario_dir, 'cube_level1_00.json'),
                "-o", out_path]) == 0
    with open(out_path, 'rb') as f:
        data = f.read()
    assert data.startswith(b'<?xml')
    assert b'footprint-target' in data


def test_cli_exceptions(capsys, scenario_dir, tmpdir):
    assert run(["bench"]) == 1
    out, err = capsys.readouterr()
    assert "ClutterGraspError: Nothing to run" in err

    assert run(["run", "-s", os.path.join(str(tmpdir), 'missing.json')]) == 1
    out, err = capsys.readouterr()
    assert "ClutterGraspError:" in err

    assert run(["-q", "bench", "-d", scenario_dir, "--max-steps", "41"]) == 1
    out, err = capsys.readouterr()
    assert "ClutterGraspError: max_steps" in err

    assert run(["-q", "bench", "-d", os.path.join(str(tmpdir), 'nowhere')]) == 1
    out, err = capsys.readouterr()
    assert "does not exist" in err

    assert run(["-foo", "-bar"]) != 0
    out, err = capsys.readouterr()
    assert not out
    assert "usage: clutter-grasp" in err
