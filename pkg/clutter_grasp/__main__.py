from __future__ import print_function, absolute_import

import argparse
import json
import logging
import os
import sys
import traceback

from . import __version__
from .core import ClutterGraspException, load_config
from .executor import (ABLATIONS, EpisodeLimits, load_scene, load_scenarios,
                       run_benchmark, run_episode)
from .formats import FORMATS, infer_format, write_bundle
from .planner import PLANNERS, make_planner
from .progress import progressbar
from .render import render_scene
from .scenes import (BENCHMARK_TARGETS, LEVELS, SCENARIOS_PER_CELL,
                     benchmark_plan, generate_scenario, read_scenario,
                     scenario_filename, serialize)
from .toolserver import serve


def _add_common(parser):
    parser.add_argument("--help", "-h", action='help',
                        help="Show this help message then exit")


def _add_limits(parser):
    parser.add_argument("--max-steps",
                        type=int,
                        help="Planning step budget, at most 40. Default from "
                             "the configuration (40).")
    parser.add_argument("--replan-limit",
                        type=int,
                        help="Failures fed back to the planner, at most 5. "
                             "Default from the configuration (5).")


def build_parser():
    description = ("Generate cluttered grasping scenarios and run the closed "
                   "planning and execution loop on them.")
    kwargs = dict(prog="clutter-grasp",
                  description=description,
                  add_help=False,
                  allow_abbrev=False)
    parser = argparse.ArgumentParser(**kwargs)
    parser.add_argument("--config", "-c",
                        metavar="PATH",
                        help=("YAML file overriding the default configuration. "
                              "Defaults to ``$CLUTTER_GRASP_CONFIG`` if set."))
    parser.add_argument("--quiet", "-q",
                        action="store_true",
                        help="Do not report progress")
    _add_common(parser)
    parser.add_argument("--version",
                        action='store_true',
                        help="Show version then exit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    gen = sub.add_parser("gen", add_help=False,
                         help="Generate the scenario matrix.")
    gen.add_argument("--out", "-o",
                     metavar="PATH",
                     required=True,
                     help=("Output directory, or a bundle file ending in one of "
                           "%s." % ', '.join('``.%s``' % f for f in FORMATS)))
    gen.add_argument("--seed",
                     type=int,
                     default=0,
                     help="Master seed of the matrix. Default is 0.")
    gen.add_argument("--target",
                     dest="targets",
                     action="append",
                     choices=BENCHMARK_TARGETS,
                     help="Only generate this target. May be repeated.")
    gen.add_argument("--level",
                     dest="levels",
                     action="append",
                     type=int,
                     choices=LEVELS,
                     help="Only generate this level. May be repeated.")
    gen.add_argument("--count",
                     type=int,
                     default=SCENARIOS_PER_CELL,
                     help="Scenarios per target and level. Default is 10.")
    gen.add_argument("--compress-level",
                     type=int,
                     default=4,
                     help="Compression level of bundles, from 0 to 9.")
    _add_common(gen)

    run = sub.add_parser("run", add_help=False,
                         help="Run one closed-loop episode.")
    run.add_argument("--scenario", "-s",
                     metavar="PATH",
                     required=True,
                     help="Scenario file.")
    run.add_argument("--planner",
                     choices=PLANNERS,
                     default="scripted",
                     help="Planner to use. Default is scripted.")
    _add_limits(run)
    run.add_argument("--trace-out",
                     metavar="PATH",
                     help="Write the episode report with its trace as JSON.")
    run.add_argument("--render",
                     action="store_true",
                     help="Attach a scene rendering to language-model prompts.")
    run.add_argument("--randomize",
                     action="store_true",
                     help="Apply domain randomization to grasp episodes.")
    _add_common(run)

    bench = sub.add_parser("bench", add_help=False,
                           help="Run the benchmark and tabulate success rates.")
    bench.add_argument("--dir", "-d",
                       metavar="PATH",
                       help="Scenario directory or bundle.")
    bench.add_argument("--scenario", "-s",
                       metavar="PATH",
                       dest="scenarios",
                       action="append",
                       default=[],
                       help="Additional scenario file. May be repeated.")
    bench.add_argument("--planner",
                       choices=PLANNERS,
                       help="Planner to use. Default is set by ``--ablation``.")
    bench.add_argument("--ablation",
                       choices=list(ABLATIONS),
                       default="full",
                       help=("Benchmark configuration: the full loop, grasping "
                             "without clearing, or no replanning feedback. "
                             "Default is full."))
    _add_limits(bench)
    bench.add_argument("--out", "-o",
                       metavar="PATH",
                       help="Write per-episode results as CSV.")
    bench.add_argument("--json",
                       metavar="PATH",
                       help="Write every episode report as JSON.")
    bench.add_argument("--parallel", "-j",
                       type=int,
                       default=1,
                       help="Worker processes. Default is 1.")
    bench.add_argument("--randomize",
                       action="store_true",
                       help="Apply domain randomization to grasp episodes.")
    _add_common(bench)

    render = sub.add_parser("render", add_help=False,
                            help="Draw a scenario as SVG.")
    render.add_argument("--scenario", "-s",
                        metavar="PATH",
                        required=True,
                        help="Scenario file.")
    render.add_argument("--out", "-o",
                        metavar="PATH",
                        required=True,
                        help="Output SVG file.")
    _add_common(render)

    srv = sub.add_parser("serve", add_help=False,
                         help="Serve the skill library as tools.")
    srv.add_argument("--transport",
                     choices=["stdio", "tcp"],
                     default="stdio",
                     help="Transport. Default is stdio.")
    srv.add_argument("--host",
                     default="127.0.0.1",
                     help="TCP address to bind. Default is 127.0.0.1.")
    srv.add_argument("--port", "-p",
                     type=int,
                     default=8765,
                     help="TCP port. Default is 8765.")
    srv.add_argument("--scenario", "-s",
                     metavar="PATH",
                     required=True,
                     help="Scenario every session starts from.")
    srv.add_argument("--snapshot",
                     metavar="PATH",
                     help=("Write the final scene of each session here. TCP "
                           "sessions insert their number before the extension."))
    _add_common(srv)
    return parser


# Parser at top level to allow sphinxcontrib.autoprogram to work
PARSER = build_parser()


def fail(msg):
    print(msg, file=sys.stderr)
    sys.exit(1)


def _limits(args, config, replan_limit=None):
    cfg = config.executor
    if replan_limit is None:
        replan_limit = (args.replan_limit if args.replan_limit is not None
                        else cfg.replan_limit)
    return EpisodeLimits(args.max_steps if args.max_steps is not None
                         else cfg.max_steps, replan_limit)


def _write(path, data):
    mode = 'wb' if isinstance(data, bytes) else 'w'
    with open(path, mode) as f:
        f.write(data)


def cmd_gen(args, config, client=None):
    targets = args.targets or list(BENCHMARK_TARGETS)
    levels = args.levels or list(LEVELS)
    plan = benchmark_plan(args.seed, targets, levels, args.count)
    members = []
    with progressbar(plan, enabled=not args.quiet, label='scenarios') as bar:
        for target, level, index, seed in bar:
            scenario = generate_scenario(target, level, seed)
            members.append((scenario_filename(target, level, index),
                            serialize(scenario)))
    if infer_format(args.out) is not None:
        write_bundle(args.out, members, compress_level=args.compress_level)
    else:
        if not os.path.isdir(args.out):
            os.makedirs(args.out)
        for name, data in members:
            _write(os.path.join(args.out, name), data)
    print("Wrote %d scenarios to %s" % (len(members), args.out))


def cmd_run(args, config, client=None):
    scenario = read_scenario(args.scenario)
    planner = make_planner(args.planner, config, client=client,
                           use_render=args.render)
    report = run_episode(scenario, planner, _limits(args, config), config,
                         render=args.render, randomize=args.randomize)
    for step, (action, result) in enumerate(report.trace, 1):
        print("%2d. %-28s %s" % (step, '%s %s' % (action.action,
                                                  json.dumps(action.args,
                                                             sort_keys=True)),
                                 'ok' if result.success else result.message))
    print("%s: %s after %d steps, %d replans%s"
          % (report.scenario_id, report.outcome, report.steps_used,
             report.replans_used,
             ' [%s]' % ', '.join(report.flags) if report.flags else ''))
    if args.trace_out:
        _write(args.trace_out, json.dumps(report.to_dict(), indent=2,
                                          sort_keys=True) + '\n')


def cmd_bench(args, config, client=None):
    if args.dir is None and not args.scenarios:
        raise ClutterGraspException("Nothing to run, pass --dir or --scenario")
    scenarios, skipped = load_scenarios(args.dir, args.scenarios)
    if skipped:
        print("Skipped %d scenarios: %s" % (len(skipped), ', '.join(skipped)),
              file=sys.stderr)
    kind, replan_limit = ABLATIONS[args.ablation]
    kind = args.planner or kind
    planner = kind if client is None else make_planner(kind, config, client=client)
    parallel = args.parallel if client is None else 1
    table = run_benchmark(scenarios, planner, _limits(args, config, replan_limit),
                          config, parallel=parallel, progress=not args.quiet,
                          randomize=args.randomize)
    print(table.format())
    if args.out:
        _write(args.out, table.to_csv())
    if args.json:
        _write(args.json, table.to_json() + '\n')


def cmd_render(args, config, client=None):
    scenario = read_scenario(args.scenario)
    _write(args.out, render_scene(scenario, config))


def cmd_serve(args, config, client=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    scenario = read_scenario(args.scenario)
    scene = load_scene(scenario, config)
    serve(lambda: scene, transport=args.transport, host=args.host,
          port=args.port, snapshot=args.snapshot, config=config)


COMMANDS = {'gen': cmd_gen, 'run': cmd_run, 'bench': cmd_bench,
            'render': cmd_render, 'serve': cmd_serve}


def main(args=None, client=None):
    args = PARSER.parse_args(args=args)

    # Manually handle version printing to output to stdout
    if args.version:
        print('clutter-grasp %s' % __version__)
        sys.exit(0)
    if args.command is None:
        fail(PARSER.format_usage().rstrip() +
             "\nclutter-grasp: error: a command is required")

    try:
        config = load_config(args.config)
        COMMANDS[args.command](args, config, client=client)
    except ClutterGraspException as e:
        fail("ClutterGraspError: %s" % e)
    except KeyboardInterrupt:  # pragma: nocover
        fail("Interrupted")
    except Exception:  # pragma: nocover
        fail(traceback.format_exc())
    sys.exit(0)


if __name__ == '__main__':  # pragma: nocover
    main()
