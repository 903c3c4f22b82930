from __future__ import absolute_import, division

import csv
import io
import json
import logging
import os
from collections import OrderedDict, namedtuple
from concurrent.futures import ProcessPoolExecutor

from .core import ClutterGraspException, ValidationError, get_config
from .formats import infer_format, read_bundle
from .geometry import Pose
from .grasping import sample_domain_randomization
from .handrig import HandRig, HandState
from .planner import MAX_STEPS, PlanAction, PlannerContext, make_planner
from .progress import progressbar
from .render import render_scene
from .scenes import BENCHMARK_TARGETS, LEVELS, parse, scenario_to_scene
from .skills import SkillRequest, execute, scene_summary
from .world import escaped_objects


__all__ = ('EpisodeLimits', 'EpisodeReport', 'BenchmarkTable', 'ABLATIONS',
           'OUTCOMES', 'home_hand', 'load_scene', 'run_episode', 'run_benchmark',
           'load_scenarios')


logger = logging.getLogger(__name__)

OUTCOMES = ('success', 'fail_steps', 'fail_escape', 'fail_grasp')
MAX_REPLANS = 5
PLANNER_ERROR_FLAG = 'planner_error'

# Planner and replan limit of each benchmark configuration. ``None`` keeps
# the configured limit.
ABLATIONS = OrderedDict([('full', ('scripted', None)),
                         ('grasp-only', ('grasp-only', None)),
                         ('no-replan', ('scripted', 0))])

CSV_COLUMNS = ('target', 'level', 'scenario_seed', 'outcome', 'steps', 'replans')


class EpisodeLimits(namedtuple('EpisodeLimits', ('max_steps', 'replan_limit'))):
    """Step and replanning budgets of one episode.

    Parameters
    ----------
    max_steps : int, optional
        Planning steps, in ``[1, 40]``.
    replan_limit : int, optional
        Failures fed back to the planner, in ``[0, 5]``.
    """
    __slots__ = ()

    def __new__(cls, max_steps=MAX_STEPS, replan_limit=MAX_REPLANS):
        if isinstance(max_steps, bool) or not isinstance(max_steps, int) or \
                not 1 <= max_steps <= MAX_STEPS:
            raise ValidationError("max_steps must be an integer in [1, %d], got %r"
                                  % (MAX_STEPS, max_steps))
        if isinstance(replan_limit, bool) or not isinstance(replan_limit, int) or \
                not 0 <= replan_limit <= MAX_REPLANS:
            raise ValidationError("replan_limit must be an integer in [0, %d], "
                                  "got %r" % (MAX_REPLANS, replan_limit))
        return super(EpisodeLimits, cls).__new__(cls, max_steps, replan_limit)

    @classmethod
    def from_config(cls, config=None):
        cfg = get_config(config).executor
        return cls(cfg.max_steps, cfg.replan_limit)


class EpisodeReport(namedtuple('EpisodeReport',
                               ('scenario_id', 'target', 'level', 'seed',
                                'outcome', 'steps_used', 'replans_used',
                                'trace', 'flags'))):
    """The record of one closed-loop episode.

    Parameters
    ----------
    scenario_id : str
    target : str
    level : int
    seed : int
        Seed of the scenario.
    outcome : str
        One of ``OUTCOMES``.
    steps_used : int
        Executed planning steps, equal to ``len(trace)``.
    replans_used : int
        Failures fed back to the planner.
    trace : tuple of (PlanAction, SkillResult)
    flags : tuple of str
        Sorted markers such as ``'planner_fallback'`` or ``'planner_error'``.
    """
    __slots__ = ()

    @property
    def success(self):
        return self.outcome == 'success'

    def row(self):
        return (self.target, self.level, self.seed, self.outcome,
                self.steps_used, self.replans_used)

    def to_dict(self):
        return {'scenario_id': self.scenario_id, 'target': self.target,
                'level': self.level, 'seed': self.seed, 'outcome': self.outcome,
                'steps_used': self.steps_used, 'replans_used': self.replans_used,
                'flags': list(self.flags),
                'trace': [{'action': a.to_dict(), 'result': r.to_dict()}
                          for a, r in self.trace]}


def home_hand(config=None):
    """An open hand at the home pose."""
    config = get_config(config)
    return HandState.at(Pose(config.skills.home_position),
                        HandRig.from_config(config.hand))


def load_scene(scenario, config=None):
    """Settle a scenario into a scene with the hand at home."""
    config = get_config(config)
    return scenario_to_scene(scenario, hand=home_hand(config),
                             workspace_halfwidth=config.world.workspace_halfwidth,
                             tolerance=config.world.penetration_tolerance)


def _context(scene, scenario, step, feedback, history, config, render):
    summary = scene_summary(scene, config)
    image = render_scene(scene, config) if render else None
    return PlannerContext(scenario.target.name, summary['objects'],
                          summary['blocking'], feedback, step, image,
                          summary['tcp'], history)


def run_episode(scenario, planner, limits=None, config=None, render=False,
                randomize=False):
    """Run the closed planning and execution loop on one scenario.

    Every step the planner picks an action from the current scene and the
    feedback of the previous step, and the skill is executed. A failed skill
    uses one replan and is fed back to the planner; once the replan budget
    is spent, failures are no longer fed back. The episode ends on a
    successful grasp, on an object leaving the workspace, on a planner
    error, or when the step budget runs out.

    Parameters
    ----------
    scenario : ScenarioConfig
    planner : callable
        Maps a PlannerContext to a PlanAction. Planner objects are reset
        first and their flags are copied to the report.
    limits : EpisodeLimits, optional
        Defaults to the ``executor`` config section.
    config : AttrDict, optional
    render : bool, optional
        Attach an SVG rendering of the scene to every planner context.
    randomize : bool, optional
        Apply domain randomization to grasp episodes, seeded by the scenario
        seed and step.

    Returns
    -------
    report : EpisodeReport
    """
    config = get_config(config)
    limits = EpisodeLimits.from_config(config) if limits is None else limits
    if hasattr(planner, 'reset'):
        planner.reset()
    scene = load_scene(scenario, config)

    trace = []
    history = []
    flags = set()
    feedback = None
    replans = 0
    grasps = 0
    outcome = None

    for step in range(1, limits.max_steps + 1):
        try:
            ctx = _context(scene, scenario, step, feedback, history, config,
                           render)
            action = planner(ctx)
            if not isinstance(action, PlanAction):
                raise ValidationError("Planner returned %r, not a PlanAction"
                                      % (action,))
            request = SkillRequest(action.action, action.args, config)
        except Exception as e:
            logger.warning("Planner failed on %s at step %d: %s",
                           scenario.scenario_id, step, e)
            flags.add(PLANNER_ERROR_FLAG)
            outcome = 'fail_steps'
            break

        dr = None
        if randomize:
            dr = sample_domain_randomization((scenario.seed + step) % 2 ** 64)
        scene, result, grasp = execute(scene, request, config, dr=dr, seed=step)
        logger.debug("%s step %d: %s %r -> %s %s", scenario.scenario_id, step,
                     action.action, action.args, result.success, result.message)
        trace.append((action, result))
        if grasp is not None:
            grasps += 1

        if escaped_objects(scene):
            outcome = 'fail_escape'
            break
        if grasp is not None and grasp.success:
            outcome = 'success'
            break
        if result.success:
            feedback = result
        elif replans < limits.replan_limit:
            replans += 1
            feedback = result
        else:
            feedback = None
        history.append((action, feedback))
    else:
        outcome = 'fail_grasp' if grasps else 'fail_steps'

    flags.update(getattr(planner, 'flags', ()))
    return EpisodeReport(scenario.scenario_id, scenario.target.name,
                         scenario.level, scenario.seed, outcome, len(trace),
                         replans, tuple(trace), tuple(sorted(flags)))


def _resolve(planner, config):
    if isinstance(planner, str):
        return make_planner(planner, config)
    return planner


def _run_one(args):
    scenario, planner, limits, config, randomize = args
    return run_episode(scenario, _resolve(planner, config), limits, config,
                       randomize=randomize)


def run_benchmark(scenarios, planner='scripted', limits=None, config=None,
                  parallel=1, progress=False, file=None, randomize=False):
    """Run one episode per scenario and tabulate the outcomes.

    Parameters
    ----------
    scenarios : sequence of ScenarioConfig
    planner : str or callable, optional
        A planner name for :func:`make_planner`, or a planner. With
        ``parallel > 1`` it must be picklable.
    limits : EpisodeLimits, optional
    config : AttrDict, optional
    parallel : int, optional
        Number of worker processes. Episodes are independent.
    progress : bool, optional
        Draw a progress bar.
    file : file, optional
        Where to draw the progress bar.
    randomize : bool, optional
        Domain randomization of grasp episodes.

    Returns
    -------
    table : BenchmarkTable
    """
    config = get_config(config)
    limits = EpisodeLimits.from_config(config) if limits is None else limits
    scenarios = list(scenarios)
    reports = []
    with progressbar(scenarios, enabled=progress, file=file, label='episodes',
                     track_success=True) as bar:
        if parallel > 1 and len(scenarios) > 1:
            with ProcessPoolExecutor(parallel) as pool:
                results = pool.map(_run_one, [(s, planner, limits, config,
                                               randomize) for s in scenarios])
                for _ in bar:
                    reports.append(next(results))
                    if reports[-1].success:
                        bar.success()
        else:
            resolved = _resolve(planner, config)
            for s in bar:
                reports.append(run_episode(s, resolved, limits, config,
                                           randomize=randomize))
                if reports[-1].success:
                    bar.success()
    return BenchmarkTable(reports)


class BenchmarkTable(object):
    """Success rates per target and level.

    Parameters
    ----------
    reports : iterable of EpisodeReport
        Stored sorted by scenario id.
    """
    def __init__(self, reports):
        self.reports = sorted(reports, key=lambda r: r.scenario_id)

    def __repr__(self):
        return 'BenchmarkTable<%d episodes>' % len(self.reports)

    def __len__(self):
        return len(self.reports)

    @property
    def targets(self):
        present = set(r.target for r in self.reports)
        known = [t for t in BENCHMARK_TARGETS if t in present]
        return known + sorted(present.difference(known))

    @property
    def levels(self):
        return sorted(set(r.level for r in self.reports))

    def cells(self):
        """``{(target, level): (successes, episodes)}`` for every populated cell."""
        out = OrderedDict()
        for t in self.targets:
            for l in self.levels:
                rs = [r for r in self.reports if r.target == t and r.level == l]
                if rs:
                    out[t, l] = (sum(r.success for r in rs), len(rs))
        return out

    @staticmethod
    def _rate(reports):
        reports = list(reports)
        if not reports:
            return None
        return sum(r.success for r in reports) / len(reports)

    def rate(self, target=None, level=None):
        """Success rate over the matching episodes, or None if there are none."""
        return self._rate(r for r in self.reports
                          if (target is None or r.target == target) and
                          (level is None or r.level == level))

    def level_rates(self):
        return OrderedDict((l, self.rate(level=l)) for l in self.levels)

    @property
    def overall(self):
        return self.rate()

    def to_csv(self):
        """One row per episode, in scenario id order."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        for r in self.reports:
            writer.writerow(r.row())
        return buf.getvalue()

    def to_json(self):
        return json.dumps([r.to_dict() for r in self.reports], indent=2,
                          sort_keys=True)

    def format(self):
        """A target by level grid of success percentages."""
        if not self.reports:
            return 'No episodes'
        levels = self.levels or list(LEVELS)

        def pct(rate):
            return '   -' if rate is None else '%3.0f%%' % (100 * rate)

        width = max(8, max(len(t) for t in self.targets))
        header = ['%-*s' % (width, 'Target')]
        header += ['Level %d' % l for l in levels] + ['Average']
        lines = [' | '.join(header)]
        lines.append('-' * len(lines[0]))
        for t in self.targets:
            cells = [pct(self.rate(t, l)).rjust(7) for l in levels]
            lines.append(' | '.join(['%-*s' % (width, t)] + cells +
                                    [pct(self.rate(t)).rjust(7)]))
        lines.append('-' * len(lines[0]))
        cells = [pct(self.rate(level=l)).rjust(7) for l in levels]
        lines.append(' | '.join(['%-*s' % (width, 'Average')] + cells +
                                [pct(self.overall).rjust(7)]))
        return '\n'.join(lines)


def load_scenarios(source=None, files=()):
    """Read scenarios from a directory, a bundle, and individual files.

    Unreadable or invalid scenarios are skipped with a warning.

    Parameters
    ----------
    source : str, optional
        A directory of ``*.json`` files or a scenario bundle archive.
    files : sequence of str, optional
        Additional scenario files.

    Returns
    -------
    scenarios : list of ScenarioConfig
    skipped : list of str
        Names of the missing or invalid scenarios.
    """
    members = []
    if source is not None:
        if os.path.isdir(source):
            for name in sorted(os.listdir(source)):
                if name.endswith('.json'):
                    members.append(os.path.join(source, name))
        elif infer_format(source) is not None or os.path.isfile(source):
            members.extend(read_bundle(source))
        else:
            raise ClutterGraspException("Scenario source %r does not exist"
                                        % source)
    members.extend(files)

    scenarios, skipped = [], []
    for member in members:
        if isinstance(member, tuple):
            name, data = member
        else:
            name = member
            try:
                with open(member, 'rb') as f:
                    data = f.read()
            except (IOError, OSError) as e:
                logger.warning("Skipping missing scenario %s: %s", name, e)
                skipped.append(name)
                continue
        try:
            scenarios.append(parse(data))
        except ClutterGraspException as e:
            logger.warning("Skipping invalid scenario %s: %s", name, e)
            skipped.append(name)
    return scenarios, skipped
