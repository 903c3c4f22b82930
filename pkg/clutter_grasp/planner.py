from __future__ import absolute_import, division

import base64
import json
import logging
import math
import os
import threading
import time
from collections import namedtuple

import openai

from .core import ClutterGraspException, ParseError, ValidationError, get_config
from .skills import (COLLISION, SIDES, SkillResult, tool_manifest,
                     validate_arguments)


__all__ = ('PlanAction', 'PlannerContext', 'PromptDocument', 'build_prompt',
           'parse_plan_action', 'scripted_plan', 'llm_plan', 'Planner',
           'ScriptedPlanner', 'GraspOnlyPlanner', 'LLMPlanner', 'make_planner',
           'PLANNERS', 'MAX_STEPS')


logger = logging.getLogger(__name__)

MAX_STEPS = 40
HOVER_HEIGHT = 0.15
HOVER_TOLERANCE = 0.01
LATERAL_DEADBAND = 0.01

URL_ENV_VAR = 'CLUTTER_GRASP_LLM_URL'
MODEL_ENV_VAR = 'CLUTTER_GRASP_LLM_MODEL'
KEY_ENV_VAR = 'CLUTTER_GRASP_LLM_KEY'

FALLBACK_FLAG = 'planner_fallback'

SYSTEM_ROLE = ("You are a careful and disciplined robot manipulation planner. "
               "Your goal is to clear obstacles and grasp the target object.")
OBJECTIVE = ("Clear clutter around the target object to enable a successful "
             "grasp.")
OUTPUT_FORMAT = ('Return a strictly valid JSON object:\n'
                 '{"action": "...", "args": {...}, "reason": "..."}')
INSTRUCTION = ("Analyze the observation and feedback. If the previous action "
               "failed, propose an alternative strategy. Output the next action "
               "in JSON.")
RETRY_SUFFIX = ("Your previous reply could not be used: %s. Reply with exactly "
                "one strictly valid JSON object naming one of the available "
                "tools.")


class PlanAction(namedtuple('PlanAction', ('action', 'args', 'reason'))):
    """One planner decision.

    Parameters
    ----------
    action : str
        A registered skill name.
    args : dict, optional
        Skill arguments, valid for the skill's input schema.
    reason : str, optional
        Free-text justification.
    """
    __slots__ = ()

    def __new__(cls, action, args=None, reason='', config=None):
        args = {} if args is None else args
        if not isinstance(action, str):
            raise ValidationError("Plan action must be a string, got %r"
                                  % (action,))
        if not isinstance(reason, str):
            raise ValidationError("Plan reason must be a string")
        validate_arguments(action, args, config)
        return super(PlanAction, cls).__new__(cls, action, dict(args), reason)

    def to_dict(self):
        return {'action': self.action, 'args': dict(self.args),
                'reason': self.reason}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


class PlannerContext(namedtuple('PlannerContext',
                                ('target_name', 'objects', 'blocking',
                                 'last_feedback', 'step', 'render', 'tcp',
                                 'history'))):
    """Everything a planner sees before choosing the next action.

    Parameters
    ----------
    target_name : str
        Roster name of the target object.
    objects : list of dict
        Object summaries with ``id``, ``name``, ``x``, ``y``, ``z`` and
        ``theta``.
    blocking : list of str
        Ids of obstacles in the target's approach corridor, nearest first.
    last_feedback : SkillResult or None
        Result of the previous step, or ``None`` on the first step or once
        the replanning budget is spent.
    step : int
        Index of the step being planned, in ``[1, 40]``.
    render : bytes, optional
        SVG rendering of the scene.
    tcp : dict, optional
        ``x``, ``y``, ``z`` and ``yaw`` of the TCP.
    history : tuple, optional
        ``(PlanAction, SkillResult or None)`` for every earlier step.
    """
    __slots__ = ()

    def __new__(cls, target_name, objects, blocking=(), last_feedback=None,
                step=1, render=None, tcp=None, history=()):
        if not (isinstance(step, int) and 0 <= step <= MAX_STEPS):
            raise ValidationError("Step index must be in [0, %d], got %r"
                                  % (MAX_STEPS, step))
        if last_feedback is not None and not isinstance(last_feedback, SkillResult):
            raise ValidationError("last_feedback must be a SkillResult")
        return super(PlannerContext, cls).__new__(cls, target_name, list(objects),
                                                  list(blocking), last_feedback,
                                                  step, render, tcp, tuple(history))

    def object(self, id):
        return next((o for o in self.objects if o['id'] == id), None)

    @property
    def target(self):
        return next(o for o in self.objects if o.get('is_target'))


class PromptDocument(namedtuple('PromptDocument', ('system', 'task', 'dynamic',
                                                   'image'))):
    """The three prompt sections, plus an optional scene image."""
    __slots__ = ()

    def text(self):
        rule = '\n' + '-' * 40 + '\n'
        return rule.join([self.system, self.task, self.dynamic])

    def messages(self):
        """Chat-completion messages: the system section, then one user turn."""
        body = self.task + '\n\n' + self.dynamic
        if self.image is None:
            content = body
        else:
            content = [{'type': 'text', 'text': body},
                       {'type': 'image_url', 'image_url': {'url': self.image}}]
        return [{'role': 'system', 'content': self.system},
                {'role': 'user', 'content': content}]


def _tool_line(tool):
    props = tool['inputSchema']['properties']
    return '- %s(%s): %s' % (tool['name'], ', '.join(props), tool['description'])


def _object_line(o):
    return ('- %s (%s): x=%.3f, y=%.3f, z=%.3f, theta=%.3f'
            % (o['id'], o['name'], o['x'], o['y'], o['z'], o['theta']))


def build_prompt(ctx, config=None):
    """Assemble the planner prompt for one step.

    Parameters
    ----------
    ctx : PlannerContext
    config : AttrDict, optional
        Used for the tool descriptions.

    Returns
    -------
    prompt : PromptDocument
    """
    tools = '\n'.join(_tool_line(t) for t in tool_manifest(config))
    system = '\n'.join([SYSTEM_ROLE, 'Available Tools:', tools,
                        'Output Format: ' + OUTPUT_FORMAT])

    names = ', '.join(o['id'] for o in ctx.objects)
    task = '\n'.join(['Objective: ' + OBJECTIVE,
                      'Scene Context: The target object is a %s.' % ctx.target_name,
                      'Available Objects: [%s]' % names])

    lines = ['Step %d' % ctx.step, 'Observation:']
    lines.extend(_object_line(o) for o in ctx.objects)
    lines.append('Blocking the approach: %s'
                 % (', '.join(ctx.blocking) if ctx.blocking else 'none'))
    if ctx.tcp is not None:
        lines.append('Gripper: x=%.3f, y=%.3f, z=%.3f, yaw=%.3f'
                     % (ctx.tcp['x'], ctx.tcp['y'], ctx.tcp['z'], ctx.tcp['yaw']))
    image = None
    if ctx.render is not None:
        image = ('data:image/svg+xml;base64,' +
                 base64.b64encode(ctx.render).decode('ascii'))
        lines.append('Visual Observation: attached top-down rendering')
    if ctx.last_feedback is not None:
        lines.append('Execution Feedback (from Step %d):' % (ctx.step - 1))
        if ctx.history:
            lines.append('Previous Action: ' + ctx.history[-1][0].to_json())
        lines.append(json.dumps(ctx.last_feedback.to_dict(), sort_keys=True))
    lines.append('Instruction: ' + INSTRUCTION)
    return PromptDocument(system, task, '\n'.join(lines), image)


def parse_plan_action(text, config=None):
    """Extract and validate the first JSON object in a planner reply.

    Parameters
    ----------
    text : str
        The raw reply, possibly with prose around the JSON object.
    config : AttrDict, optional

    Returns
    -------
    action : PlanAction

    Raises
    ------
    ParseError
        If the text holds no JSON object.
    ValidationError
        If the object names an unknown action or carries invalid arguments.
    """
    if not isinstance(text, str):
        raise ParseError("Planner reply must be text")
    decoder = json.JSONDecoder()
    start = text.find('{')
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
            break
        except ValueError:
            start = text.find('{', start + 1)
    else:
        raise ParseError("No JSON object found in planner reply")
    args = obj.get('args')
    return PlanAction(obj.get('action'), {} if args is None else args,
                      obj.get('reason', ''), config=config)


def _hovering(ctx, hover_height, tolerance):
    if ctx.tcp is None:
        return False
    target = ctx.target
    return (math.hypot(ctx.tcp['x'] - target['x'], ctx.tcp['y'] - target['y'])
            <= tolerance and
            abs(ctx.tcp['z'] - target['z'] - hover_height) <= tolerance)


def _lateral_side(obstacle, target):
    # The robot faces +y, so its left is -x
    offset = obstacle['x'] - target['x']
    if offset < -LATERAL_DEADBAND:
        return 'left'
    if offset > LATERAL_DEADBAND:
        return 'right'
    return 'center'


def _next_side(side):
    return SIDES[(SIDES.index(side) + 1) % len(SIDES)]


def scripted_plan(ctx, hover_height=HOVER_HEIGHT, tolerance=HOVER_TOLERANCE):
    """The deterministic reference planner.

    Hover over the target, then clear the nearest blocker: push it from the
    side it sits on, pull it if the push on it got stuck, reset the arm if
    the pull failed too and then push from the next side. A push that ran
    into the target is retried from the next side straight away. Grasp once
    the approach corridor is clear.

    Only failures delivered as feedback change the strategy; a failure
    whose feedback was withheld is retried as is.

    Parameters
    ----------
    ctx : PlannerContext
    hover_height, tolerance : float, optional
        Hover pose of ``move_to`` and the tolerance for recognising it.

    Returns
    -------
    action : PlanAction
    """
    if not _hovering(ctx, hover_height, tolerance):
        return PlanAction('move_to', {'target': 'target'},
                          'position the gripper above the target')
    if not ctx.blocking:
        return PlanAction('grasp', {}, 'the approach to the target is clear')

    blocker = ctx.blocking[0]
    attempts = [(i, a, f) for i, (a, f) in enumerate(ctx.history)
                if a.action in ('push', 'pull') and f is not None and
                f.observation.get('selected') == blocker]
    side = _lateral_side(ctx.object(blocker), ctx.target)
    if not attempts or attempts[-1][2].success:
        return PlanAction('push', {'side': side},
                          'clear %s from the approach corridor' % blocker)
    index, last, result = attempts[-1]
    if last.action == 'push' and result.message == COLLISION:
        turned = _next_side(last.args.get('side', side))
        return PlanAction('push', {'side': turned},
                          'pushing %s ran into the target, push from the %s side'
                          % (blocker, turned))
    if last.action == 'push':
        return PlanAction('pull', {'side': last.args.get('side', side)},
                          'pushing %s failed, pull it toward the base instead'
                          % blocker)
    reset = any(a.action == 'initarm' for a, _ in ctx.history[index + 1:])
    if not reset:
        return PlanAction('initarm', {}, 'pushing and pulling %s failed, reset '
                          'the arm before retrying' % blocker)
    previous = [a.args.get('side', 'center') for _, a, _ in attempts
                if a.action == 'push']
    last_side = previous[-1] if previous else side
    rotated = _next_side(last_side)
    return PlanAction('push', {'side': rotated},
                      'retry %s from the %s side' % (blocker, rotated))


class _RateLimiter(object):
    """Spaces service requests by a minimum interval across threads."""
    def __init__(self):
        self._lock = threading.Lock()
        self._last = None

    def wait(self, interval):
        if not interval or interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            if self._last is not None:
                delay = self._last + interval - now
                if delay > 0:
                    time.sleep(delay)
                    now = time.monotonic()
            self._last = now


RATE_LIMITER = _RateLimiter()


def llm_plan(ctx, client, model, config=None, max_tokens=512, temperature=0.0,
             min_interval=0.0, fallback=scripted_plan):
    """Ask a chat-completion service for the next action.

    The reply is parsed with :func:`parse_plan_action`. An unusable reply is
    retried once with the parse error appended to the conversation. A second
    unusable reply, or any transport failure or timeout, falls back to
    ``fallback``.

    Parameters
    ----------
    ctx : PlannerContext
    client : openai.OpenAI
        Or any object with the same ``chat.completions.create`` method.
    model : str
    config : AttrDict, optional
    max_tokens : int, optional
    temperature : float, optional
    min_interval : float, optional
        Minimum seconds between requests of this process.
    fallback : callable, optional
        Planner used when the service gives no usable action.

    Returns
    -------
    action : PlanAction
    flags : set of str
        Contains ``'planner_fallback'`` if the fallback was used.
    """
    prompt = build_prompt(ctx, config)
    messages = prompt.messages()
    for attempt in range(2):
        RATE_LIMITER.wait(min_interval)
        try:
            response = client.chat.completions.create(model=model,
                                                      messages=messages,
                                                      max_tokens=max_tokens,
                                                      temperature=temperature)
            reply = response.choices[0].message.content or ''
        except (openai.OpenAIError, OSError) as e:
            logger.warning("Planner service failed at step %d: %s", ctx.step, e)
            break
        except (IndexError, AttributeError, TypeError) as e:
            logger.warning("Malformed planner response at step %d: %r", ctx.step, e)
            break
        try:
            return parse_plan_action(reply, config), set()
        except (ParseError, ValidationError) as e:
            logger.warning("Unusable planner reply at step %d (attempt %d): %s",
                           ctx.step, attempt + 1, e)
            messages = messages + [{'role': 'assistant', 'content': reply},
                                   {'role': 'user', 'content': RETRY_SUFFIX % e}]
    logger.warning("Falling back to the scripted planner at step %d", ctx.step)
    return fallback(ctx), {FALLBACK_FLAG}


class Planner(object):
    """Base class of the planners used by the episode executor.

    Subclasses implement :meth:`plan`. Flags raised while planning are
    collected in ``flags`` and cleared by :meth:`reset`.
    """
    name = 'planner'

    def __init__(self):
        self.flags = set()

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__, self.name)

    def reset(self):
        self.flags = set()

    def plan(self, ctx):
        raise NotImplementedError

    def __call__(self, ctx):
        return self.plan(ctx)


class ScriptedPlanner(Planner):
    name = 'scripted'

    def __init__(self, hover_height=HOVER_HEIGHT, tolerance=HOVER_TOLERANCE):
        super(ScriptedPlanner, self).__init__()
        self.hover_height = hover_height
        self.tolerance = tolerance

    def plan(self, ctx):
        return scripted_plan(ctx, self.hover_height, self.tolerance)


class GraspOnlyPlanner(ScriptedPlanner):
    """Hover over the target and grasp, never clearing obstacles."""
    name = 'grasp-only'

    def plan(self, ctx):
        if not _hovering(ctx, self.hover_height, self.tolerance):
            return PlanAction('move_to', {'target': 'target'},
                              'position the gripper above the target')
        return PlanAction('grasp', {}, 'grasp without clearing')


class LLMPlanner(Planner):
    """Planner backed by a chat-completion service.

    Parameters
    ----------
    client : openai.OpenAI, optional
        A ready client. Built from ``endpoint``, ``api_key`` and ``timeout``
        when not given.
    model : str
    endpoint : str, optional
        Base URL of the service.
    api_key : str, optional
    timeout : float, optional
        Seconds per request.
    min_interval : float, optional
        Minimum seconds between requests of this process.
    max_tokens, temperature : optional
        Sampling parameters.
    use_render : bool, optional
        Attach the scene rendering to the prompt.
    config : AttrDict, optional
    """
    name = 'llm'

    def __init__(self, model, client=None, endpoint=None, api_key=None,
                 timeout=60.0, min_interval=0.0, max_tokens=512, temperature=0.0,
                 use_render=False, config=None):
        super(LLMPlanner, self).__init__()
        if not model:
            raise ValidationError("No language model configured, set %s"
                                  % MODEL_ENV_VAR)
        if client is None:
            client = openai.OpenAI(base_url=endpoint, api_key=api_key or 'unused',
                                   timeout=timeout, max_retries=0)
        self.client = client
        self.model = model
        self.min_interval = min_interval
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.use_render = use_render
        self.config = get_config(config)

    @classmethod
    def from_config(cls, config=None, client=None, use_render=False):
        """Build from the ``planner`` config section and the environment."""
        config = get_config(config)
        cfg = config.planner
        return cls(os.environ.get(MODEL_ENV_VAR, cfg.model), client=client,
                   endpoint=os.environ.get(URL_ENV_VAR, cfg.endpoint),
                   api_key=os.environ.get(KEY_ENV_VAR),
                   timeout=cfg.timeout, min_interval=cfg.min_interval,
                   max_tokens=cfg.max_tokens, temperature=cfg.temperature,
                   use_render=use_render, config=config)

    def plan(self, ctx):
        if not self.use_render and ctx.render is not None:
            ctx = ctx._replace(render=None)
        action, flags = llm_plan(ctx, self.client, self.model, self.config,
                                 max_tokens=self.max_tokens,
                                 temperature=self.temperature,
                                 min_interval=self.min_interval)
        self.flags.update(flags)
        return action


PLANNERS = ('scripted', 'grasp-only', 'llm')


def make_planner(kind, config=None, client=None, use_render=False):
    """Create a planner by name: ``scripted``, ``grasp-only`` or ``llm``."""
    config = get_config(config)
    hover = config.skills.hover_height
    if kind == 'scripted':
        return ScriptedPlanner(hover_height=hover)
    if kind == 'grasp-only':
        return GraspOnlyPlanner(hover_height=hover)
    if kind == 'llm':
        return LLMPlanner.from_config(config, client=client, use_render=use_render)
    raise ClutterGraspException("Unknown planner %r, expected one of %s"
                                % (kind, ', '.join(PLANNERS)))
