from __future__ import print_function, division, absolute_import

from types import SimpleNamespace

import pytest

from clutter_grasp.core import load_config
from clutter_grasp.geometry import Pose, ShapeDescriptor
from clutter_grasp.handrig import HandState
from clutter_grasp.world import SceneObject, SceneState

CUBE = ShapeDescriptor('box', (0.056, 0.056, 0.056))
BALL = ShapeDescriptor('sphere', (0.04,))
CAN = ShapeDescriptor('cylinder', (0.033, 0.10))

HOME = Pose((0.0, -0.30, 0.40))


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        # --runslow given in cli: do not skip slow tests
        return
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_object(id, x, y, shape=CUBE, yaw=0.0, mass=0.1, friction=1.0,
                is_target=False, name=None):
    """An object resting upright on the table at ``(x, y)``."""
    obj = SceneObject(id, name or id, shape, Pose(), mass=mass,
                      friction_static=friction, friction_dynamic=friction,
                      is_target=is_target)
    return obj._replace(pose=Pose((x, y, obj.rest_height), (0, 0, yaw)))


def make_scene(obstacles=(), target=(0.0, 0.0), target_shape=CUBE, hand=None,
               target_mass=0.094, target_friction=2.0):
    """A scene with a target and ``(id, x, y)`` or ``(id, x, y, shape)``
    obstacles."""
    objects = [make_object('target', target[0], target[1], target_shape,
                           mass=target_mass, friction=target_friction,
                           is_target=True, name='cube')]
    for spec in obstacles:
        objects.append(make_object(*spec))
    if hand is None:
        hand = HandState.at(HOME)
    return SceneState(objects, hand)


@pytest.fixture
def config():
    return load_config()


class FakeClient(object):
    """Stands in for ``openai.OpenAI``, answering with canned replies.

    Replies that are exceptions are raised instead, and any other
    non-string reply is returned as the raw response.
    """
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []
        self.chat = SimpleNamespace(completions=SimpleNamespace(create=self.create))

    def create(self, **kwargs):
        self.calls.append(kwargs)
        reply = self.replies.pop(0) if self.replies else '{}'
        if isinstance(reply, Exception):
            raise reply
        if not isinstance(reply, str):
            return reply
        message = SimpleNamespace(content=reply)
        return SimpleNamespace(choices=[SimpleNamespace(message=message)])
