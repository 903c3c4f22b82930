from __future__ import absolute_import

from .core import (ClutterGraspException, ValidationError, ParseError,
                   SettleError, InfeasibleScenario, load_config)
from .geometry import Pose, ShapeDescriptor, PointCloud
from .scenes import ScenarioConfig, generate_scenario, generate_benchmark
from .world import SceneObject, SceneState
from .skills import SkillRequest, SkillResult
from .planner import PlanAction, PlannerContext
from .executor import EpisodeReport, BenchmarkTable, run_episode, run_benchmark

from ._version import __version__
del absolute_import
