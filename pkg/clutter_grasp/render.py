from __future__ import absolute_import, division

from io import BytesIO

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Circle, Rectangle
from matplotlib.transforms import Affine2D

from .core import get_config
from .scenes import ScenarioConfig, scenario_to_scene


__all__ = ('render_scene', 'TARGET_COLOR', 'OBSTACLE_COLOR')


TARGET_COLOR = '#d62728'
OBSTACLE_COLOR = '#1f77b4'
CORRIDOR_COLOR = '#2ca02c'
WORKSPACE_COLOR = '#7f7f7f'
TCP_COLOR = '#000000'

_RC = {'svg.hashsalt': 'clutter-grasp', 'svg.fonttype': 'none'}


def _footprint(ax, obj):
    color = TARGET_COLOR if obj.is_target else OBSTACLE_COLOR
    style = dict(facecolor=color, edgecolor='black',
                 alpha=0.9 if obj.is_target else 0.6,
                 linewidth=2.0 if obj.is_target else 1.0)
    shape = obj.shape
    if shape.kind == 'box':
        w, d = shape.dimensions[0], shape.dimensions[1]
        patch = Rectangle((-w / 2, -d / 2), w, d, **style)
        patch.set_transform(Affine2D().rotate(obj.pose.yaw)
                            .translate(obj.pose.x, obj.pose.y) + ax.transData)
    else:
        patch = Circle((obj.pose.x, obj.pose.y), obj.footprint_radius, **style)
    patch.set_gid('footprint-%s' % obj.id)
    ax.add_patch(patch)
    ax.annotate(obj.name, (obj.pose.x, obj.pose.y), ha='center', va='center',
                fontsize=6)


def render_scene(scene, config=None, title=None):
    """Draw a top-down view of a scene as an SVG document.

    The drawing shows the workspace bounds, the approach corridor around the
    target, one footprint per object with the target in a distinct color,
    and the TCP position.

    Parameters
    ----------
    scene : SceneState or ScenarioConfig
        Scenarios are settled into a scene first.
    config : AttrDict, optional
    title : str, optional

    Returns
    -------
    svg : bytes
        The SVG document, identical for identical scenes.
    """
    config = get_config(config)
    if isinstance(scene, ScenarioConfig):
        if title is None:
            title = scene.scenario_id
        scene = scenario_to_scene(scene,
                                  workspace_halfwidth=config.world.workspace_halfwidth,
                                  tolerance=config.world.penetration_tolerance)

    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(5, 5))
        ax = fig.add_subplot(111)
        hw = scene.workspace_halfwidth

        bounds = Rectangle((-hw, -hw), 2 * hw, 2 * hw, fill=False,
                           edgecolor=WORKSPACE_COLOR, linestyle='--')
        bounds.set_gid('workspace')
        ax.add_patch(bounds)

        target = scene.target
        corridor = Circle((target.pose.x, target.pose.y),
                          target.footprint_radius + config.world.corridor_halfwidth,
                          fill=False, edgecolor=CORRIDOR_COLOR, linestyle=':')
        corridor.set_gid('approach-corridor')
        ax.add_patch(corridor)

        for obj in scene.objects:
            _footprint(ax, obj)

        tcp = scene.hand.tcp_pose
        marker, = ax.plot([tcp.x], [tcp.y], marker='x', markersize=8,
                          color=TCP_COLOR, linestyle='none')
        marker.set_gid('tcp')

        margin = 0.02
        ax.set_xlim(-hw - margin, hw + margin)
        ax.set_ylim(-hw - margin, hw + margin)
        ax.set_aspect('equal')
        ax.set_xlabel('x [m]')
        ax.set_ylabel('y [m]')
        if title:
            ax.set_title(title)

        buf = BytesIO()
        fig.savefig(buf, format='svg', metadata={'Date': None})
    return buf.getvalue()
