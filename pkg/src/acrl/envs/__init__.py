"""Contextual environment families."""

from importlib import resources

from .base import (Context, ContextualEnv, ConfigurationError,
                   InfeasibleContext, Trajectory, Transition,
                   episodic_return, rollout)
from .gridmaze import GridMazeEnv, GridMazeSpec, LayoutError, load_layout, parse_layout
from .pointmaze import PointMazeEnv

BUILTIN_LAYOUTS = ("easy_a", "medium_a")


def builtin_layout_path(name):
    return str(resources.files("acrl.layouts") / f"{name}.txt")


def make_env(family, layout=None):
    """Build an environment: family 'grid' (requires a layout file path or
    builtin layout name) or 'point'."""
    if family == "point":
        return PointMazeEnv()
    if family == "grid":
        if layout is None:
            raise ValueError("grid family needs a layout")
        if layout in BUILTIN_LAYOUTS:
            layout = builtin_layout_path(layout)
        return GridMazeEnv(load_layout(layout))
    raise ValueError(f"unknown family {family!r}")


__all__ = [
    "Context", "ContextualEnv", "ConfigurationError", "InfeasibleContext",
    "Trajectory", "Transition", "episodic_return", "rollout",
    "GridMazeEnv", "GridMazeSpec", "LayoutError", "load_layout",
    "parse_layout", "PointMazeEnv", "make_env", "builtin_layout_path",
    "BUILTIN_LAYOUTS",
]
