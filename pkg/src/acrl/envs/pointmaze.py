"""Continuous U-shaped point-maze: velocity-controlled kinematic point
mass, per-step penalty, and a goal disc. Context = goal position in
[-2, 10]^2.
"""

from __future__ import annotations

import numpy as np

from ..nn import ContractViolation
from .base import Context, ContextualEnv, InfeasibleContext

LOW = -2.0
HIGH = 10.0
# the central bar of the U: everything left of the right-hand corridor is
# walled over the middle band, leaving a bottom corridor, a 2-unit right
# corridor and a 3-unit top corridor
BAR_X_MAX = 8.0
BAR_Y_MIN = 2.0
BAR_Y_MAX = 7.0

START = np.array([2.0, 0.0])
GOAL_RADIUS = 1.0
MAX_SPEED = 1.0
HORIZON = 100
LOCAL_MAP = 5
OBS_DIM = 4 + LOCAL_MAP * LOCAL_MAP

_EDGE = 1e-6


def blocked(x, y):
    """True if (x, y) lies outside the maze or inside the central bar."""
    if not (LOW <= x <= HIGH and LOW <= y <= HIGH):
        return True
    return x <= BAR_X_MAX and BAR_Y_MIN <= y <= BAR_Y_MAX


class PointMazeEnv(ContextualEnv):
    context_dim = 2
    observation_dim = OBS_DIM
    action_dim = 2
    horizon = HORIZON

    def context_bounds(self):
        return (np.full(2, LOW), np.full(2, HIGH))

    def postprocess_context(self, values):
        return Context(np.clip(np.asarray(values, dtype=np.float64), LOW, HIGH))

    def is_feasible(self, context):
        if context.dim != 2:
            return False
        x, y = context.values
        return not blocked(x, y)

    def _raw_context_sample(self, rng):
        return Context(rng.uniform(LOW, HIGH, size=2))

    def reset(self, context):
        if not self.is_feasible(context):
            raise InfeasibleContext(
                f"context {context.values} is outside the free region")
        self.goal = np.array(context.values)
        self.pos = START.copy()
        self.vel = np.zeros(2)
        self.steps = 0
        self._done = False
        return self._observe()

    def step(self, action):
        if self._done:
            raise ContractViolation("step on a finished episode")
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (2,):
            raise ContractViolation(f"action shape {a.shape} != (2,)")
        speed = np.linalg.norm(a)
        if speed > MAX_SPEED:
            a = a * (MAX_SPEED / speed)
        self.steps += 1
        # axis-separated moves make the point slide along walls
        x, y = self.pos
        nx = x + a[0]
        if blocked(nx, y):
            nx = self._clamp_axis(x, nx)
        ny = y + a[1]
        if blocked(nx, ny):
            ny = self._clamp_axis(y, ny)
        self.vel = np.array([nx - x, ny - y])
        self.pos = np.array([nx, ny])
        reward = -1.0
        done = False
        if np.linalg.norm(self.pos - self.goal) < GOAL_RADIUS:
            reward += 1.0
            done = True
        if self.steps >= HORIZON:
            done = True
        self._done = done
        return self._observe(), reward, done, {"steps": self.steps}

    @staticmethod
    def _clamp_axis(old, new):
        """Stop just short of the wall edge crossed while moving one axis.
        Displacements are at most MAX_SPEED, which is smaller than every
        corridor width, so at most one wall face can be crossed."""
        # candidate boundaries: domain edges and bar faces
        edges = [LOW, HIGH, BAR_Y_MIN, BAR_Y_MAX, BAR_X_MAX]
        if new > old:
            crossed = [e for e in edges if old < e <= new]
            return min(crossed) - _EDGE if crossed else old
        crossed = [e for e in edges if new <= e < old]
        return max(crossed) + _EDGE if crossed else old

    def _observe(self):
        grid = np.zeros((LOCAL_MAP, LOCAL_MAP))
        cx, cy = np.rint(self.pos)
        half = LOCAL_MAP // 2
        for j in range(LOCAL_MAP):
            for i in range(LOCAL_MAP):
                grid[j, i] = 1.0 if blocked(cx + i - half, cy + j - half) else 0.0
        return np.concatenate([self.vel, self.pos, grid.reshape(-1)])
