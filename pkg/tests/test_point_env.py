"""Continuous U-maze semantics: per-step penalty, success bonus, sliding."""

import numpy as np
import pytest

from acrl.envs import Context, InfeasibleContext
from acrl.envs.pointmaze import (HIGH, HORIZON, LOW, PointMazeEnv, START,
                                 blocked)
from acrl.nn import ContractViolation


@pytest.fixture
def env():
    return PointMazeEnv()


def test_block_geometry():
    # the central bar of the U blocks the middle row, left and center blocks
    assert blocked(0.0, 4.0)
    assert blocked(5.0, 5.0)
    assert not blocked(9.0, 5.0)   # right column is open
    assert not blocked(2.0, 0.0)   # start region
    assert not blocked(0.0, 9.0)   # top-left
    assert blocked(-3.0, 0.0)      # outside the domain
    assert blocked(0.0, 11.0)


def test_feasibility(env):
    assert env.is_feasible(Context([0.0, 8.0]))
    assert not env.is_feasible(Context([0.0, 4.0]))
    assert not env.is_feasible(Context([-5.0, 0.0]))


def test_reset_infeasible(env):
    with pytest.raises(InfeasibleContext):
        env.reset(Context([1.0, 5.0]))


def test_step_penalty_exact(env):
    env.reset(Context([0.0, 8.0]))
    _, r, done, _ = env.step(np.array([0.5, 0.0]))
    assert r == -1.0 and not done


def test_success_bonus_cancels_penalty(env):
    # goal within one unit: -1 + 1 = 0 on the terminating step
    env.reset(Context([2.5, 0.0]))
    _, r, done, _ = env.step(np.array([0.3, 0.0]))
    assert done and r == 0.0


def test_return_equals_minus_steps_before_success(env):
    env.reset(Context([4.5, 0.0]))
    total, done = 0.0, False
    while not done:
        _, r, done, _ = env.step(np.array([1.0, 0.0]))
        total += r
    # reaches within radius 1 after 2 steps: -1, then -1+1
    assert total == -1.0


def test_action_speed_clipped(env):
    env.reset(Context([0.0, 8.0]))
    env.step(np.array([10.0, 0.0]))
    assert np.linalg.norm(env.vel) <= 1.0 + 1e-12


def test_wall_sliding(env):
    # pushing diagonally into the central bar moves along x only
    env.reset(Context([0.0, 8.0]))
    for _ in range(8):
        env.step(np.array([-0.6, 0.6]))  # up-left into the central bar
    x, y = env.pos
    assert y == pytest.approx(2.0, abs=1e-5)  # stopped at the bar's lower edge
    assert y < 2.0
    assert x < 0.0  # x kept sliding left


def test_cannot_enter_blocked_region(env):
    rng = np.random.default_rng(0)
    env.reset(Context([0.0, 8.0]))
    done = False
    while not done:
        a = rng.uniform(-1, 1, 2)
        obs, _, done, _ = env.step(a)
        assert not blocked(*env.pos)


def test_horizon_truncation(env):
    env.reset(Context([0.0, 8.0]))
    done, steps = False, 0
    while not done:
        _, _, done, _ = env.step(np.zeros(2))
        steps += 1
    assert steps == HORIZON


def test_step_after_done(env):
    env.reset(Context([2.5, 0.0]))
    env.step(np.array([0.5, 0.0]))
    with pytest.raises(ContractViolation):
        env.step(np.zeros(2))


def test_bad_action_shape(env):
    env.reset(Context([0.0, 8.0]))
    with pytest.raises(ContractViolation):
        env.step(np.zeros(3))


def test_observation_layout(env):
    obs = env.reset(Context([0.0, 8.0]))
    assert obs.shape == (4 + 25,)
    assert np.array_equal(obs[:2], [0.0, 0.0])       # velocity
    assert np.array_equal(obs[2:4], START)           # position
    # local occupancy reflects the bar above the start
    grid = obs[4:].reshape(5, 5)
    assert grid.max() == 1.0


def test_context_bounds_and_postprocess(env):
    low, high = env.context_bounds()
    assert low[0] == LOW and high[0] == HIGH
    ctx = env.postprocess_context(np.array([50.0, -50.0]))
    assert ctx.values == (HIGH, LOW)


def test_uniform_context_feasible(env):
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = env.sample_uniform_context(rng)
        assert env.is_feasible(c)
