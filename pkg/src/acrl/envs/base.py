"""Shared contextual-environment interface: contexts, transitions,
trajectories, and the feasibility / uniform-sampling contract every
environment family implements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import ContractViolation

REJECTION_CAP = 1000


class InfeasibleContext(ValueError):
    """A context violates the family's feasibility predicate."""


class ConfigurationError(RuntimeError):
    """The feasible context set is empty or too small to sample from."""


@dataclass(frozen=True)
class Context:
    """Parametric task descriptor (goal coordinates, optionally key
    coordinates). Immutable and hashable so buffers can count them."""

    values: tuple

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(float(v) for v in values))

    def asarray(self):
        return np.array(self.values, dtype=np.float64)

    @property
    def dim(self):
        return len(self.values)


@dataclass
class Transition:
    state: np.ndarray
    action: object  # int action id (grid) or 2-vector (point)
    reward: float
    next_state: np.ndarray


@dataclass
class Trajectory:
    """Ordered transitions collected under one context."""

    context: Context
    transitions: list = field(default_factory=list)

    def append(self, transition):
        self.transitions.append(transition)

    def __len__(self):
        return len(self.transitions)

    @property
    def rewards(self):
        return [t.reward for t in self.transitions]


def episodic_return(trajectory):
    """Undiscounted reward sum of a non-empty trajectory."""
    if isinstance(trajectory, Trajectory):
        rewards = trajectory.rewards
    else:
        rewards = list(trajectory)
    if not rewards:
        raise ContractViolation("empty trajectory has no return")
    return float(sum(rewards))


class ContextualEnv:
    """Interface implemented by each environment family.

    Subclasses define ``context_dim``, ``observation_dim``, the action
    space, ``is_feasible``, ``reset`` and ``step``; this base supplies the
    rejection-sampling uniform context draw.
    """

    context_dim = None
    observation_dim = None
    horizon = None

    def is_feasible(self, context):
        raise NotImplementedError

    def _raw_context_sample(self, rng):
        raise NotImplementedError

    def context_bounds(self):
        """(low, high) arrays bounding the context space, used for scaling
        and clamping decoded contexts."""
        raise NotImplementedError

    def postprocess_context(self, values):
        """Clamp (and for discrete families round) a raw real vector into
        the context space. Does not check feasibility."""
        raise NotImplementedError

    def sample_uniform_context(self, rng):
        for _ in range(REJECTION_CAP):
            c = self._raw_context_sample(rng)
            if self.is_feasible(c):
                return c
        raise ConfigurationError(
            f"no feasible context found in {REJECTION_CAP} draws")

    def reset(self, context):
        raise NotImplementedError

    def step(self, action):
        raise NotImplementedError


def rollout(env, context, act_fn, rng):
    """Run one episode; ``act_fn(obs) -> action``. Returns the trajectory."""
    obs = env.reset(context)
    traj = Trajectory(context)
    done = False
    while not done:
        action = act_fn(obs)
        next_obs, reward, done, _ = env.step(action)
        traj.append(Transition(obs, action, reward, next_obs))
        obs = next_obs
    return traj
