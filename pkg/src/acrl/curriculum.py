"""Curriculum controller: FIFO experience/task buffers, lambda-mixed
context sampling, the two curriculum updaters (latent interpolation and
exploration-boundary perturbation), and the gated training loop that ties
policy learning, representation learning and task generation together.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .agent import RolloutBatch, ppo_update
from .envs.base import (Context, ConfigurationError, REJECTION_CAP,
                        Trajectory, Transition, episodic_return)
from .nn import ContractViolation, NumericFault
from .taskrepr import decode_context, latent_distance


class VaeBuffer:
    """FIFO store of (context, trajectory) pairs with fixed capacity."""

    def __init__(self, capacity=256):
        if capacity < 1:
            raise ContractViolation("capacity must be positive")
        self.capacity = capacity
        self.entries = deque(maxlen=capacity)

    def push(self, context, trajectory):
        self.entries.append((context, trajectory))

    def __len__(self):
        return len(self.entries)

    def recent(self, count):
        return list(self.entries)[-count:]


class TaskBuffer:
    """Bounded multiset of contexts; the nonparametric intermediate task
    distribution. Oldest-first eviction."""

    def __init__(self, capacity=256):
        if capacity < 1:
            raise ContractViolation("capacity must be positive")
        self.capacity = capacity
        self.contexts = deque(maxlen=capacity)

    def push(self, context):
        self.contexts.append(context)

    def extend(self, contexts):
        for c in contexts:
            self.contexts.append(c)

    def sample(self, rng):
        idx = int(rng.integers(0, len(self.contexts)))
        return self.contexts[idx]

    def __len__(self):
        return len(self.contexts)


@dataclass
class CurriculumConfig:
    """All thresholds and rates governing the curriculum loop."""

    target_context: Context
    total_steps: int
    delta: float = 0.4           # return threshold for representation data
    delta_tar: float = 0.4       # target-return threshold for the updater switch
    update_threshold: float = 0.5  # mean train return gate (G)
    sampling_ratio: float = 0.25   # lambda
    alpha: float = 0.9             # latent interpolation step size
    beta: float = 1.0              # exponential index distribution parameter
    sigma: float = 1.0             # boundary-perturbation noise scale
    n_u: int = 500                 # episodes between curriculum checks
    k: int = 10                    # target evaluation episodes
    m: int = 16                    # train-return sample size / EBU draws
    vae_buffer_size: int = 256
    task_buffer_size: int = 256
    ebu_sort_order: str = "ascending"

    def __post_init__(self):
        if not 0.0 <= self.sampling_ratio <= 1.0:
            raise ContractViolation("sampling ratio out of [0,1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractViolation("alpha out of [0,1]")
        if self.beta <= 0 or self.sigma <= 0:
            raise ContractViolation("beta and sigma must be positive")
        if self.n_u < 1 or self.k < 1 or self.m < 1 or self.total_steps < 1:
            raise ContractViolation("n_u, k, m, total_steps must be >= 1")
        if self.ebu_sort_order not in ("ascending", "descending"):
            raise ContractViolation("ebu_sort_order must be ascending/descending")


def sample_training_context(task_buffer, env, sampling_ratio, rng):
    """Bernoulli(lambda) mix of uniform-over-buffer and uniform-over-
    feasible-context-space; an empty buffer always falls through."""
    if len(task_buffer) > 0 and rng.random() < sampling_ratio:
        return task_buffer.sample(rng)
    return env.sample_uniform_context(rng)


def _filtered_pairs(vae_buffer, delta):
    return [(c, traj) for c, traj in vae_buffer.entries
            if episodic_return(traj) >= delta]


def lsp_update(vae_buffer, learner, target_embedding, alpha, delta, env,
               return_distances=False):
    """Interpolate each solved task's latent mean toward the target latent
    and decode back; infeasible decodes are dropped."""
    filtered = _filtered_pairs(vae_buffer, delta)
    if not filtered:
        return ([], []) if return_distances else []
    z_tar = target_embedding.mean
    out = []
    dists = []
    for _, traj in filtered:
        z = learner.embed_task(traj).mean
        z_new = alpha * z_tar + (1.0 - alpha) * z
        ctx, feasible = decode_context(learner.decoders, z_new, env)
        if feasible:
            out.append(ctx)
            dists.append(float(np.linalg.norm(z_new - z_tar)))
    return (out, dists) if return_distances else out


def ebu_update(vae_buffer, learner, target_embedding, beta, sigma, delta, env,
               count, rng, sort_order="ascending", target_context=None,
               return_distances=False):
    """Perturb solved tasks near the capability boundary.

    Solved tasks are ranked by latent distance to the target (context-space
    distance as a fallback when no target embedding exists yet), an index
    is drawn from Exp(beta) via the inverse CDF, rounded and clamped, and
    the selected context is jittered with isotropic Gaussian noise.
    """
    filtered = _filtered_pairs(vae_buffer, delta)
    if not filtered:
        return ([], []) if return_distances else []
    if target_embedding is not None:
        dists = [latent_distance(learner.embed_task(traj), target_embedding)
                 for _, traj in filtered]
    else:
        tc = target_context.asarray()
        dists = [float(np.linalg.norm(c.asarray() - tc)) for c, _ in filtered]
    order = np.argsort(dists, kind="stable")
    if sort_order == "descending":
        order = order[::-1]
    contexts = [filtered[i][0] for i in order]
    sorted_dists = [dists[i] for i in order]
    n = len(contexts)
    out = []
    out_dists = []
    for _ in range(count):
        u = rng.random()
        xi = -np.log1p(-u) / beta
        idx = min(int(round(xi)), n - 1)
        noise = rng.normal(0.0, sigma, size=contexts[idx].dim)
        ctx = env.postprocess_context(contexts[idx].asarray() + noise)
        if env.is_feasible(ctx):
            out.append(ctx)
            out_dists.append(sorted_dists[idx])
    return (out, out_dists) if return_distances else out


def source_distribution_init(task_buffer, center, std, count, env, rng):
    """Fill the task buffer with feasible Gaussian draws around a center
    context."""
    if not env.is_feasible(center):
        raise ConfigurationError(
            f"source center {center.values} is infeasible")
    std = np.broadcast_to(np.asarray(std, dtype=np.float64), (center.dim,))
    for _ in range(count):
        for attempt in range(REJECTION_CAP + 1):
            if attempt == REJECTION_CAP:
                raise ConfigurationError(
                    "could not draw a feasible source context")
            draw = rng.normal(center.asarray(), std)
            ctx = env.postprocess_context(draw)
            if env.is_feasible(ctx):
                task_buffer.push(ctx)
                break
    return task_buffer


@dataclass
class UpdateRecord:
    env_steps: int
    episode: int
    mean_train_return: float
    target_return: float
    updater: str  # none / EBU / LSP
    n_generated: int
    mean_latent_dist_to_target: float
    vae_loss: float
    task_decoder_loss: float


class AcrlRunner:
    """Drives the full curriculum training loop.

    ``strategy`` selects between the full curriculum ('acrl'), plain
    uniform context sampling ('random'), and target-only training
    ('default'). The evaluation seams (:meth:`train_eval_return`,
    :meth:`target_eval`) are methods so tests can instrument them.
    """

    def __init__(self, env, policy, learner, config, rng, *,
                 strategy="acrl", rollout_steps=2048, ppo_epochs=4,
                 minibatch_size=128, stop_at_return=None, on_record=None):
        if strategy not in ("acrl", "random", "default"):
            raise ContractViolation(f"unknown strategy {strategy!r}")
        if not env.is_feasible(config.target_context):
            raise ContractViolation("target context is infeasible")
        self.env = env
        self.policy = policy
        self.learner = learner
        self.config = config
        self.rng = rng
        self.strategy = strategy
        self.rollout_steps = rollout_steps
        self.ppo_epochs = ppo_epochs
        self.minibatch_size = minibatch_size
        self.stop_at_return = stop_at_return
        self.on_record = on_record
        self.vae_buffer = VaeBuffer(config.vae_buffer_size)
        self.task_buffer = TaskBuffer(config.task_buffer_size)
        self.best_target_trajectory = None
        self.best_target_return = -np.inf
        self.counts = {"repr_updates": 0, "ebu": 0, "lsp": 0,
                       "numeric_faults": 0, "context_fallbacks": 0}
        self.records = []
        self.env_steps = 0
        self.episode = 0

    # -- evaluation seams ---------------------------------------------------

    def train_eval_return(self):
        """Mean return over the m most recent buffer trajectories."""
        recent = self.vae_buffer.recent(self.config.m)
        if not recent:
            return -np.inf
        return float(np.mean([episodic_return(t) for _, t in recent]))

    def target_eval(self):
        """k greedy target episodes; tracks the best target trajectory for
        the target embedding. Returns the mean episodic return."""
        total = 0.0
        target = self.config.target_context
        cvals = target.asarray()
        for _ in range(self.config.k):
            obs = self.env.reset(target)
            traj = Trajectory(target)
            done = False
            while not done:
                action = self.policy.act_greedy(obs, cvals)
                nobs, reward, done, _ = self.env.step(action)
                traj.append(Transition(obs, action, reward, nobs))
                obs = nobs
            ret = episodic_return(traj)
            total += ret
            if ret > self.best_target_return:
                self.best_target_return = ret
                self.best_target_trajectory = traj
        return total / self.config.k

    # -- main loop ----------------------------------------------------------

    def _sample_context(self):
        if self.strategy == "default":
            return self.config.target_context
        if self.strategy == "random":
            return self.env.sample_uniform_context(self.rng)
        return sample_training_context(self.task_buffer, self.env,
                                       self.config.sampling_ratio, self.rng)

    def _rollout_episode(self, context, batch):
        cvals = context.asarray()
        obs = self.env.reset(context)
        traj = Trajectory(context)
        done = False
        while not done:
            action, logp, value = self.policy.act(obs, cvals, self.rng)
            nobs, reward, done, _ = self.env.step(action)
            batch.add(obs, cvals, action, logp, value, reward, done)
            traj.append(Transition(obs, action, reward, nobs))
            obs = nobs
        self.env_steps += len(traj)
        return traj

    def _target_embedding(self):
        if self.best_target_trajectory is None:
            return None
        return self.learner.embed_task(self.best_target_trajectory)

    def _curriculum_check(self):
        cfg = self.config
        mean_train = self.train_eval_return()
        # greedy target evaluation is deterministic and consumes no RNG,
        # so running it at every check only improves the log
        target_return = self.target_eval()
        updater = "none"
        n_generated = 0
        mean_dist = float("nan")
        vae_loss = float("nan")
        task_loss = float("nan")
        if mean_train > cfg.update_threshold:
            report = self.learner.train_representation(
                self.vae_buffer, cfg.delta, self.rng)
            if report["status"] == "trained":
                self.counts["repr_updates"] += 1
                vae_loss = report["vae_loss"]
                task_loss = report["task_decoder_loss"]
            target_emb = self._target_embedding()
            if target_return < cfg.delta_tar:
                updater = "EBU"
                self.counts["ebu"] += 1
                if target_emb is None:
                    self.counts["context_fallbacks"] += 1
                generated, dists = ebu_update(
                    self.vae_buffer, self.learner, target_emb, cfg.beta,
                    cfg.sigma, cfg.delta, self.env, cfg.m, self.rng,
                    cfg.ebu_sort_order, target_context=cfg.target_context,
                    return_distances=True)
            else:
                updater = "LSP"
                self.counts["lsp"] += 1
                generated, dists = lsp_update(
                    self.vae_buffer, self.learner, target_emb, cfg.alpha,
                    cfg.delta, self.env, return_distances=True)
            self.task_buffer.extend(generated)
            n_generated = len(generated)
            if dists:
                mean_dist = float(np.mean(dists))
        record = UpdateRecord(
            self.env_steps, self.episode, mean_train, target_return, updater,
            n_generated, mean_dist, vae_loss, task_loss)
        self.records.append(record)
        if self.on_record is not None:
            self.on_record(self, record)
        return target_return

    def run(self):
        """Run until the step budget is spent (or the stop-at-return early
        exit fires). Returns the list of update records."""
        cfg = self.config
        batch = RolloutBatch()
        curriculum_on = self.strategy == "acrl"
        while self.env_steps < cfg.total_steps:
            context = self._sample_context()
            traj = self._rollout_episode(context, batch)
            self.vae_buffer.push(context, traj)
            if len(batch) >= self.rollout_steps:
                try:
                    ppo_update(self.policy, batch, self.ppo_epochs,
                               self.minibatch_size, self.rng)
                except NumericFault:
                    self.counts["numeric_faults"] += 1
                batch.clear()
            if self.episode % cfg.n_u == 0:
                if curriculum_on:
                    target_return = self._curriculum_check()
                else:
                    target_return = self.target_eval()
                    self.records.append(UpdateRecord(
                        self.env_steps, self.episode,
                        self.train_eval_return(), target_return, "none", 0,
                        float("nan"), float("nan"), float("nan")))
                if (self.stop_at_return is not None
                        and np.isfinite(target_return)
                        and target_return >= self.stop_at_return):
                    break
            self.episode += 1
        return self.records


def run_acrl(env, policy, learner, config, rng, **kwargs):
    """Convenience wrapper: build a runner, run it, return (policy,
    records, runner)."""
    runner = AcrlRunner(env, policy, learner, config, rng, **kwargs)
    records = runner.run()
    return policy, records, runner
