"""Context-conditioned on-policy actor-critic: clipped surrogate policy
gradient with GAE, on top of the manual-gradient MLPs in :mod:`acrl.nn`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (AdamState, ContractViolation, Mlp, NumericFault, adam_step)

LOG_STD_MIN = -5.0


def _log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class RolloutBatch:
    """Per-step arrays recorded during collection (values/log-probs are
    off-graph snapshots)."""

    observations: list = field(default_factory=list)
    contexts: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def add(self, obs, ctx, action, log_prob, value, reward, done):
        self.observations.append(obs)
        self.contexts.append(ctx)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.values.append(value)
        self.rewards.append(reward)
        self.dones.append(done)

    def __len__(self):
        return len(self.rewards)

    def clear(self):
        for lst in (self.observations, self.contexts, self.actions,
                    self.log_probs, self.values, self.rewards, self.dones):
            lst.clear()


class Policy:
    """Actor-critic over (observation ++ scaled context).

    Discrete action spaces get a categorical head, continuous ones a
    diagonal Gaussian with a learned state-independent log-std.
    """

    def __init__(self, obs_dim, context_low, context_high, *, n_actions=None,
                 action_dim=None, hidden=(128, 128, 128), gamma=0.95,
                 gae_lambda=0.99, clip_eps=0.2, entropy_coef=0.01,
                 vf_coef=0.5, lr=3e-4, rng=None):
        if (n_actions is None) == (action_dim is None):
            raise ContractViolation("exactly one of n_actions/action_dim")
        rng = rng or np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.context_low = np.asarray(context_low, dtype=np.float64)
        self.context_high = np.asarray(context_high, dtype=np.float64)
        self.context_dim = len(self.context_low)
        in_dim = obs_dim + self.context_dim
        self.discrete = n_actions is not None
        out = n_actions if self.discrete else action_dim
        self.actor = Mlp([in_dim, *hidden, out], activation="tanh",
                         init="orthogonal", rng=rng, out_gain=0.01)
        self.critic = Mlp([in_dim, *hidden, 1], activation="tanh",
                          init="orthogonal", rng=rng, out_gain=1.0)
        self.log_std = (np.zeros(action_dim, dtype=np.float64)
                        if not self.discrete else None)
        self.gamma = gamma
        self.gae_lambda = gae_lambda
        self.clip_eps = clip_eps
        self.entropy_coef = entropy_coef
        self.vf_coef = vf_coef
        actor_params = self.actor.params()
        if not self.discrete:
            actor_params = actor_params + [self.log_std]
        self.actor_adam = AdamState(actor_params, lr=lr)
        self.critic_adam = AdamState(self.critic.params(), lr=lr)

    # -- inference ----------------------------------------------------------

    def _scale_context(self, context):
        span = np.maximum(self.context_high - self.context_low, 1e-12)
        return (np.asarray(context, dtype=np.float64) - self.context_low) / span

    def policy_input(self, obs, context):
        return np.concatenate([np.asarray(obs, dtype=np.float64),
                               self._scale_context(context)])

    def value(self, obs, context):
        return float(self.critic.forward(self.policy_input(obs, context))[0])

    def act(self, obs, context, rng):
        """Sample an action; returns (action, log_prob, value)."""
        x = self.policy_input(obs, context)
        head = self.actor.forward(x)
        value = float(self.critic.forward(x)[0])
        if self.discrete:
            if not np.all(np.isfinite(head)):
                raise NumericFault("non-finite action logits")
            logp_all = _log_softmax(head)
            p = np.exp(logp_all)
            action = int(rng.choice(len(p), p=p / p.sum()))
            return action, float(logp_all[action]), value
        std = np.exp(np.maximum(self.log_std, LOG_STD_MIN))
        eps = rng.standard_normal(head.shape)
        action = head + std * eps
        logp = float(self._gauss_logp(action, head, std))
        return action, logp, value

    def act_greedy(self, obs, context):
        head = self.actor.forward(self.policy_input(obs, context))
        if self.discrete:
            return int(np.argmax(head))
        return head

    @staticmethod
    def _gauss_logp(action, mean, std):
        d = (action - mean) / std
        return (-0.5 * np.sum(d * d, axis=-1) - np.sum(np.log(std))
                - 0.5 * len(std) * np.log(2.0 * np.pi))

    def log_prob(self, obs, context, action):
        """Log-density of ``action`` under the current policy (oracle hook
        for tests)."""
        head = self.actor.forward(self.policy_input(obs, context))
        if self.discrete:
            return float(_log_softmax(head)[int(action)])
        std = np.exp(np.maximum(self.log_std, LOG_STD_MIN))
        return float(self._gauss_logp(np.asarray(action), head, std))

    def snapshot(self):
        parts = [p.copy() for p in self.actor.params()]
        parts += [p.copy() for p in self.critic.params()]
        if not self.discrete:
            parts.append(self.log_std.copy())
        return parts

    def restore(self, parts):
        na = len(self.actor.params())
        nc = len(self.critic.params())
        self.actor.set_params(parts[:na])
        self.critic.set_params(parts[na:na + nc])
        if not self.discrete:
            self.log_std[...] = parts[na + nc]


def compute_gae(rewards, values, dones, bootstrap_value, gamma, gae_lambda):
    """Standard GAE with episode-boundary masking; returns (advantages,
    returns) with returns = advantages + values."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ContractViolation("unequal GAE input lengths")
    n = len(rewards)
    adv = np.zeros(n)
    gae = 0.0
    next_value = bootstrap_value
    for t in range(n - 1, -1, -1):
        mask = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * mask - values[t]
        gae = delta + gamma * gae_lambda * mask * gae
        adv[t] = gae
        next_value = values[t]
    return adv, adv + values


def ppo_update(policy, batch, epochs=4, minibatch_size=128, rng=None,
               bootstrap_value=0.0):
    """Clipped-surrogate update over one rollout batch.

    Advantages are normalized across the whole batch. A numeric fault in
    any minibatch aborts the update and restores the pre-call parameters.
    """
    if len(batch) == 0:
        raise ContractViolation("empty rollout batch")
    rng = rng or np.random.default_rng(0)
    obs = np.asarray(batch.observations, dtype=np.float64)
    ctx = np.asarray(batch.contexts, dtype=np.float64)
    if policy.discrete:
        actions = np.asarray(batch.actions, dtype=np.int64)
    else:
        actions = np.asarray(batch.actions, dtype=np.float64)
    old_logp = np.asarray(batch.log_probs, dtype=np.float64)
    values = np.asarray(batch.values, dtype=np.float64)
    adv, returns = compute_gae(batch.rewards, values, batch.dones,
                               bootstrap_value, policy.gamma,
                               policy.gae_lambda)
    adv_std = adv.std()
    adv = (adv - adv.mean()) / (adv_std + 1e-8)
    span = np.maximum(policy.context_high - policy.context_low, 1e-12)
    inputs = np.concatenate(
        [obs, (ctx - policy.context_low) / span], axis=1)

    n = len(batch)
    saved = policy.snapshot()
    actor_losses, value_losses, entropies = [], [], []
    try:
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, minibatch_size):
                idx = order[start:start + minibatch_size]
                stats = _minibatch_step(policy, inputs[idx], actions[idx],
                                        old_logp[idx], adv[idx], returns[idx])
                actor_losses.append(stats[0])
                value_losses.append(stats[1])
                entropies.append(stats[2])
    except NumericFault:
        policy.restore(saved)
        raise
    return {
        "actor_loss": float(np.mean(actor_losses)),
        "value_loss": float(np.mean(value_losses)),
        "entropy": float(np.mean(entropies)),
        "adv_mean": float(adv.mean()),
        "adv_std": float(adv.std()),
    }


def actor_loss_and_grads(policy, x, actions, old_logp, adv):
    """Clipped-surrogate actor loss (with entropy bonus) and its exact
    gradients w.r.t. the actor parameters (plus log_std when continuous).
    Pure: does not update anything."""
    m = len(x)
    head = policy.actor.forward(x)
    if policy.discrete:
        logp_all = _log_softmax(head)
        p = np.exp(logp_all)
        new_logp = logp_all[np.arange(m), actions]
    else:
        std = np.exp(np.maximum(policy.log_std, LOG_STD_MIN))
        d = (actions - head) / std
        new_logp = (-0.5 * np.sum(d * d, axis=1) - np.sum(np.log(std))
                    - 0.5 * len(std) * np.log(2.0 * np.pi))
    ratio = np.exp(new_logp - old_logp)
    clipped = np.clip(ratio, 1.0 - policy.clip_eps, 1.0 + policy.clip_eps)
    surr = np.minimum(ratio * adv, clipped * adv)
    # clip saturation: gradient only flows where the unclipped term is active
    active = ~(((adv > 0) & (ratio > 1.0 + policy.clip_eps))
               | ((adv < 0) & (ratio < 1.0 - policy.clip_eps)))
    dlogp = -(ratio * adv * active) / m

    if policy.discrete:
        ent_per = -np.sum(p * logp_all, axis=1)
        entropy = float(np.mean(ent_per))
        onehot = np.zeros_like(p)
        onehot[np.arange(m), actions] = 1.0
        dhead = dlogp[:, None] * (onehot - p)
        dhead += policy.entropy_coef * p * (logp_all + ent_per[:, None]) / m
        dlogstd = None
    else:
        entropy = float(np.sum(np.log(std)) +
                        0.5 * len(std) * (1.0 + np.log(2.0 * np.pi)))
        dhead = dlogp[:, None] * (d / std)
        dlogstd = (dlogp[:, None] * (d * d - 1.0)).sum(axis=0)
        dlogstd -= policy.entropy_coef  # d(-H)/dlog_std = -1 per dim
        dlogstd = dlogstd * (policy.log_std > LOG_STD_MIN)
    grads, _ = policy.actor.backward(dhead)
    if dlogstd is not None:
        grads = grads + [dlogstd]
    loss = float(np.mean(-surr)) - policy.entropy_coef * entropy
    actor_loss = float(np.mean(-surr))
    return loss, grads, actor_loss, entropy


def critic_loss_and_grads(policy, x, returns):
    """Scaled value MSE and its gradients w.r.t. critic parameters."""
    m = len(x)
    v = policy.critic.forward(x)[:, 0]
    value_loss = float(np.mean((v - returns) ** 2))
    dv = policy.vf_coef * 2.0 * (v - returns)[:, None] / m
    grads, _ = policy.critic.backward(dv)
    return policy.vf_coef * value_loss, grads, value_loss


def _minibatch_step(policy, x, actions, old_logp, adv, returns):
    _, actor_grads, actor_loss, entropy = actor_loss_and_grads(
        policy, x, actions, old_logp, adv)
    if policy.discrete:
        adam_step(policy.actor.params(), actor_grads, policy.actor_adam)
    else:
        adam_step(policy.actor.params() + [policy.log_std], actor_grads,
                  policy.actor_adam)
    _, critic_grads, value_loss = critic_loss_and_grads(policy, x, returns)
    adam_step(policy.critic.params(), critic_grads, policy.critic_adam)
    return actor_loss, value_loss, entropy


def evaluate(policy, env, context, episodes):
    """Mean undiscounted return of ``episodes`` greedy rollouts; leaves
    policy parameters untouched."""
    if episodes < 1:
        raise ContractViolation("episodes must be >= 1")
    total = 0.0
    cvals = context.asarray()
    for _ in range(episodes):
        obs = env.reset(context)
        done = False
        ret = 0.0
        while not done:
            action = policy.act_greedy(obs, cvals)
            obs, reward, done, _ = env.step(action)
            ret += reward
        total += ret
    return total / episodes
