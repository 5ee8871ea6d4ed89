"""VAE task representation learning: a per-transition encoder, a
permutation-invariant product-of-Gaussians trajectory aggregation, reward
and next-state decoders trained with an ELBO, and an auxiliary task
decoder mapping latents back to contexts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs.base import Context, episodic_return
from .nn import (AdamState, ContractViolation, DiagGaussian, Mlp,
                 NumericFault, adam_step, clamp_log_var, kl_to_standard_normal,
                 reparam_sample)

STATE_EMBED = 64
ACTION_EMBED = 8
REWARD_EMBED = 8


@dataclass
class TaskEmbedding:
    """Trajectory-level latent posterior plus provenance."""

    posterior: DiagGaussian
    source_context: Context
    source_return: float

    @property
    def mean(self):
        return self.posterior.mean


class TransitionEncoder:
    """Encodes a single transition (s, a, r, s') to a diagonal-Gaussian
    posterior over the latent space.

    The three embedders are linear + relu; the trunk is an MLP(128, 128)
    emitting concatenated (mean, log_var). The state embedder is shared
    between s and s'.
    """

    def __init__(self, obs_dim, action_repr_dim, latent_dim, rng, *,
                 embed_dims=(STATE_EMBED, ACTION_EMBED, REWARD_EMBED),
                 hidden=128):
        self.obs_dim = obs_dim
        self.action_repr_dim = action_repr_dim
        self.latent_dim = latent_dim
        state_dim, action_dim, reward_dim = embed_dims
        self.embed_dims = (state_dim, action_dim, reward_dim)
        self.state_embed = Mlp([obs_dim, state_dim], activation="relu",
                               init="fan_in", rng=rng)
        self.action_embed = Mlp([action_repr_dim, action_dim],
                                activation="relu", init="fan_in", rng=rng)
        self.reward_embed = Mlp([1, reward_dim], activation="relu",
                                init="fan_in", rng=rng)
        self.trunk = Mlp([state_dim + action_dim + reward_dim
                          + state_dim, hidden, hidden, 2 * latent_dim],
                         activation="relu", init="fan_in", rng=rng)

    def params(self):
        return (self.state_embed.params() + self.action_embed.params()
                + self.reward_embed.params() + self.trunk.params())

    def set_params(self, arrays):
        n_se = len(self.state_embed.params())
        n_ae = len(self.action_embed.params())
        n_re = len(self.reward_embed.params())
        k = 0
        self.state_embed.set_params(arrays[k:k + n_se]); k += n_se
        self.action_embed.set_params(arrays[k:k + n_ae]); k += n_ae
        self.reward_embed.set_params(arrays[k:k + n_re]); k += n_re
        self.trunk.set_params(arrays[k:])

    def _embed_linear(self, mlp, x):
        w, b = mlp.weights[0], mlp.biases[0]
        pre = x @ w.T + b
        return np.maximum(pre, 0.0), pre > 0

    def encode_batch(self, states, actions, rewards, next_states):
        """Batched forward; returns (mean, log_var, cache) with log_var
        already clamped. Arrays are (batch, dim)."""
        s = np.asarray(states, dtype=np.float64)
        a = np.asarray(actions, dtype=np.float64)
        r = np.asarray(rewards, dtype=np.float64).reshape(-1, 1)
        sp = np.asarray(next_states, dtype=np.float64)
        if s.shape[1] != self.obs_dim or a.shape[1] != self.action_repr_dim:
            raise ContractViolation("transition shape mismatch")
        es, ms = self._embed_linear(self.state_embed, s)
        ea, ma = self._embed_linear(self.action_embed, a)
        er, mr = self._embed_linear(self.reward_embed, r)
        esp, msp = self._embed_linear(self.state_embed, sp)
        h = np.concatenate([es, ea, er, esp], axis=1)
        out = self.trunk.forward(h)
        mean = out[:, :self.latent_dim]
        log_var, clamp_mask = clamp_log_var(out[:, self.latent_dim:])
        cache = (s, a, r, sp, ms, ma, mr, msp, clamp_mask)
        return mean, log_var, cache

    def backward(self, cache, d_mean, d_log_var):
        """Gradients of a scalar loss w.r.t. every encoder parameter, given
        upstream gradients on (mean, clamped log_var)."""
        s, a, r, sp, ms, ma, mr, msp, clamp_mask = cache
        d_out = np.concatenate([d_mean, d_log_var * clamp_mask], axis=1)
        trunk_grads, dh = self.trunk.backward(d_out)
        i0 = self.embed_dims[0]
        i1 = i0 + self.embed_dims[1]
        i2 = i1 + self.embed_dims[2]
        des = dh[:, :i0] * ms
        dea = dh[:, i0:i1] * ma
        der = dh[:, i1:i2] * mr
        desp = dh[:, i2:] * msp
        se_grads = [des.T @ s + desp.T @ sp, des.sum(0) + desp.sum(0)]
        ae_grads = [dea.T @ a, dea.sum(0)]
        re_grads = [der.T @ r, der.sum(0)]
        return se_grads + ae_grads + re_grads + trunk_grads

    def encode_transition(self, state, action_repr, reward, next_state):
        """Posterior for one transition."""
        mean, log_var, _ = self.encode_batch(
            np.atleast_2d(state), np.atleast_2d(action_repr),
            np.atleast_1d(reward), np.atleast_2d(next_state))
        return DiagGaussian(mean[0], log_var[0])


class VaeDecoders:
    """Reward, next-state, and auxiliary context (task) decoders, all fed
    by z alone."""

    def __init__(self, latent_dim, obs_dim, context_dim, rng, *,
                 hidden=128, reward_hidden=64):
        self.reward_decoder = Mlp([latent_dim, reward_hidden, reward_hidden,
                                   1], activation="relu", init="fan_in",
                                  rng=rng)
        self.transition_decoder = Mlp([latent_dim, hidden, hidden, obs_dim],
                                      activation="relu", init="fan_in",
                                      rng=rng)
        self.task_decoder = Mlp([latent_dim, hidden, hidden, context_dim],
                                activation="relu", init="fan_in", rng=rng)

    def elbo_params(self):
        return self.reward_decoder.params() + self.transition_decoder.params()

    def set_elbo_params(self, arrays):
        n = len(self.reward_decoder.params())
        self.reward_decoder.set_params(arrays[:n])
        self.transition_decoder.set_params(arrays[n:])


def aggregate_trajectory(posteriors):
    """Normalized product of diagonal Gaussians: precisions add, the mean
    is the precision-weighted average. Order-independent."""
    if not posteriors:
        raise ContractViolation("empty posterior list")
    dim = posteriors[0].mean.shape
    precision = np.zeros(dim)
    weighted = np.zeros(dim)
    for g in posteriors:
        if g.mean.shape != dim:
            raise ContractViolation("posterior dimension mismatch")
        prec = np.exp(-g.log_var)
        precision += prec
        weighted += prec * g.mean
    var = 1.0 / precision
    return DiagGaussian(var * weighted, np.log(var))


def latent_distance(a, b):
    """Euclidean distance between posterior means of two task embeddings."""
    ma = a.mean if isinstance(a, TaskEmbedding) else np.asarray(a)
    mb = b.mean if isinstance(b, TaskEmbedding) else np.asarray(b)
    if ma.shape != mb.shape:
        raise ContractViolation("latent dimension mismatch")
    return float(np.linalg.norm(ma - mb))


def decode_context(decoders, z, env):
    """Map a latent vector through the task decoder into a (clamped, and
    for grid families discretized) context. Returns (context, feasible)."""
    raw = decoders.task_decoder.forward(np.asarray(z, dtype=np.float64))
    context = env.postprocess_context(raw)
    return context, env.is_feasible(context)


def elbo_forward_backward(encoder, decoders, states, actions, rewards,
                          next_states, kl_weight, eps):
    """Loss, components, and exact gradients of the ELBO objective
    (summed over the batch, one reparameterized latent sample each).

    ``eps`` is the standard-normal noise used by the reparameterized
    sample; passing it explicitly keeps the function deterministic so it
    can be finite-difference checked.
    """
    mean, log_var, cache = encoder.encode_batch(states, actions, rewards,
                                                next_states)
    std = np.exp(0.5 * log_var)
    z = mean + std * eps
    r = np.asarray(rewards, dtype=np.float64).reshape(-1, 1)
    sp = np.asarray(next_states, dtype=np.float64)

    r_hat = decoders.reward_decoder.forward(z)
    sp_hat = decoders.transition_decoder.forward(z)
    loss_r = float(np.sum((r_hat - r) ** 2))
    loss_s = float(np.sum((sp_hat - sp) ** 2))
    kl = 0.5 * np.sum(np.exp(log_var) + mean ** 2 - 1.0 - log_var)
    loss = loss_r + loss_s + kl_weight * float(kl)

    rdec_grads, dz_r = decoders.reward_decoder.backward(2.0 * (r_hat - r))
    tdec_grads, dz_t = decoders.transition_decoder.backward(2.0 * (sp_hat - sp))
    dz = dz_r + dz_t
    d_mean = dz + kl_weight * mean
    d_log_var = dz * eps * 0.5 * std + kl_weight * 0.5 * (np.exp(log_var) - 1.0)
    enc_grads = encoder.backward(cache, d_mean, d_log_var)
    components = {"reconstruction_reward": loss_r,
                  "reconstruction_state": loss_s, "kl": float(kl)}
    return loss, components, enc_grads, rdec_grads + tdec_grads


def elbo_loss(encoder, decoders, states, actions, rewards, next_states,
              kl_weight, rng=None, eps=None):
    """Scalar ELBO training loss plus its components."""
    n = np.asarray(states).shape[0]
    if n == 0:
        raise ContractViolation("empty transition batch")
    if eps is None:
        eps = rng.standard_normal((n, encoder.latent_dim))
    loss, components, _, _ = elbo_forward_backward(
        encoder, decoders, states, actions, rewards, next_states, kl_weight,
        eps)
    return loss, components


class RepresentationLearner:
    """Owns the encoder/decoders and their optimizer state, and implements
    the gated representation-training pass over the VAE buffer."""

    def __init__(self, env, latent_dim, rng, *, lr=0.005, batch_size=32,
                 kl_weight=0.1):
        self.env = env
        self.latent_dim = latent_dim
        self.batch_size = batch_size
        self.kl_weight = kl_weight
        self.discrete = hasattr(env, "n_actions")
        action_repr_dim = env.n_actions if self.discrete else env.action_dim
        self.encoder = TransitionEncoder(env.observation_dim, action_repr_dim,
                                         latent_dim, rng)
        self.decoders = VaeDecoders(latent_dim, env.observation_dim,
                                    env.context_dim, rng)
        self.enc_adam = AdamState(self.encoder.params(), lr=lr)
        self.dec_adam = AdamState(self.decoders.elbo_params(), lr=lr)
        self.task_dec_adam = AdamState(self.decoders.task_decoder.params(),
                                       lr=lr)

    def action_repr(self, action):
        if self.discrete:
            onehot = np.zeros(self.encoder.action_repr_dim)
            onehot[int(action)] = 1.0
            return onehot
        return np.asarray(action, dtype=np.float64)

    def _trajectory_arrays(self, trajectory):
        s = np.array([t.state for t in trajectory.transitions])
        a = np.array([self.action_repr(t.action)
                      for t in trajectory.transitions])
        r = np.array([t.reward for t in trajectory.transitions])
        sp = np.array([t.next_state for t in trajectory.transitions])
        return s, a, r, sp

    def embed_task(self, trajectory):
        """Encode every transition of a trajectory and aggregate by the
        Gaussian product; permutation-invariant."""
        if len(trajectory) == 0:
            raise ContractViolation("cannot embed an empty trajectory")
        s, a, r, sp = self._trajectory_arrays(trajectory)
        mean, log_var, _ = self.encoder.encode_batch(s, a, r, sp)
        posts = [DiagGaussian(mean[i], log_var[i]) for i in range(len(mean))]
        return TaskEmbedding(aggregate_trajectory(posts), trajectory.context,
                             episodic_return(trajectory))

    def train_representation(self, vae_buffer, delta, rng):
        """One epoch of minibatch ELBO updates over the transitions of
        return-filtered trajectories, then a task-decoder pass. No-op when
        nothing passes the filter."""
        filtered = [(c, traj) for c, traj in vae_buffer.entries
                    if episodic_return(traj) >= delta]
        if not filtered:
            return {"status": "skipped", "n_trajectories": 0}
        states, acts, rews, nexts = [], [], [], []
        for _, traj in filtered:
            s, a, r, sp = self._trajectory_arrays(traj)
            states.append(s); acts.append(a); rews.append(r); nexts.append(sp)
        states = np.concatenate(states)
        acts = np.concatenate(acts)
        rews = np.concatenate(rews)
        nexts = np.concatenate(nexts)
        n = len(states)
        order = rng.permutation(n)
        losses = []
        comps_acc = {"reconstruction_reward": 0.0,
                     "reconstruction_state": 0.0, "kl": 0.0}
        for start in range(0, n, self.batch_size):
            idx = order[start:start + self.batch_size]
            eps = rng.standard_normal((len(idx), self.latent_dim))
            try:
                loss, comps, enc_grads, dec_grads = elbo_forward_backward(
                    self.encoder, self.decoders, states[idx], acts[idx],
                    rews[idx], nexts[idx], self.kl_weight, eps)
                adam_step(self.encoder.params(), enc_grads, self.enc_adam)
                adam_step(self.decoders.elbo_params(), dec_grads,
                          self.dec_adam)
            except NumericFault:
                continue  # skip the offending minibatch
            losses.append(loss / len(idx))
            for k in comps_acc:
                comps_acc[k] += comps[k]
        pairs = [(self.embed_task(traj), c) for c, traj in filtered]
        task_loss = self.train_task_decoder(pairs, rng)
        return {"status": "trained", "n_trajectories": len(filtered),
                "n_transitions": n,
                "vae_loss": float(np.mean(losses)) if losses else float("nan"),
                "task_decoder_loss": task_loss, **comps_acc}

    def train_task_decoder(self, pairs, rng):
        """Minimize squared context reconstruction error from posterior
        means. The latents are treated as constants: encoder parameters are
        never touched."""
        if not pairs:
            raise ContractViolation("empty embedding/context pair set")
        z = np.array([emb.mean for emb, _ in pairs])
        c = np.array([ctx.asarray() for _, ctx in pairs])
        n = len(z)
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, self.batch_size):
            idx = order[start:start + self.batch_size]
            c_hat = self.decoders.task_decoder.forward(z[idx])
            diff = c_hat - c[idx]
            losses.append(float(np.sum(diff ** 2)) / len(idx))
            grads, _ = self.decoders.task_decoder.backward(2.0 * diff)
            try:
                adam_step(self.decoders.task_decoder.params(), grads,
                          self.task_dec_adam)
            except NumericFault:
                continue
        return float(np.mean(losses))

    def all_params(self):
        return (self.encoder.params() + self.decoders.elbo_params()
                + self.decoders.task_decoder.params())
