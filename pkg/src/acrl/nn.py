"""Minimal neural substrate: MLPs with manual reverse-mode gradients,
diagonal Gaussians, Adam, and a finite-difference gradient checker.

Everything is plain numpy. Networks cache their last forward pass so that
``backward`` can replay it in reverse; there is no general autodiff graph,
only the fixed MLP / Gaussian-head family used by the rest of the system.
"""

from __future__ import annotations

import numpy as np

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 4.0

DTYPE = np.float64


class NumericFault(RuntimeError):
    """Raised when a gradient or update contains non-finite values."""


class ContractViolation(ValueError):
    """Raised when an operation is called outside its preconditions."""


def _orthogonal(shape, gain, rng):
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return np.ascontiguousarray(gain * q[: shape[0], : shape[1]], dtype=DTYPE)


def _fan_in_uniform(shape, rng):
    bound = 1.0 / np.sqrt(shape[1])
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Mlp:
    """Fully connected network; hidden layers share one activation, the
    output layer is affine.

    Parameters are ``weights[i]`` of shape (out, in) and ``biases[i]`` of
    shape (out,). ``forward`` accepts a single vector or a (batch, dim)
    matrix and records the pass for ``backward``.
    """

    def __init__(self, layer_dims, activation="tanh", init="fan_in", rng=None,
                 out_gain=1.0):
        if len(layer_dims) < 2 or any(d <= 0 for d in layer_dims):
            raise ContractViolation(f"bad layer dims {layer_dims}")
        if activation not in ("tanh", "relu"):
            raise ContractViolation(f"unknown activation {activation!r}")
        self.layer_dims = list(layer_dims)
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        self.weights = []
        self.biases = []
        n = len(layer_dims) - 1
        for i in range(n):
            shape = (layer_dims[i + 1], layer_dims[i])
            if init == "orthogonal":
                gain = out_gain if i == n - 1 else np.sqrt(2.0)
                w = _orthogonal(shape, gain, rng)
            else:
                w = _fan_in_uniform(shape, rng)
            self.weights.append(w)
            self.biases.append(np.zeros(layer_dims[i + 1], dtype=DTYPE))
        self._cache = None

    @property
    def in_dim(self):
        return self.layer_dims[0]

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    def params(self):
        """Flat list of parameter arrays (weights interleaved with biases)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_params(self, arrays):
        flat = self.params()
        if len(arrays) != len(flat):
            raise ContractViolation("parameter count mismatch")
        k = 0
        for i in range(len(self.weights)):
            self.weights[i] = np.asarray(arrays[k], dtype=DTYPE).reshape(
                self.weights[i].shape)
            self.biases[i] = np.asarray(arrays[k + 1], dtype=DTYPE).reshape(
                self.biases[i].shape)
            k += 2

    def _act(self, x):
        if self.activation == "tanh":
            return np.tanh(x)
        return np.maximum(x, 0.0)

    def forward(self, x):
        x = np.asarray(x, dtype=DTYPE)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ContractViolation(
                f"input dim {x.shape[1]} != first layer dim {self.in_dim}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = self._act(h)
            acts.append(h)
        self._cache = acts
        return h[0] if squeeze else h

    def backward(self, upstream):
        """Gradients of a scalar loss whose gradient w.r.t. the network
        output is ``upstream``. Returns (param_grads, input_grad) with
        param_grads ordered like :meth:`params`.
        """
        if self._cache is None:
            raise ContractViolation("backward without a recorded forward pass")
        acts = self._cache
        g = np.asarray(upstream, dtype=DTYPE)
        squeeze = g.ndim == 1
        if squeeze:
            g = g[None, :]
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.weights)
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            if i < last:
                post = acts[i + 1]
                if self.activation == "tanh":
                    g = g * (1.0 - post * post)
                else:
                    g = g * (post > 0)
            w_grads[i] = g.T @ acts[i]
            b_grads[i] = g.sum(axis=0)
            g = g @ self.weights[i]
        grads = []
        for wg, bg in zip(w_grads, b_grads):
            grads.append(wg)
            grads.append(bg)
        return grads, (g[0] if squeeze else g)


class DiagGaussian:
    """Diagonal Gaussian posterior, parameterized by mean and log-variance."""

    __slots__ = ("mean", "log_var")

    def __init__(self, mean, log_var):
        mean = np.asarray(mean, dtype=DTYPE)
        log_var = np.asarray(log_var, dtype=DTYPE)
        if mean.shape != log_var.shape:
            raise ContractViolation("mean/log_var shape mismatch")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_var))):
            raise ContractViolation("non-finite Gaussian parameters")
        self.mean = mean
        self.log_var = log_var

    @property
    def var(self):
        return np.exp(self.log_var)

    def __repr__(self):
        return f"DiagGaussian(mean={self.mean}, log_var={self.log_var})"


def clamp_log_var(log_var):
    """Clamp log-variances into [LOG_VAR_MIN, LOG_VAR_MAX]; also returns the
    pass-through gradient mask."""
    clamped = np.clip(log_var, LOG_VAR_MIN, LOG_VAR_MAX)
    mask = (log_var > LOG_VAR_MIN) & (log_var < LOG_VAR_MAX)
    return clamped, mask


def reparam_sample(g, rng=None, eps=None):
    """Sample ``mean + exp(0.5 log_var) * eps`` with standard-normal eps.

    Passing ``eps`` explicitly makes the draw deterministic (used by both
    tests and the ELBO backward pass, which needs the same eps)."""
    if eps is None:
        eps = rng.standard_normal(g.mean.shape)
    return g.mean + np.exp(0.5 * g.log_var) * eps


def kl_to_standard_normal(g):
    """KL(N(mean, var) || N(0, I)) in closed form; non-negative."""
    return 0.5 * float(
        np.sum(np.exp(g.log_var) + g.mean ** 2 - 1.0 - g.log_var))


class AdamState:
    """Adam accumulators for one list of parameter arrays."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.first_moment = [np.zeros_like(p) for p in params]
        self.second_moment = [np.zeros_like(p) for p in params]
        self.step_count = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(params, grads, state):
    """One Adam update with bias correction. Mutates ``params`` arrays in
    place and returns them. Rejects non-finite gradients before touching
    any state."""
    if len(params) != len(grads):
        raise ContractViolation("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ContractViolation("params/grads shape mismatch")
        if not np.all(np.isfinite(g)):
            raise NumericFault("non-finite gradient component")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def finite_diff_check(loss_and_grad_fn, params, eps):
    """Compare analytic gradients with central finite differences.

    ``loss_and_grad_fn(params) -> (loss, grads)`` must be deterministic.
    Returns the worst relative error over every parameter component. The
    denominator is floored at 1e-5 so that components whose gradient sits
    at the central-difference roundoff floor (~|loss| * machine eps / step)
    do not register as disagreement.
    """
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    _, grads = loss_and_grad_fn(params)
    worst = 0.0
    for i, p in enumerate(params):
        gflat = np.ravel(grads[i])
        for j in range(p.size):
            orig = p.flat[j]
            p.flat[j] = orig + eps
            lp, _ = loss_and_grad_fn(params)
            p.flat[j] = orig - eps
            lm, _ = loss_and_grad_fn(params)
            p.flat[j] = orig
            num = (lp - lm) / (2.0 * eps)
            ana = gflat[j]
            denom = max(abs(num), abs(ana), 1e-5)
            worst = max(worst, abs(num - ana) / denom)
    return worst
