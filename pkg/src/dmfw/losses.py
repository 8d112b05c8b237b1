"""Time-indexed per-agent loss streams.

A stream holds ``f_i^t`` for agents ``i = 0..n-1`` and rounds ``t = 1..T``.
It exposes exact gradients, unbiased stochastic gradients (additive Gaussian
noise of total variance ``noise_sigma**2``), the global average ``F^t``, and
the smoothness / Lipschitz constants ``beta`` and ``g_lip``.

Subclasses implement one vectorized kernel, ``_value_grad(agents, t, X)``,
returning losses and gradients of agent ``agents[k]`` at point ``X[k]``.
"""

from __future__ import annotations

import csv

import numpy as np
from scipy.signal import lfilter

from ._validation import check_positive_int, check_positive_real, check_vector

__all__ = [
    "LossStream",
    "QuadraticStream",
    "SmoothL1RegressionStream",
    "SinQuadraticStream",
    "AveragedStream",
    "ReplicatedStream",
    "LOSS_KINDS",
    "make_stream",
    "huber",
    "huber_derivative",
]

G_SAFETY = 1.1
G_SAMPLES = 256


def huber(r):
    """``r**2 / 2`` for ``|r| <= 1``, ``|r| - 1/2`` otherwise."""
    a = np.abs(r)
    return np.where(a <= 1.0, 0.5 * r * r, a - 0.5)


def huber_derivative(r):
    return np.clip(r, -1.0, 1.0)


class LossStream:
    kind = None

    def __init__(self, n_agents, dim, horizon, noise_sigma=0.0, seed=0):
        self.n_agents = check_positive_int(n_agents, "n_agents")
        self.dim = check_positive_int(dim, "dim")
        self.horizon = check_positive_int(horizon, "horizon")
        self.noise_sigma = check_positive_real(noise_sigma, "noise_sigma", allow_zero=True)
        self.seed = int(seed)
        self.beta = None
        self.g_lip = None

    # -- kernel -------------------------------------------------------------
    def _value_grad(self, agents, t, X):
        raise NotImplementedError

    # -- checks -------------------------------------------------------------
    def _check_t(self, t):
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round t={t} outside 1..{self.horizon}")

    def _check_agent(self, agent):
        if not 0 <= agent < self.n_agents:
            raise IndexError(f"agent {agent} outside 0..{self.n_agents - 1}")

    # -- single-agent access ------------------------------------------------
    def evaluate(self, agent, t, x):
        self._check_agent(agent)
        self._check_t(t)
        x = check_vector(x, self.dim, "x")
        return float(self._value_grad(np.array([agent]), t, x[None])[0][0])

    def gradient(self, agent, t, x):
        self._check_agent(agent)
        self._check_t(t)
        x = check_vector(x, self.dim, "x")
        return self._value_grad(np.array([agent]), t, x[None])[1][0]

    def stochastic_gradient(self, agent, t, x, draw_seed):
        """Exact gradient plus zero-mean noise fixed by ``draw_seed``."""
        g = self.gradient(agent, t, x)
        return g + self.sample_noise(np.random.default_rng(draw_seed), ())

    def sample_noise(self, rng, shape):
        """Gaussian noise with per-coordinate variance ``sigma**2 / dim``."""
        shape = tuple(shape) + (self.dim,)
        if self.noise_sigma == 0.0:
            return np.zeros(shape)
        return (self.noise_sigma / np.sqrt(self.dim)) * rng.standard_normal(shape)

    # -- all-agent access ---------------------------------------------------
    def losses(self, t, X):
        """Loss of agent ``i`` at ``X[i]`` for every agent."""
        self._check_t(t)
        X = check_vector(X, self.dim, "X")
        return self._value_grad(np.arange(self.n_agents), t, X)[0]

    def gradients(self, t, X):
        """Gradient of agent ``i`` at ``X[i]`` for every agent."""
        self._check_t(t)
        X = check_vector(X, self.dim, "X")
        return self._value_grad(np.arange(self.n_agents), t, X)[1]

    def global_loss(self, t, x):
        self._check_t(t)
        x = check_vector(x, self.dim, "x")
        vals, _ = self._value_grad(np.arange(self.n_agents), t, np.broadcast_to(x, (self.n_agents, self.dim)))
        return float(np.mean(vals))

    def global_gradient(self, t, x):
        """``(1/n) sum_j grad f_j^t(x)``."""
        self._check_t(t)
        x = check_vector(x, self.dim, "x")
        _, grads = self._value_grad(np.arange(self.n_agents), t, np.broadcast_to(x, (self.n_agents, self.dim)))
        return grads.mean(axis=0)

    def global_value_grad(self, t, P):
        """Global loss and gradient at each row of ``P`` (shape ``(k, dim)``)."""
        self._check_t(t)
        P = check_vector(P, self.dim, "P")
        k = P.shape[0]
        agents = np.tile(np.arange(self.n_agents), k)
        pts = np.repeat(P, self.n_agents, axis=0)
        vals, grads = self._value_grad(agents, t, pts)
        return (vals.reshape(k, self.n_agents).mean(axis=1),
                grads.reshape(k, self.n_agents, self.dim).mean(axis=1))

    def _estimate_g_lip(self, constraint):
        """Max gradient norm over vertices and random members, with 10% slack."""
        if constraint is None:
            raise ValueError(f"{type(self).__name__} needs the constraint set to bound its gradients")
        rng = np.random.default_rng([self.seed, 7])
        pts = [constraint.sample(rng, G_SAMPLES)]
        try:
            verts = constraint.vertices()
        except ValueError:  # too many to enumerate
            verts = None
        if verts is not None:
            pts.append(verts)
        pts = np.concatenate(pts)
        best = 0.0
        agents = np.repeat(np.arange(self.n_agents), len(pts))
        X = np.tile(pts, (self.n_agents, 1))
        for t in range(1, self.horizon + 1):
            _, g = self._value_grad(agents, t, X)
            best = max(best, float(np.max(np.linalg.norm(g, axis=1))))
        return G_SAFETY * best if best > 0 else 1.0

    def describe(self):
        return {"kind": self.kind, "n_agents": self.n_agents, "dim": self.dim,
                "horizon": self.horizon, "noise_sigma": self.noise_sigma, "seed": self.seed}


def _drifting(rng, n, size, horizon, drift):
    start = rng.standard_normal((n, size))
    steps = drift * rng.standard_normal((horizon - 1, n, size))
    return np.concatenate([start[None], start[None] + np.cumsum(steps, axis=0)], axis=0)


class QuadraticStream(LossStream):
    """``f_i^t(x) = 0.5 ||A_i x - b_i^t||^2`` with slowly drifting ``b``.

    Each ``A_i`` is a seeded Gaussian matrix rescaled to spectral norm 1;
    ``b_i^{t+1} = b_i^t + drift * xi``.
    """

    kind = "quadratic"

    def __init__(self, n_agents, dim, horizon, constraint=None, noise_sigma=0.0, seed=0,
                 drift=0.01, offset_scale=1.0, matrices=None, offsets=None):
        super().__init__(n_agents, dim, horizon, noise_sigma, seed)
        rng = np.random.default_rng([self.seed, 1])
        if matrices is None:
            A = rng.standard_normal((self.n_agents, self.dim, self.dim))
            A /= np.linalg.norm(A, ord=2, axis=(1, 2))[:, None, None]
        else:
            A = np.broadcast_to(np.asarray(matrices, dtype=float), (self.n_agents, self.dim, self.dim)).copy()
        if offsets is None:
            b = offset_scale * _drifting(rng, self.n_agents, self.dim, self.horizon, drift)
        else:
            b = np.broadcast_to(np.asarray(offsets, dtype=float), (self.horizon, self.n_agents, self.dim)).copy()
        self.A = A
        self.b = b
        self.drift = drift
        self.beta = float(np.max(np.linalg.norm(np.einsum("kmi,kmj->kij", A, A), ord=2, axis=(1, 2))))
        self.g_lip = self._estimate_g_lip(constraint)

    def _value_grad(self, agents, t, X):
        A = self.A[agents]
        r = np.einsum("kmd,kd->km", A, X) - self.b[t - 1, agents]
        return 0.5 * np.sum(r * r, axis=1), np.einsum("kmd,km->kd", A, r)


class SinQuadraticStream(LossStream):
    """Non-convex ``0.5 x'Q_i x + <a_i^t, x> + c sum_k sin(omega x_k)``.

    ``Q_i`` is symmetric (indefinite) with spectral norm ``q_scale``; the
    linear term drifts like the quadratic stream's offsets.
    """

    kind = "sin_quadratic"

    def __init__(self, n_agents, dim, horizon, constraint=None, noise_sigma=0.0, seed=0,
                 drift=0.01, c=1.0, omega=2.0, q_scale=1.0, a_scale=1.0):
        super().__init__(n_agents, dim, horizon, noise_sigma, seed)
        rng = np.random.default_rng([self.seed, 2])
        B = rng.standard_normal((self.n_agents, self.dim, self.dim))
        Q = 0.5 * (B + np.transpose(B, (0, 2, 1)))
        Q *= q_scale / np.linalg.norm(Q, ord=2, axis=(1, 2))[:, None, None]
        self.Q = Q
        self.a = a_scale * _drifting(rng, self.n_agents, self.dim, self.horizon, drift)
        self.c = float(c)
        self.omega = float(omega)
        self.beta = float(np.max(np.linalg.norm(Q, ord=2, axis=(1, 2)))) + abs(self.c) * self.omega ** 2
        self.g_lip = self._estimate_g_lip(constraint)

    def _value_grad(self, agents, t, X):
        Q = self.Q[agents]
        a = self.a[t - 1, agents]
        Qx = np.einsum("kij,kj->ki", Q, X)
        val = 0.5 * np.sum(X * Qx, axis=1) + np.sum(a * X, axis=1) + self.c * np.sum(np.sin(self.omega * X), axis=1)
        grad = Qx + a + self.c * self.omega * np.cos(self.omega * X)
        return val, grad


class SmoothL1RegressionStream(LossStream):
    """Linear one-step-ahead forecaster on synthetic autoregressive series.

    Each agent owns a series ``mu_i + common + 0.5 * own`` where ``common``
    and ``own`` are AR(1) processes. Round ``t`` reveals a batch of
    ``batch_size`` stride-1 rolling windows of length ``lookback``; the loss is
    the batch mean of the Huber-form smooth L1 loss of ``<x, window> - next``.
    """

    kind = "smooth_l1_regression"

    def __init__(self, n_agents, horizon, lookback=13, batch_size=32, noise_sigma=0.0, seed=0,
                 ar_coef=0.9, innovation=0.05, constraint=None, dim=None):
        if dim is not None and dim != lookback:
            raise ValueError(f"smooth_l1_regression has dim = lookback = {lookback}, got dim={dim}")
        super().__init__(n_agents, lookback, horizon, noise_sigma, seed)
        self.lookback = lookback
        self.batch_size = check_positive_int(batch_size, "batch_size")
        rng = np.random.default_rng([self.seed, 3])
        length = self.horizon * self.batch_size + lookback
        burn = 200

        def ar1(size):
            eps = innovation * rng.standard_normal((size, length + burn))
            return lfilter([1.0], [1.0, -ar_coef], eps, axis=1)[:, burn:]

        mu = rng.uniform(0.3, 0.7, size=(self.n_agents, 1))
        self.series = mu + ar1(1) + 0.5 * ar1(self.n_agents)
        windows = np.lib.stride_tricks.sliding_window_view(self.series, lookback + 1, axis=1)
        windows = windows[:, : self.horizon * self.batch_size]
        windows = windows.reshape(self.n_agents, self.horizon, self.batch_size, lookback + 1)
        self.features = np.ascontiguousarray(windows[..., :lookback])
        self.targets = np.ascontiguousarray(windows[..., lookback])
        gram = np.einsum("ntbi,ntbj->ntij", self.features, self.features) / self.batch_size
        self.beta = float(np.max(np.linalg.eigvalsh(gram)))
        # |huber'| <= 1, so the gradient norm is at most the mean window norm.
        self.g_lip = float(np.max(np.linalg.norm(self.features, axis=-1).mean(axis=-1)))

    def _value_grad(self, agents, t, X):
        phi = self.features[agents, t - 1]
        r = np.einsum("kbd,kd->kb", phi, X) - self.targets[agents, t - 1]
        val = huber(r).mean(axis=1)
        grad = np.einsum("kb,kbd->kd", huber_derivative(r), phi) / self.batch_size
        return val, grad

    def export_series(self, path):
        """Write the raw per-agent series as CSV (``step, agent_0, ...``)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step"] + [f"agent_{i}" for i in range(self.n_agents)])
            for k in range(self.series.shape[1]):
                writer.writerow([k] + [format(v, ".17g") for v in self.series[:, k]])


class AveragedStream(LossStream):
    """Single-agent view of ``F^t = (1/n) sum_i f_i^t`` of another stream."""

    def __init__(self, base):
        super().__init__(1, base.dim, base.horizon, base.noise_sigma, base.seed)
        self.base = base
        self.kind = base.kind
        self.beta = base.beta
        self.g_lip = base.g_lip

    def _value_grad(self, agents, t, X):
        vals, grads = self.base.global_value_grad(t, X)
        return vals, grads


class ReplicatedStream(LossStream):
    """Every agent sees agent ``source``'s loss of ``base``."""

    def __init__(self, base, n_agents=None, source=0):
        n_agents = base.n_agents if n_agents is None else n_agents
        super().__init__(n_agents, base.dim, base.horizon, base.noise_sigma, base.seed)
        self.base = base
        self.source = source
        self.kind = base.kind
        self.beta = base.beta
        self.g_lip = base.g_lip

    def _value_grad(self, agents, t, X):
        return self.base._value_grad(np.full(len(agents), self.source), t, X)


LOSS_KINDS = {
    "quadratic": QuadraticStream,
    "smooth_l1_regression": SmoothL1RegressionStream,
    "sin_quadratic": SinQuadraticStream,
}


def make_stream(kind, n_agents, dim, horizon, constraint=None, identical_agents=False, **params):
    try:
        cls = LOSS_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {sorted(LOSS_KINDS)}") from None
    if cls is SmoothL1RegressionStream:
        stream = cls(n_agents, horizon, constraint=constraint, dim=dim, **params)
    else:
        stream = cls(n_agents, dim, horizon, constraint=constraint, **params)
    if identical_agents:
        stream = ReplicatedStream(stream)
    return stream
