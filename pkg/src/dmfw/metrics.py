"""Omniscient measurement layer.

Agents never see the global gradient; the metrics do. Per round we record the
Frank-Wolfe gap and loss of every agent's played point under ``F^t``, the
per-iteration consensus error ``delta_p``, tracking error ``delta_d`` and, in
stochastic mode with a shadow run, the variance-reduction error ``vr_error``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "fw_gap",
    "MetricsRecord",
    "MetricsSeries",
    "DiagnosticConstants",
    "record_round",
    "approximation_ratio",
    "rate_fit",
    "fit_inverse_constant",
    "diagnostic_constants",
    "format_real",
]

FIT_ELL_LO = 5


def format_real(x):
    """17 significant digits, locale independent."""
    return format(float(x), ".17g")


def fw_gap(grad, x, constraint):
    """``max_{o in K} <grad, x - o>``, evaluated with one LMO call."""
    grad = np.asarray(grad, dtype=float)
    x = np.asarray(x, dtype=float)
    o = constraint.lmo(grad)
    return np.sum(grad * x, axis=-1) - np.sum(grad * o, axis=-1)


@dataclass
class MetricsRecord:
    t: int
    per_agent_loss: np.ndarray
    per_agent_gap: np.ndarray
    mean_loss_running: float
    mean_gap_running: float
    delta_p: np.ndarray | None = None
    delta_d: np.ndarray | None = None
    vr_error: np.ndarray | None = None
    oracle_regret_snapshot: float = float("nan")
    averaging_residual: float = 0.0
    tracking_residual: float = 0.0

    @property
    def mean_loss(self):
        return float(np.mean(self.per_agent_loss))

    @property
    def mean_gap(self):
        return float(np.mean(self.per_agent_gap))

    @property
    def max_gap_agents(self):
        return float(np.max(self.per_agent_gap))


@dataclass
class MetricsSeries:
    """Ordered per-round records of one run."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def append(self, record):
        self.records.append(record)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def t(self):
        return np.array([r.t for r in self.records])

    def running_gap(self):
        return self.column("mean_gap_running")

    def running_loss(self):
        return self.column("mean_loss_running")

    def per_ell(self, name, reduce="max"):
        """Reduce a per-iteration diagnostic over rounds (``max`` or ``mean``)."""
        rows = [getattr(r, name) for r in self.records if getattr(r, name) is not None]
        if not rows:
            return None
        stack = np.stack(rows)
        return stack.max(axis=0) if reduce == "max" else stack.mean(axis=0)

    METRIC_COLUMNS = ("t", "mean_loss", "mean_loss_running", "mean_gap", "mean_gap_running",
                      "max_gap_agents", "oracle_regret", "averaging_residual", "tracking_residual")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.METRIC_COLUMNS)
            for r in self.records:
                w.writerow([r.t] + [format_real(v) for v in (
                    r.mean_loss, r.mean_loss_running, r.mean_gap, r.mean_gap_running,
                    r.max_gap_agents, r.oracle_regret_snapshot, r.averaging_residual,
                    r.tracking_residual)])

    def write_diagnostics_csv(self, path):
        """Per-iteration block: max over rounds of delta_p/delta_d, mean vr_error."""
        dp = self.per_ell("delta_p", "max")
        dd = self.per_ell("delta_d", "max")
        vr = self.per_ell("vr_error", "mean")
        L = next((len(a) for a in (dp, dd, vr) if a is not None), 0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ell", "delta_p", "delta_d", "vr_error"])
            for ell in range(L):
                w.writerow([ell + 1] + [
                    "" if a is None else format_real(a[ell]) for a in (dp, dd, vr)])


def record_round(state, stream, constraint, previous=None, oracles=None, diagnostics=True):
    """Assemble the :class:`MetricsRecord` of a completed round.

    ``previous`` is the series so far, used for the running means.
    """
    t = state.t
    losses, grads = stream.global_value_grad(t, state.decisions)
    gaps = fw_gap(grads, state.decisions, constraint)
    prior = [] if previous is None else list(previous)
    loss_run = math.fsum([r.mean_loss for r in prior] + [float(np.mean(losses))]) / (len(prior) + 1)
    gap_run = math.fsum([r.mean_gap for r in prior] + [float(np.mean(gaps))]) / (len(prior) + 1)

    delta_p = delta_d = vr = None
    if diagnostics:
        n, L, dim = state.y.shape
        xbar = state.x[:, :L].mean(axis=0)
        delta_p = np.max(np.linalg.norm(state.y - xbar[None], axis=-1), axis=0)
        agents = np.repeat(np.arange(n), L)
        _, gy = stream._value_grad(agents, t, state.y.reshape(n * L, dim))
        target = gy.reshape(n, L, dim).mean(axis=0)
        d_ref = state.d if state.d_exact is None else state.d_exact
        delta_d = np.max(np.linalg.norm(d_ref - target[None], axis=-1), axis=0)
    if state.a_tilde is not None and state.d_exact is not None:
        diff = state.a_tilde[:, 1:] - state.d_exact
        vr = np.mean(np.sum(diff * diff, axis=-1), axis=0)

    regret = float("nan")
    if oracles is not None and oracles.step_count:
        regret = float(np.mean(oracles.average_regret()))

    return MetricsRecord(
        t=t, per_agent_loss=losses, per_agent_gap=gaps,
        mean_loss_running=loss_run, mean_gap_running=gap_run,
        delta_p=delta_p, delta_d=delta_d, vr_error=vr,
        oracle_regret_snapshot=regret,
        averaging_residual=state.averaging_residual, tracking_residual=state.tracking_residual,
    )


def approximation_ratio(decentralized, baseline):
    """Elementwise ratio of running mean losses; NaN where the baseline is <= 0."""
    dec = decentralized.running_loss() if isinstance(decentralized, MetricsSeries) else np.asarray(decentralized, float)
    base = baseline.running_loss() if isinstance(baseline, MetricsSeries) else np.asarray(baseline, float)
    if dec.shape != base.shape:
        raise ValueError(f"series lengths differ: {dec.shape} vs {base.shape}")
    out = np.full(dec.shape, np.nan)
    ok = base > 0
    out[ok] = dec[ok] / base[ok]
    return out


def rate_fit(index, values):
    """Least-squares slope of ``log(value)`` against ``log(index)``."""
    index = np.asarray(index, dtype=float)
    values = np.asarray(values, dtype=float)
    if index.shape != values.shape or index.size < 5:
        raise ValueError("rate_fit needs at least 5 paired points")
    if np.any(values <= 0) or np.any(index <= 0):
        raise ValueError("rate_fit needs positive indices and values")
    slope, _ = np.polyfit(np.log(index), np.log(values), 1)
    return float(slope)


def fit_inverse_constant(values, ell_lo=FIT_ELL_LO):
    """Least-squares ``C`` in ``values[l-1] ~ C / l`` over ``l >= ell_lo``."""
    values = np.asarray(values, dtype=float)
    ell = np.arange(1, values.size + 1, dtype=float)
    keep = ell >= ell_lo
    if not np.any(keep):
        keep = np.ones_like(ell, dtype=bool)
    basis = 1.0 / ell[keep]
    return float(np.dot(basis, values[keep]) / np.dot(basis, basis))


@dataclass
class DiagnosticConstants:
    D: float
    beta: float
    G: float
    lambda2: float
    cp_fit: float
    cd_fit: float
    sigma: float
    A: float
    B: float
    q_bound: float

    def as_dict(self):
        return dict(self.__dict__)


def diagnostic_constants(series, constraint, stream, gossip, schedule):
    """Fit ``C_p``, ``C_d`` from the run and evaluate ``B`` and ``Q``.

    ``B = 4 C_d + 2 beta (2 C_p + A D)`` and
    ``Q = 48 (beta_tilde^2 + beta^2)(2 C_p + A D)^2 + 4 sigma^2 + 2 B^2`` with
    ``beta_tilde = beta`` for additive noise.
    """
    D = constraint.diameter()
    beta = float(stream.beta)
    dp = series.per_ell("delta_p", "max")
    dd = series.per_ell("delta_d", "max")
    cp = fit_inverse_constant(dp) if dp is not None else float("nan")
    cd = fit_inverse_constant(dd) if dd is not None else float("nan")
    A = schedule.A
    sigma = stream.noise_sigma
    inner = 2.0 * cp + A * D
    B = 4.0 * cd + 2.0 * beta * inner
    Q = 48.0 * (2.0 * beta ** 2) * inner ** 2 + 4.0 * sigma ** 2 + 2.0 * B ** 2
    return DiagnosticConstants(D=D, beta=beta, G=float(stream.g_lip), lambda2=gossip.lambda2(),
                               cp_fit=cp, cd_fit=cd, sigma=sigma, A=A, B=B, q_bound=Q)
