"""Synchronous round kernel of decentralized Meta Frank-Wolfe.

One call to :func:`run_round` plays round ``t`` for all agents at once:

Phase 1 (decision). For ``l = 1..L`` every agent gossips its iterate,
``y_l = sum_j W_ij x_{j,l}``, and takes a Frank-Wolfe step towards its oracle's
output, ``x_{l+1} = (1 - eta_l) y_l + eta_l v_l``. Each agent then plays one
``x_l`` drawn uniformly from ``l = 1..L``.

Phase 2 (feedback). Gradient tracking, ``d_l = sum_j W_ij g_{j,l}`` and
``g_{l+1} = grad f(x_{l+1}) - grad f(x_l) + d_l``, produces the linear cost fed
to oracle ``(i, l)``. In stochastic mode the gradients are noisy and the cost
is the variance-reduced ``a_l = (1 - rho_l) a_{l-1} + rho_l d_l`` instead.

Arrays are indexed ``[agent, l, coordinate]`` with ``l`` zero-based, so
``X[:, 0]`` holds ``x_{i,1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_open_unit, check_positive_int, check_positive_real
from .exceptions import InvariantViolation

__all__ = [
    "Schedule",
    "AgentRoundState",
    "RoundState",
    "SeedPlan",
    "run_round",
    "run_round_exact",
    "run_round_stochastic",
    "AVERAGING_TOL",
    "TRACKING_TOL",
    "FEASIBILITY_TOL",
]

AVERAGING_TOL = 1e-10
TRACKING_TOL = 1e-9
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class Schedule:
    """Step sizes ``eta_l = min(1, A / l**alpha)`` and mixing weights
    ``rho_l = min(1, 2 / (l + 3)**(2 alpha / 3))`` for ``l = 1..L``."""

    L: int
    A: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "L", check_positive_int(self.L, "L"))
        object.__setattr__(self, "A", check_positive_real(self.A, "A"))
        object.__setattr__(self, "alpha", check_open_unit(self.alpha, "alpha"))

    def eta(self, ell):
        ell = np.asarray(ell, dtype=float)
        return np.minimum(1.0, self.A / ell ** self.alpha)

    def rho(self, ell):
        ell = np.asarray(ell, dtype=float)
        return np.minimum(1.0, 2.0 / (ell + 3.0) ** (2.0 * self.alpha / 3.0))

    def etas(self):
        return self.eta(np.arange(1, self.L + 1))

    def rhos(self):
        return self.rho(np.arange(1, self.L + 1))


_PURPOSES = {"choice": 1, "noise": 2, "ftpl": 3, "init": 4}


@dataclass(frozen=True)
class SeedPlan:
    """Derives an independent generator per (purpose, round, agent).

    Keys never depend on which diagnostics are enabled, so measurement does not
    perturb the algorithm's draws. With ``identical_agents`` the agent index is
    dropped from the key and every agent sees the same randomness.
    """

    master_seed: int
    identical_agents: bool = False

    def rng(self, purpose, t, agent):
        key = [int(self.master_seed) & (2**64 - 1), _PURPOSES[purpose], int(t)]
        if not self.identical_agents:
            key.append(int(agent))
        return np.random.default_rng(np.random.SeedSequence(key))

    def per_agent(self, purpose, t, n, draw):
        """Stack ``draw(rng)`` over agents, one substream each."""
        return np.stack([draw(self.rng(purpose, t, i)) for i in range(n)])


@dataclass
class AgentRoundState:
    """One agent's vectors for one round (rows indexed by ``l - 1``)."""

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    g: np.ndarray
    d: np.ndarray
    a_tilde: np.ndarray | None
    chosen_ell: int
    decision: np.ndarray


@dataclass
class RoundState:
    """All agents' vectors for round ``t``.

    ``g``/``d`` are the messages actually exchanged (noisy in stochastic mode);
    ``d_exact`` is the shadow exact tracking vector, when requested. Residuals
    are the live invariant measurements of this round.
    """

    t: int
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    g: np.ndarray
    d: np.ndarray
    grads: np.ndarray
    a_tilde: np.ndarray | None
    d_exact: np.ndarray | None
    chosen_ell: np.ndarray
    decisions: np.ndarray
    fed_costs: np.ndarray
    averaging_residual: float
    tracking_residual: float

    @property
    def n_agents(self):
        return self.x.shape[0]

    def agent(self, i):
        return AgentRoundState(
            x=self.x[i], y=self.y[i], v=self.v[i], g=self.g[i], d=self.d[i],
            a_tilde=None if self.a_tilde is None else self.a_tilde[i],
            chosen_ell=int(self.chosen_ell[i]), decision=self.decisions[i],
        )


def _gradients_at(stream, t, P):
    """Gradient of agent ``i`` at every ``P[i, m]``; shape ``(n, m, dim)``."""
    n, m, dim = P.shape
    agents = np.repeat(np.arange(n), m)
    _, g = stream._value_grad(agents, t, P.reshape(n * m, dim))
    return g.reshape(n, m, dim)


def _track(W, grads):
    """Gradient-tracking recursion over ``l``; returns ``(g, d)``."""
    n, L1, dim = grads.shape
    g = np.empty_like(grads)
    d = np.empty((n, L1 - 1, dim))
    g[:, 0] = grads[:, 0]
    for ell in range(L1 - 1):
        d[:, ell] = W @ g[:, ell]
        g[:, ell + 1] = grads[:, ell + 1] - grads[:, ell] + d[:, ell]
    return g, d


def _check_feasible(constraint, name, arr):
    ok = constraint.contains(arr, FEASIBILITY_TOL)
    if not np.all(ok):
        idx = np.argwhere(~ok)[0]
        raise InvariantViolation(f"{name} at index {tuple(idx.tolist())} left the constraint set")


def run_round(t, gossip, stream, constraint, oracles, schedule, seeds, *, x_init,
              stochastic=False, shadow_exact=False, check_invariants=True):
    """Play round ``t`` and feed the oracles; returns the :class:`RoundState`."""
    W = np.asarray(gossip.entries)
    n, L, dim = W.shape[0], schedule.L, constraint.dim
    eta = schedule.etas()

    perturbation = None
    if getattr(oracles, "kind", None) == "ftpl":
        perturbation = seeds.per_agent("ftpl", t, n, lambda r: r.random((L, dim)))
    V = oracles.next_vector(perturbation)

    X = np.empty((n, L + 1, dim))
    Y = np.empty((n, L, dim))
    X[:, 0] = x_init
    for ell in range(L):
        Y[:, ell] = W @ X[:, ell]
        X[:, ell + 1] = (1.0 - eta[ell]) * Y[:, ell] + eta[ell] * V[:, ell]

    chosen = seeds.per_agent("choice", t, n, lambda r: r.integers(1, L + 1))
    decisions = X[np.arange(n), chosen - 1]

    grads = _gradients_at(stream, t, X)
    a_tilde = d_exact = None
    if stochastic:
        noise = seeds.per_agent("noise", t, n, lambda r: stream.sample_noise(r, (L + 1,)))
        used = grads + noise
        g, d = _track(W, used)
        rho = schedule.rhos()
        a_tilde = np.zeros((n, L + 1, dim))
        for ell in range(L):
            a_tilde[:, ell + 1] = (1.0 - rho[ell]) * a_tilde[:, ell] + rho[ell] * d[:, ell]
        fed = a_tilde[:, 1:]
        if shadow_exact:
            d_exact = _track(W, grads)[1]
    else:
        used = grads
        g, d = _track(W, used)
        fed = d
    oracles.feedback(fed)

    xbar = X.mean(axis=0)
    step = xbar[1:] - xbar[:-1] - eta[:, None] * (V.mean(axis=0) - xbar[:-1])
    averaging = float(np.max(np.linalg.norm(step, axis=-1)))
    tracking = float(np.max(np.linalg.norm(g.mean(axis=0) - used.mean(axis=0), axis=-1)))

    if check_invariants:
        _check_feasible(constraint, "x", X)
        _check_feasible(constraint, "y", Y)
        _check_feasible(constraint, "v", V)
        if averaging > AVERAGING_TOL:
            raise InvariantViolation(f"averaging identity residual {averaging:.3e} exceeds {AVERAGING_TOL}")
        if tracking > TRACKING_TOL:
            raise InvariantViolation(f"gradient-tracking conservation residual {tracking:.3e} exceeds {TRACKING_TOL}")

    return RoundState(
        t=t, x=X, y=Y, v=V, g=g, d=d, grads=grads, a_tilde=a_tilde, d_exact=d_exact,
        chosen_ell=chosen, decisions=decisions, fed_costs=fed,
        averaging_residual=averaging, tracking_residual=tracking,
    )


def run_round_exact(t, gossip, stream, constraint, oracles, schedule, seeds, *, x_init,
                    check_invariants=True):
    return run_round(t, gossip, stream, constraint, oracles, schedule, seeds,
                     x_init=x_init, check_invariants=check_invariants)


def run_round_stochastic(t, gossip, stream, constraint, oracles, schedule, seeds, *, x_init,
                         shadow_exact=False, check_invariants=True):
    return run_round(t, gossip, stream, constraint, oracles, schedule, seeds, x_init=x_init,
                     stochastic=True, shadow_exact=shadow_exact, check_invariants=check_invariants)
