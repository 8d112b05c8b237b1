"""Estimator front end for decentralized and centralized Meta Frank-Wolfe.

The estimators follow scikit-learn conventions: hyper-parameters are set in
``__init__`` and exposed through ``get_params``/``set_params``; ``fit`` consumes
a :class:`~dmfw.losses.LossStream` (playing every round of its horizon),
``partial_fit`` plays one more round, and fitted state lives in attributes with
a trailing underscore.

Example
-------
>>> from dmfw import DecentralizedMetaFrankWolfe, QuadraticStream, L1Ball
>>> stream = QuadraticStream(4, 3, 5, constraint=L1Ball(3))
>>> est = DecentralizedMetaFrankWolfe(topology="cycle", L=10).fit(stream)
>>> len(est.metrics_)
5
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_vector
from .constraints import make_constraint
from .engine import Schedule, SeedPlan, run_round
from .losses import AveragedStream, LossStream
from .metrics import MetricsSeries, diagnostic_constants, record_round
from .oracles import make_oracle
from .topology import GossipMatrix, Topology, build_gossip_matrix, build_topology

__all__ = ["DecentralizedMetaFrankWolfe", "CentralizedMetaFrankWolfe"]

MODES = ("exact", "stochastic")
INIT_POLICIES = ("canonical_vertex", "seeded_random_vertex")


class DecentralizedMetaFrankWolfe(BaseEstimator):
    """Online decentralized Frank-Wolfe over a gossip network.

    Parameters
    ----------
    topology : str or Topology, default="cycle"
        Graph kind (``complete``, ``cycle``, ``line``, ``star``,
        ``erdos_renyi``) or a prebuilt :class:`Topology`. The agent count is
        taken from the stream.
    edge_prob : float, default=0.4
        Edge probability for ``erdos_renyi``.
    constraint : str, default="l1_ball"
        Feasible set kind; its dimension is taken from the stream.
    radius, lo, hi : float
        Set parameters (balls use ``radius``, boxes ``lo``/``hi``).
    L : int, default=50
        Frank-Wolfe iterations (and oracles) per agent per round.
    A, alpha : float
        Step sizes ``eta_l = min(1, A / l**alpha)``.
    mode : {"exact", "stochastic"}
        Exact gradients, or noisy gradients with variance reduction.
    oracle : {"ogd", "ftpl"}
        Online linear optimization oracle.
    oracle_step_scale : float, optional
        OGD step constant; defaults to ``D / G`` of the set and stream.
    ftpl_amplitude : float, optional
        FTPL perturbation amplitude; defaults to ``G * sqrt(T)``.
    init_policy : {"canonical_vertex", "seeded_random_vertex"}
        Start point ``x_{i,1}`` of every round.
    random_state : int
        Master seed for every random draw of the run.
    identical_agent_seeds : bool
        Give every agent the same random substreams.
    shadow_exact : bool
        In stochastic mode, also compute exact tracking vectors for metrics.
    diagnostics : bool
        Record per-iteration consensus and tracking errors.
    check_invariants : bool
        Abort with InvariantViolation when a live invariant breaks.
    """

    def __init__(self, topology="cycle", edge_prob=0.4, constraint="l1_ball", radius=1.0,
                 lo=-1.0, hi=1.0, L=50, A=1.0, alpha=0.5, mode="exact", oracle="ogd",
                 oracle_step_scale=None, ftpl_amplitude=None, init_policy="canonical_vertex",
                 random_state=0, identical_agent_seeds=False, shadow_exact=False,
                 diagnostics=True, check_invariants=True):
        self.topology = topology
        self.edge_prob = edge_prob
        self.constraint = constraint
        self.radius = radius
        self.lo = lo
        self.hi = hi
        self.L = L
        self.A = A
        self.alpha = alpha
        self.mode = mode
        self.oracle = oracle
        self.oracle_step_scale = oracle_step_scale
        self.ftpl_amplitude = ftpl_amplitude
        self.init_policy = init_policy
        self.random_state = random_state
        self.identical_agent_seeds = identical_agent_seeds
        self.shadow_exact = shadow_exact
        self.diagnostics = diagnostics
        self.check_invariants = check_invariants

    # -- construction -------------------------------------------------------
    def _build_network(self, n_agents):
        if isinstance(self.topology, Topology):
            topo = self.topology
            if topo.n != n_agents:
                raise ValueError(f"topology has {topo.n} nodes but the stream has {n_agents} agents")
        else:
            topo = build_topology(self.topology, n_agents, seed=self.random_state, p=self.edge_prob)
        return topo, build_gossip_matrix(topo)

    def _prepare_stream(self, stream):
        return stream

    def _constraint_params(self):
        if self.constraint in ("l1_ball", "l2_ball"):
            return {"radius": self.radius}
        if self.constraint == "box":
            return {"lo": self.lo, "hi": self.hi}
        return {}

    def _setup(self, stream):
        if not isinstance(stream, LossStream):
            raise TypeError(f"fit expects a LossStream, got {type(stream).__name__}")
        check_choice(self.mode, "mode", MODES)
        check_choice(self.init_policy, "init_policy", INIT_POLICIES)
        self.stream_ = self._prepare_stream(stream)
        self.constraint_ = make_constraint(self.constraint, self.stream_.dim, **self._constraint_params())
        self.topology_, self.gossip_matrix_ = self._build_network(self.stream_.n_agents)
        self.schedule_ = Schedule(self.L, self.A, self.alpha)
        self.seeds_ = SeedPlan(self.random_state, self.identical_agent_seeds)
        n = self.stream_.n_agents
        d_over_g = self.constraint_.diameter() / self.stream_.g_lip
        step = d_over_g if self.oracle_step_scale is None else self.oracle_step_scale
        amp = (self.stream_.g_lip * np.sqrt(self.stream_.horizon)
               if self.ftpl_amplitude is None else self.ftpl_amplitude)
        self.oracles_ = make_oracle(self.oracle, self.constraint_, shape=(n, self.L),
                                    step_scale=step, amplitude=amp, seed=self.random_state)
        self.metrics_ = MetricsSeries()
        self.decisions_ = []
        self.t_ = 0

    def _initial_point(self, t):
        n, dim = self.stream_.n_agents, self.stream_.dim
        if self.init_policy == "canonical_vertex":
            return np.broadcast_to(self.constraint_.canonical_vertex(), (n, dim))
        directions = self.seeds_.per_agent("init", t, n, lambda r: r.standard_normal(dim))
        return self.constraint_.lmo(directions)

    # -- public API ---------------------------------------------------------
    def partial_fit(self, stream, callback=None):
        """Play the next round ``t_ + 1`` of ``stream``."""
        if getattr(self, "_source_stream", None) is not stream:
            self._setup(stream)
            self._source_stream = stream
        t = self.t_ + 1
        if t > self.stream_.horizon:
            raise ValueError(f"stream horizon {self.stream_.horizon} already exhausted")
        state = run_round(
            t, self.gossip_matrix_, self.stream_, self.constraint_, self.oracles_,
            self.schedule_, self.seeds_, x_init=self._initial_point(t),
            stochastic=self.mode == "stochastic", shadow_exact=self.shadow_exact,
            check_invariants=self.check_invariants,
        )
        self.metrics_.append(record_round(state, self.stream_, self.constraint_, self.metrics_,
                                          self.oracles_, self.diagnostics))
        self.decisions_.append(state.decisions.copy())
        self.last_state_ = state
        self.t_ = t
        self.coef_ = state.decisions.mean(axis=0)
        if callback is not None:
            callback(state)
        return self

    def fit(self, stream, callback=None):
        """Play all ``stream.horizon`` rounds from a fresh state."""
        self._source_stream = None
        self._setup(stream)
        self._source_stream = stream
        for _ in range(self.stream_.horizon):
            self.partial_fit(stream, callback)
        return self

    def predict(self, X):
        """Linear prediction ``X @ coef_`` with the network-average decision."""
        check_is_fitted(self, "coef_")
        X = check_vector(X, self.coef_.shape[0], "X")
        return X @ self.coef_

    @property
    def decision_history_(self):
        """Played points, shape ``(t, n_agents, dim)``."""
        check_is_fitted(self, "coef_")
        return np.stack(self.decisions_)

    def diagnostic_constants(self):
        check_is_fitted(self, "coef_")
        return diagnostic_constants(self.metrics_, self.constraint_, self.stream_,
                                    self.gossip_matrix_, self.schedule_)


class CentralizedMetaFrankWolfe(DecentralizedMetaFrankWolfe):
    """Single-agent Meta Frank-Wolfe on the averaged loss ``F^t``.

    Same parameters as :class:`DecentralizedMetaFrankWolfe`; ``topology`` and
    ``edge_prob`` are ignored.
    """

    def _prepare_stream(self, stream):
        return AveragedStream(stream)

    def _build_network(self, n_agents):
        topo = Topology(1)
        return topo, GossipMatrix(topo, np.ones((1, 1)))
