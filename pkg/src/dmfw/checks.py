"""Self-check suite behind ``dmfw validate``.

Each check returns ``(name, passed, detail)``. ``matrix_factory`` maps a
:class:`Topology` to its gossip matrix (a :class:`GossipMatrix` or a raw
array); tests inject corrupted factories through it.
"""

from __future__ import annotations

import itertools

import numpy as np

from .constraints import Box, L1Ball, L2Ball, Simplex
from .engine import AVERAGING_TOL, TRACKING_TOL, Schedule, SeedPlan, run_round
from .exceptions import ConstructionError
from .losses import QuadraticStream, SinQuadraticStream, SmoothL1RegressionStream
from .metrics import record_round
from .oracles import OGDOracle
from .topology import GossipMatrix, build_gossip_matrix, build_topology, check_gossip_matrix

__all__ = ["run_validation_suite", "simulate", "CHECKS"]

TOPOLOGY_GRID = ("complete", "cycle", "line", "star", "erdos_renyi")
SIZE_GRID = (2, 3, 5, 7, 13, 20)


def _as_gossip(topology, matrix_factory):
    w = (matrix_factory or build_gossip_matrix)(topology)
    return w if isinstance(w, GossipMatrix) else GossipMatrix(topology, np.asarray(w, dtype=float))


def simulate(topology, stream, constraint, L, T, *, matrix_factory=None, alpha=0.5, A=1.0,
             stochastic=False, shadow_exact=False, seed=0, check_invariants=False):
    """Play ``T`` rounds with OGD oracles; returns the list of RoundStates."""
    gossip = _as_gossip(topology, matrix_factory)
    schedule = Schedule(L, A, alpha)
    seeds = SeedPlan(seed)
    oracles = OGDOracle(constraint, constraint.diameter() / stream.g_lip, shape=(topology.n, L))
    x0 = np.broadcast_to(constraint.canonical_vertex(), (topology.n, constraint.dim))
    return [run_round(t, gossip, stream, constraint, oracles, schedule, seeds, x_init=x0,
                      stochastic=stochastic, shadow_exact=shadow_exact,
                      check_invariants=check_invariants)
            for t in range(1, T + 1)]


def check_gossip(matrix_factory=None):
    for kind, n in itertools.product(TOPOLOGY_GRID, SIZE_GRID):
        topo = build_topology(kind, n, seed=0, p=0.4)
        w = _as_gossip(topo, matrix_factory)
        try:
            check_gossip_matrix(w, tol=1e-12)
        except ConstructionError as exc:
            return False, f"{kind}({n}): {exc}"
    return True, ""


def check_lmo_brute_force(matrix_factory=None):
    rng = np.random.default_rng(0)
    for dim in range(1, 7):
        sets = [L1Ball(dim, 1.5), Box(dim, -0.5, 2.0)] + ([Simplex(dim)] if dim >= 2 else [])
        for k in sets:
            verts = k.vertices()
            dirs = rng.standard_normal((200, dim))
            got = np.sum(k.lmo(dirs) * dirs, axis=1)
            best = np.min(dirs @ verts.T, axis=1)
            if np.max(np.abs(got - best)) > 1e-12:
                return False, f"{k!r}: LMO value differs from vertex minimum"
    return True, ""


def check_projection(matrix_factory=None):
    rng = np.random.default_rng(1)
    for k in (L1Ball(5, 1.0), L2Ball(5, 2.0), Simplex(5), Box(5, -1.0, 0.5)):
        p = 3.0 * rng.standard_normal((100, 5))
        proj = k.project(p)
        if not np.all(k.contains(proj)):
            return False, f"{k!r}: projection left the set"
        members = k.sample(rng, 50)
        # Variational inequality <p - proj, z - proj> <= 0 for every member z.
        vi = np.einsum("id,ijd->ij", p - proj, members[None] - proj[:, None])
        if np.max(vi) > 1e-9:
            return False, f"{k!r}: projection optimality violated by {np.max(vi):.3e}"
        if np.max(np.abs(k.project(proj) - proj)) > 1e-10:
            return False, f"{k!r}: projection not idempotent"
    return True, ""


def check_averaging_identity(matrix_factory=None):
    k = L1Ball(5)
    topo = build_topology("cycle", 6)
    states = simulate(topo, QuadraticStream(6, 5, 5, constraint=k, seed=0), k, L=20, T=5,
                      matrix_factory=matrix_factory)
    worst = max(s.averaging_residual for s in states)
    if worst > AVERAGING_TOL:
        return False, f"averaging identity residual {worst:.3e} exceeds {AVERAGING_TOL}"
    worst = max(s.tracking_residual for s in states)
    if worst > TRACKING_TOL:
        return False, f"gradient-tracking conservation residual {worst:.3e} exceeds {TRACKING_TOL}"
    return True, ""


def check_gradients(matrix_factory=None):
    rng = np.random.default_rng(2)
    k = L1Ball(13)
    streams = [QuadraticStream(3, 13, 4, constraint=k, seed=3),
               SinQuadraticStream(3, 13, 4, constraint=k, seed=3),
               SmoothL1RegressionStream(3, 4, constraint=k, seed=3)]
    h = 1e-5
    for s in streams:
        for agent, t in ((0, 1), (2, 4)):
            x = k.sample(rng)
            g = s.gradient(agent, t, x)
            fd = np.array([(s.evaluate(agent, t, x + h * e) - s.evaluate(agent, t, x - h * e)) / (2 * h)
                           for e in np.eye(13)])
            err = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12)
            if err > 1e-4:
                return False, f"{type(s).__name__}: finite-difference relative error {err:.3e}"
    return True, ""


def check_decay(matrix_factory=None):
    k = L1Ball(5)
    topo = build_topology("cycle", 6)
    stream = QuadraticStream(6, 5, 10, constraint=k, seed=0)
    states = simulate(topo, stream, k, L=128, T=10, matrix_factory=matrix_factory)
    recs = [record_round(s, stream, k) for s in states]
    dp = np.max([r.delta_p for r in recs], axis=0)
    dd = np.max([r.delta_d for r in recs], axis=0)
    rp, rd = dp[63] / dp[7], dd[63] / dd[7]
    if not rp <= 0.25:
        return False, f"consensus decay ratio {rp:.3g} > 0.25"
    if not rd <= 0.35:
        return False, f"tracking decay ratio {rd:.3g} > 0.35"
    return True, ""


def check_noiseless_differential(matrix_factory=None):
    k = L1Ball(5)
    topo = build_topology("cycle", 4)
    stream = QuadraticStream(4, 5, 3, constraint=k, seed=0, noise_sigma=0.0)
    states = simulate(topo, stream, k, L=30, T=3, stochastic=True, shadow_exact=True,
                      matrix_factory=matrix_factory)
    for s in states:
        diff = np.max(np.abs(s.d - s.d_exact))
        if diff > 1e-9:
            return False, f"noiseless tracking differs from exact by {diff:.3e}"
        diff = np.max(np.abs(s.a_tilde[:, 1] - s.d_exact[:, 0]))
        if diff > 1e-9:
            return False, f"first variance-reduced cost differs from d_1 by {diff:.3e}"
    return True, ""


CHECKS = (
    ("gossip_matrix", check_gossip),
    ("lmo_brute_force", check_lmo_brute_force),
    ("projection_optimality", check_projection),
    ("averaging_identity", check_averaging_identity),
    ("gradient_finite_difference", check_gradients),
    ("decay_ratios", check_decay),
    ("noiseless_differential", check_noiseless_differential),
)


def run_validation_suite(matrix_factory=None):
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(matrix_factory)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
