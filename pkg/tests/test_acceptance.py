"""Acceptance criteria, one test per criterion.

Each test records a ``ACCEPTANCE <n> PASS|FAIL`` line (printed in the
terminal summary) before asserting.
"""

import itertools
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from dmfw import CentralizedMetaFrankWolfe, DecentralizedMetaFrankWolfe
from dmfw.constraints import Box, L1Ball, L2Ball, Simplex
from dmfw.losses import (QuadraticStream, ReplicatedStream, SinQuadraticStream,
                         SmoothL1RegressionStream)
from dmfw.metrics import approximation_ratio, rate_fit
from dmfw.topology import build_gossip_matrix, build_topology, check_gossip_matrix


def record(number, ok, detail):
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_gossip_suite():
    start = time.perf_counter()
    failures = []
    for kind, n in itertools.product(("complete", "cycle", "line", "star", "erdos_renyi"), (2, 3, 5, 7, 13, 20)):
        w = build_gossip_matrix(build_topology(kind, n, seed=0, p=0.4))
        try:
            check_gossip_matrix(w, tol=1e-12)
        except Exception as exc:
            failures.append(f"{kind}({n}): {exc}")
        e = w.entries
        if not (np.array_equal(e, e.T) and np.max(np.abs(e.sum(0) - 1)) <= 1e-12
                and np.max(np.abs(e.sum(1) - 1)) <= 1e-12 and w.lambda2() < 1):
            failures.append(f"{kind}({n})")
    elapsed = time.perf_counter() - start
    record(1, not failures and elapsed < 5, f"30 matrices, {len(failures)} failures, {elapsed:.2f}s")


def _cycle6_run():
    k = L1Ball(5)
    stream = QuadraticStream(6, 5, 50, constraint=k, seed=0)
    averaging, tracking = [], []

    def measure(st):
        xbar = st.x.mean(axis=0)
        eta = est.schedule_.etas()
        step = xbar[1:] - xbar[:-1] - eta[:, None] * (st.v.mean(axis=0) - xbar[:-1])
        averaging.append(np.max(np.linalg.norm(step, axis=-1)))
        gap = st.g.mean(axis=0) - st.grads.mean(axis=0)
        tracking.append(np.max(np.linalg.norm(gap, axis=-1)))

    est = DecentralizedMetaFrankWolfe(topology="cycle", L=50, diagnostics=False)
    start = time.perf_counter()
    est.fit(stream, callback=measure)
    return max(averaging), max(tracking), time.perf_counter() - start


def test_criterion_02_averaging_identity():
    worst, _, elapsed = _cycle6_run()
    record(2, worst <= 1e-10 and elapsed < 10, f"max residual {worst:.3e}, {elapsed:.2f}s")


def test_criterion_03_tracking_conservation():
    _, worst, _ = _cycle6_run()
    record(3, worst <= 1e-9, f"max residual {worst:.3e}")


def test_criterion_04_lmo_and_projection():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    bad = 0
    for dim in range(1, 7):
        sets = [L1Ball(dim, 1.7), Box(dim, -0.3, 1.1)] + ([Simplex(dim)] if dim >= 2 else [])
        for k in sets:
            verts = k.vertices()
            for d in rng.standard_normal((1000, dim)):
                if np.dot(d, k.lmo(d)) != min(np.dot(d, u) for u in verts):
                    bad += 1
    for k in (L1Ball(5), L2Ball(5, 1.3), Simplex(5), Box(5, -1.0, 0.5)):
        p = 2.5 * rng.standard_normal((1000, 5))
        proj = k.project(p)
        members = k.sample(rng, 100)
        dist = np.linalg.norm(p - proj, axis=1)
        to_members = np.linalg.norm(p[:, None] - members[None], axis=-1)
        bad += int(np.sum(dist[:, None] > to_members + 1e-9))
    elapsed = time.perf_counter() - start
    record(4, bad == 0 and elapsed < 10, f"{bad} disagreements, {elapsed:.2f}s")


def test_criterion_05_exact_rate():
    start = time.perf_counter()
    horizons = [25, 36, 50, 71, 100, 141, 200]
    gaps = []
    for T in horizons:
        stream = QuadraticStream(5, 5, T, constraint=L1Ball(5), seed=0)
        est = DecentralizedMetaFrankWolfe(topology="complete", L=T, alpha=0.5, A=1.0, oracle="ogd",
                                          diagnostics=False).fit(stream)
        gaps.append(est.metrics_[-1].mean_gap_running)
    ratio = gaps[-1] / gaps[0]
    slope = rate_fit(horizons, gaps)
    elapsed = time.perf_counter() - start
    record(5, ratio <= 0.5 and slope <= -0.3 and elapsed < 180,
           f"ratio {ratio:.3f}, slope {slope:.3f}, {elapsed:.1f}s")


def test_criterion_06_consensus_and_tracking_decay():
    start = time.perf_counter()
    stream = QuadraticStream(6, 5, 20, constraint=L1Ball(5), seed=0)
    est = DecentralizedMetaFrankWolfe(topology="cycle", L=128, alpha=0.5).fit(stream)
    dp = est.metrics_.per_ell("delta_p", "max")
    dd = est.metrics_.per_ell("delta_d", "max")
    rp, rd = dp[63] / dp[7], dd[63] / dd[7]
    elapsed = time.perf_counter() - start
    record(6, rp <= 0.25 and rd <= 0.35 and elapsed < 30,
           f"delta_p ratio {rp:.3g}, delta_d ratio {rd:.3g}, {elapsed:.1f}s")


def test_criterion_07_variance_reduction_decay():
    start = time.perf_counter()
    stream = QuadraticStream(4, 5, 3, constraint=L1Ball(5), seed=0, noise_sigma=1.0)
    runs = []
    for seed in range(200):
        est = DecentralizedMetaFrankWolfe(topology="cycle", L=100, alpha=0.75, mode="stochastic",
                                          shadow_exact=True, random_state=seed).fit(stream)
        runs.append(est.metrics_.per_ell("vr_error", "mean"))
    vr = np.mean(runs, axis=0)
    ratio = vr[80] / vr[15]
    elapsed = time.perf_counter() - start
    record(7, ratio <= 0.7 and elapsed < 180, f"ratio {ratio:.3f}, {elapsed:.1f}s")


def test_criterion_08_stochastic_rate():
    start = time.perf_counter()
    means = {}
    for T in (16, 256):
        stream = QuadraticStream(4, 5, T, constraint=L1Ball(5), seed=0, noise_sigma=1.0)
        gaps = []
        for seed in range(20):
            est = DecentralizedMetaFrankWolfe(topology="cycle", L=T, alpha=0.75, mode="stochastic",
                                              random_state=seed, diagnostics=False).fit(stream)
            gaps.append(est.metrics_[-1].mean_gap_running)
        means[T] = float(np.mean(gaps))
    ratio = means[256] / means[16]
    elapsed = time.perf_counter() - start
    record(8, ratio <= 0.75 and elapsed < 300, f"ratio {ratio:.3f}, {elapsed:.1f}s")


def test_criterion_09_centralized_equivalence():
    worst_traj, worst_ratio = 0.0, 0.0
    for mode, oracle, sigma in (("exact", "ogd", 0.0), ("stochastic", "ftpl", 0.5)):
        base = SinQuadraticStream(5, 4, 30, constraint=L1Ball(4), seed=2, noise_sigma=sigma)
        stream = ReplicatedStream(base)
        kw = dict(L=20, mode=mode, oracle=oracle, identical_agent_seeds=True, random_state=7)
        dec = DecentralizedMetaFrankWolfe(topology="complete", **kw).fit(stream)
        cen = CentralizedMetaFrankWolfe(**kw).fit(stream)
        h_dec, h_cen = dec.decision_history_, cen.decision_history_
        worst_traj = max(worst_traj, float(np.max(np.abs(h_dec - h_cen))))
        ratio = approximation_ratio(dec.metrics_, cen.metrics_)
        worst_ratio = max(worst_ratio, float(np.max(np.abs(ratio - 1.0))))
    record(9, worst_traj <= 1e-9 and worst_ratio <= 1e-9,
           f"max trajectory gap {worst_traj:.2e}, max |A(t)-1| {worst_ratio:.2e}")


def test_criterion_10_regression_ratio_band():
    worst = 0.0
    for seed in range(5):
        stream = SmoothL1RegressionStream(7, 300, seed=seed, constraint=L1Ball(13))
        kw = dict(L=50, random_state=seed, diagnostics=False)
        dec = DecentralizedMetaFrankWolfe(topology="cycle", **kw).fit(stream)
        cen = CentralizedMetaFrankWolfe(**kw).fit(stream)
        worst = max(worst, float(np.max(approximation_ratio(dec.metrics_, cen.metrics_)[49:])))
    record(10, worst <= 2.0, f"max A(t) for t >= 50 is {worst:.4f}")


def test_criterion_11_nonconvex_progress():
    stream = SinQuadraticStream(5, 5, 200, constraint=L1Ball(5), seed=0)
    est = DecentralizedMetaFrankWolfe(topology="complete", L=200, alpha=0.5, diagnostics=False).fit(stream)
    gap = est.metrics_.running_gap()
    ratio = gap[-20:].mean() / gap[:20].mean()
    record(11, ratio <= 0.5, f"late/early running gap ratio {ratio:.3f}")


def test_criterion_12_noiseless_differential():
    stream = QuadraticStream(4, 5, 5, constraint=L1Ball(5), seed=0, noise_sigma=0.0)
    kw = dict(topology="cycle", L=30, alpha=0.75, random_state=3)
    sto, exa = [], []
    DecentralizedMetaFrankWolfe(mode="stochastic", shadow_exact=True, **kw).fit(stream, callback=sto.append)
    DecentralizedMetaFrankWolfe(mode="exact", **kw).fit(stream, callback=exa.append)
    cost_gap = max(float(np.max(np.abs(s.fed_costs - e.fed_costs))) for s, e in zip(sto, exa))
    decision_gap = max(float(np.max(np.abs(s.decisions - e.decisions))) for s, e in zip(sto, exa))
    record(12, cost_gap <= 1e-9 and decision_gap <= 1e-9,
           f"max |a_tilde - d| {cost_gap:.3e}, max decision gap {decision_gap:.3e}")
