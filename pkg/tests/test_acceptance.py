"""Acceptance gate: ten numbered criteria, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.  The tolerances below are the contract; do not relax
them.  Criteria 5-9 share the scaled recovery regime (N=2, L=Q=320, K=M=8).
"""

import numpy as np
import pytest

from moddemix.harness import SweepGrid, run_phase_transition, run_probe, run_snr_sweep
from moddemix.instances import TrialSpec, make_ground_truth, relative_error, synthesize
from moddemix.objective import (
    PenaltyParams,
    coherences,
    grad_total,
    loss_total,
)
from moddemix.operators import (
    BlockFactorPair,
    Dimensions,
    adjoint_component,
    dense_oracle,
    dft_basis,
    forward_map,
)
from moddemix.solver import SolverConfig, initialize, solve

RECOVERY_DIMS = Dimensions(L=320, Q=320, M=8, K=8, N=2)
RECOVERY_SEEDS = range(10)


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"\n[criterion {num:2d}] {name}: {detail} -> {'PASS' if ok else 'FAIL'}")


def _random_dims(rng: np.random.Generator, L_max: int = 64,
                 mk_max: int | None = None) -> Dimensions:
    while True:
        L = int(rng.integers(8, L_max + 1))
        Q = int(rng.integers(2, L + 1))
        K = int(rng.integers(1, Q + 1))
        M = int(rng.integers(1, L + 1))
        N = int(rng.integers(1, 4))
        if K * N <= Q and (mk_max is None or M * K <= mk_max):
            return Dimensions(L=L, Q=Q, M=M, K=K, N=N)


def _random_pair(dims: Dimensions, rng: np.random.Generator,
                 scale: float = 1.0) -> BlockFactorPair:
    h = rng.standard_normal((dims.N, dims.M)) + 1j * rng.standard_normal((dims.N, dims.M))
    x = rng.standard_normal((dims.N, dims.K)) + 1j * rng.standard_normal((dims.N, dims.K))
    return BlockFactorPair(scale * h, scale * x)


@pytest.fixture(scope="module")
def recovery_runs():
    """Noiseless solves at the scaled recovery regime, shared by criteria
    5 and 8; also a few noisy solves so monotonicity is checked with noise."""
    runs = []
    for seed in RECOVERY_SEEDS:
        ens, truth, obs = synthesize(TrialSpec(RECOVERY_DIMS, seed=seed))
        est, trace = solve(ens, obs, SolverConfig(max_iters=5000), truth=truth)
        runs.append((seed, relative_error(est, truth), trace))
    for seed in range(3):
        ens, truth, obs = synthesize(TrialSpec(RECOVERY_DIMS, seed=seed,
                                               snr_db=20.0))
        est, trace = solve(ens, obs, SolverConfig(max_iters=1000), truth=truth)
        runs.append((seed, relative_error(est, truth), trace))
    return runs


def test_01_adjoint_identity():
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(1000):
        dims = _random_dims(rng)
        ens, _, _ = synthesize(TrialSpec(dims, seed=i))
        z = _random_pair(dims, rng)
        w = rng.standard_normal(dims.L) + 1j * rng.standard_normal(dims.L)
        lhs = np.vdot(forward_map(ens, z), w)
        rhs = sum(np.vdot(z.lifted_block(n), adjoint_component(ens, n, w))
                  for n in range(dims.N))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    ok = worst <= 1e-10
    _report(1, "adjoint identity", ok,
            f"max rel mismatch {worst:.3e} over 1000 instances (tol 1e-10)")
    assert ok


def test_02_dense_oracle_equivalence():
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(100):
        dims = _random_dims(rng, mk_max=256)
        ens, _, _ = synthesize(TrialSpec(dims, seed=1000 + i))
        z = _random_pair(dims, rng)
        w = rng.standard_normal(dims.L) + 1j * rng.standard_normal(dims.L)
        fwd = forward_map(ens, z)
        dense_fwd = sum(dense_oracle(ens, n) @ z.lifted_block(n).ravel()
                        for n in range(dims.N))
        worst = max(worst, np.linalg.norm(fwd - dense_fwd) / np.linalg.norm(fwd))
        for n in range(dims.N):
            adj = adjoint_component(ens, n, w)
            dense_adj = (dense_oracle(ens, n).conj().T @ w).reshape(dims.M, dims.K)
            worst = max(worst, np.linalg.norm(adj - dense_adj)
                        / max(np.linalg.norm(dense_adj), 1e-300))
    ok = worst <= 1e-10
    _report(2, "dense-oracle equivalence", ok,
            f"max rel mismatch {worst:.3e} over 100 instances (tol 1e-10)")
    assert ok


def test_03_gradient_correctness():
    rng = np.random.default_rng(303)
    eps = 1e-5
    worst = 0.0
    for i in range(100):
        dims = _random_dims(rng, L_max=48)
        ens, truth, obs = synthesize(TrialSpec(dims, seed=2000 + i, snr_db=25.0))
        rep = coherences(ens, truth)
        p = PenaltyParams(rho=rep.d0**2, d=rep.d0, d_n=rep.d_n,
                          mu=rep.mu, nu=rep.nu)
        scale = 1.0 if i % 2 == 0 else 1.6  # odd cases activate the hinges
        z = _random_pair(dims, rng, scale=scale)
        dz = _random_pair(dims, rng)
        g = grad_total(ens, z, obs, p)

        def val(s):
            zz = BlockFactorPair(z.channels + s * dz.channels,
                                 z.coefficients + s * dz.coefficients)
            return loss_total(ens, zz, obs, p)

        fd = (val(eps) - val(-eps)) / (2 * eps)
        an = 2.0 * (np.vdot(g.channels, dz.channels)
                    + np.vdot(g.coefficients, dz.coefficients)).real
        worst = max(worst, abs(fd - an) / max(abs(fd), 1e-12))
    ok = worst <= 1e-6
    _report(3, "gradient correctness", ok,
            f"max FD rel mismatch {worst:.3e} over 100 points (tol 1e-6)")
    assert ok


def test_04_exhaustive_isometry():
    rep = run_probe("isometry",
                    {"dims": Dimensions(L=16, Q=8, M=3, K=2, N=2), "seed": 0})
    dev = abs(rep["ratio"] - 1.0)
    ok = rep["patterns"] == 2 ** 16 and dev <= 1e-8
    _report(4, "exhaustive isometry", ok,
            f"2^16 sign patterns, |mean/frobenius - 1| = {dev:.3e} (tol 1e-8)")
    assert ok


def test_05_scaled_recovery(recovery_runs):
    noiseless = recovery_runs[:len(RECOVERY_SEEDS)]
    errs = [err for _, err, _ in noiseless]
    hits = sum(e < 1e-2 for e in errs)
    ok = hits >= 9 and all(tr.iterations <= 5000 for _, _, tr in noiseless)
    _report(5, "scaled recovery", ok,
            f"{hits}/10 seeds below 1e-2 (median err {np.median(errs):.2e})")
    assert ok


@pytest.mark.filterwarnings("ignore:power iteration:RuntimeWarning")
def test_06_q_monotonicity():
    rows = run_phase_transition(SweepGrid(), SolverConfig(max_iters=400),
                                base_seed=0)
    per_cell: dict[tuple, list] = {}
    for r in rows:
        per_cell.setdefault((r["K"], r["M"]), []).append((r["Q"], r["successes"]))
    monotone = 0
    for pairs in per_cell.values():
        succ = [s for _, s in sorted(pairs)]
        monotone += all(a <= b for a, b in zip(succ, succ[1:]))
    frac = monotone / len(per_cell)
    ok = frac >= 0.9
    _report(6, "Q-monotonicity", ok,
            f"{monotone}/{len(per_cell)} (K,M) cells non-decreasing in Q "
            f"({frac:.0%}, need >= 90%)")
    assert ok


def test_07_snr_trend():
    rows = run_snr_sweep(RECOVERY_DIMS, [10.0, 20.0, 30.0, 40.0, 50.0],
                         SolverConfig(max_iters=2000), trials=10, base_seed=0)
    errs = {r["snr_db"]: r["mean_rel_err"] for r in rows}
    seq = [errs[s] for s in (10.0, 20.0, 30.0, 40.0, 50.0)]
    decreasing = all(a > b for a, b in zip(seq, seq[1:]))
    ratio = errs[20.0] / errs[40.0]
    ok = decreasing and 10.0 / 3.0 <= ratio <= 30.0
    _report(7, "SNR trend", ok,
            f"errors {['%.2e' % e for e in seq]}, 20->40 dB ratio {ratio:.2f} "
            f"(need [3.33, 30])")
    assert ok


def test_08_monotone_loss(recovery_runs):
    worst = -np.inf
    for _, _, trace in recovery_runs:
        if len(trace.f_tilde) < 2:
            continue
        slack = 1e-12 * max(1.0, float(trace.f_tilde[0]))
        worst = max(worst, float(np.max(np.diff(trace.f_tilde))) - slack)
    ok = worst <= 0.0
    _report(8, "monotone loss", ok,
            f"max (increase - slack) over {len(recovery_runs)} backtracking "
            f"runs: {worst:.3e} (need <= 0)")
    assert ok


def test_09_initialization_quality():
    init_errs, rand_errs = [], []
    feasible = True
    for seed in range(20):
        ens, truth, obs = synthesize(TrialSpec(RECOVERY_DIMS, seed=seed))
        rep = coherences(ens, truth)
        init = initialize(ens, obs, rep.mu, rep.nu)
        init_errs.append(relative_error(init.start, truth))

        d = RECOVERY_DIMS
        fm = dft_basis(d.L, d.M)
        for n in range(d.N):
            root = np.sqrt(init.d_n[n])
            lhs_h = np.sqrt(d.L) * np.max(np.abs(fm @ init.start.channels[n]))
            lhs_x = np.sqrt(d.Q) * np.max(np.abs(ens.coding[n]
                                                 @ init.start.coefficients[n]))
            feasible &= lhs_h <= 2 * root * rep.mu * (1 + 1e-8)
            feasible &= lhs_x <= 2 * root * rep.nu * (1 + 1e-8)

        rng = np.random.default_rng(900 + seed)
        rand = _random_pair(RECOVERY_DIMS, rng)
        scale_h = np.sqrt(init.d_n) / np.linalg.norm(rand.channels, axis=1)
        scale_x = np.sqrt(init.d_n) / np.linalg.norm(rand.coefficients, axis=1)
        rand = BlockFactorPair(rand.channels * scale_h[:, None],
                               rand.coefficients * scale_x[:, None])
        rand_errs.append(relative_error(rand, truth))
    med_init = float(np.median(init_errs))
    med_rand = float(np.median(rand_errs))
    ok = med_init < 0.5 and med_init < med_rand and feasible
    _report(9, "initialization quality", ok,
            f"median init err {med_init:.3f} (< 0.5), random-start median "
            f"{med_rand:.3f}, constraints {'ok' if feasible else 'violated'}")
    assert ok


def test_10_metric_invariance():
    rng = np.random.default_rng(1010)
    _, truth, _ = synthesize(TrialSpec(RECOVERY_DIMS, seed=0))
    est = BlockFactorPair(
        truth.channels + 0.1 * (rng.standard_normal(truth.channels.shape)
                                + 1j * rng.standard_normal(truth.channels.shape)),
        truth.coefficients + 0.1 * (rng.standard_normal(truth.coefficients.shape)
                                    + 1j * rng.standard_normal(truth.coefficients.shape)))
    base = relative_error(est, truth)
    worst = 0.0
    for _ in range(100):
        alpha = rng.standard_normal(RECOVERY_DIMS.N) \
            + 1j * rng.standard_normal(RECOVERY_DIMS.N)
        scaled = BlockFactorPair(est.channels * alpha[:, None],
                                 est.coefficients / np.conj(alpha)[:, None])
        worst = max(worst, abs(relative_error(scaled, truth) - base))
    ok = worst <= 1e-12
    _report(10, "metric invariance", ok,
            f"max |change| {worst:.3e} over 100 alpha draws (tol 1e-12)")
    assert ok
