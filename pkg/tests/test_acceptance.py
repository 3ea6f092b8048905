"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line (printed in the pytest terminal summary)
before asserting, so a red criterion still shows its measured numbers.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import record, skip
from corr_rr.aggregation import (
    combine_phases,
    full_budget_from_counts,
    phase2_estimate,
    rsfd_from_counts,
    rsrfd_from_counts,
    spl_from_counts,
)
from corr_rr.grr import grr_params, ldp_ratio
from corr_rr.harness import ExperimentConfig, run_experiment
from corr_rr.ingest import CLAVE, MUSHROOM, NURSERY, ingest_file
from corr_rr.mechanisms import corr_rr_phase2_batch, mechanism_channel
from corr_rr.pyopt import PairContext, avg_mse, optimal_py, quadratic_coefficients, variance_general_form, variance_binary_form
from corr_rr.core import save_dataset

GRID = np.linspace(0.0, 1.0, 10001)


def pooled_se(a, b):
    return math.sqrt(a.mse_std**2 / a.runs + b.mse_std**2 / b.runs)


def synth_source(n, d, k, rho, seed=0):
    return {"synth": {"n": n, "d": d, "k": k, "rho": rho, "seed": seed}}


# 1 -------------------------------------------------------------------------


def test_criterion_01_channel_ldp():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_excess, exact_err, checked = -math.inf, 0.0, 0
    for eps in (0.5, 1.0, 3.0):
        bound = math.exp(eps)
        exact_err = max(exact_err, abs(ldp_ratio(mechanism_channel("GRR", eps, 1, 2)) - bound))
        exact_err = max(exact_err, abs(ldp_ratio(mechanism_channel("GRR", eps, 1, 4)) - bound))
        for d, k in ((2, 2), (3, 2), (2, 4)):
            exact_err = max(exact_err, abs(ldp_ratio(mechanism_channel("SPL", eps, d, k)) - bound))
            channels = [mechanism_channel("RSFD", eps, d, k)]
            priors = [[rng.dirichlet(np.ones(k)) for _ in range(d)] for _ in range(3)]
            priors.append([np.eye(k)[0]] * d)
            channels += [mechanism_channel("RSRFD", eps, d, k, prior=p) for p in priors]
            for py in (0.0, 0.3, 0.5, 0.7, 1.0, None):
                if py is None:
                    m = rng.uniform(size=(d, d))
                    m = (m + m.T) / 2
                else:
                    m = np.full((d, d), py)
                np.fill_diagonal(m, 1.0)
                channels.append(mechanism_channel("CORR_RR", eps, d, k, py_model=m))
            for c in channels:
                worst_excess = max(worst_excess, ldp_ratio(c) - bound)
                checked += 1
    elapsed = time.perf_counter() - start
    ok = worst_excess <= 1e-9 and exact_err <= 1e-9 and elapsed < 10
    record(1, "channel ratio <= e^eps for every mechanism; SPL and GRR exactly e^eps", ok,
           f"{checked} channels, max(ratio - e^eps)={worst_excess:.2e}, SPL/GRR error={exact_err:.1e}, {elapsed:.2f}s")
    assert ok


# 2 -------------------------------------------------------------------------


def _marginals(joint, d):
    return [joint.sum(axis=tuple(m for m in range(d) if m != j)) for j in range(d)]


def _expected_counts(channel, joint, d, k, n):
    return _marginals(n * (channel @ joint.ravel()).reshape((k,) * d), d)


def test_criterion_02_inverse_map():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        d, k = int(rng.integers(1, 4)), int(rng.integers(2, 6))
        eps, n = float(rng.uniform(0.2, 5)), float(rng.integers(10, 10**6))
        dom = (k,) * d
        joint = rng.dirichlet(np.ones(k**d) * 0.7).reshape((k,) * d)
        truth = _marginals(joint, d)
        prior = [rng.dirichlet(np.ones(k)) for _ in range(d)]
        ests = [
            spl_from_counts(_expected_counts(mechanism_channel("SPL", eps, d, k), joint, d, k, n), n, eps, dom),
            rsfd_from_counts(_expected_counts(mechanism_channel("RSFD", eps, d, k), joint, d, k, n), n, eps, dom),
            rsrfd_from_counts(
                _expected_counts(mechanism_channel("RSRFD", eps, d, k, prior=prior), joint, d, k, n),
                n, eps, dom, prior,
            ),
        ]
        for est in ests:
            worst = max(worst, max(float(np.max(np.abs(a - b))) for a, b in zip(est, truth)))

        # Corr-RR: the Phase-II estimator inverts the GRR(eps) law, which its
        # reports follow exactly when every attribute agrees and p_y = 1.
        diag = np.zeros((k,) * d)
        f = rng.dirichlet(np.ones(k))
        for v in range(k):
            diag[(v,) * d] = f[v]
        n1 = float(rng.integers(1, n))
        c1 = _expected_counts(mechanism_channel("SPL", eps, d, k), diag, d, k, n1)
        py = np.ones((d, d))
        c2 = _expected_counts(mechanism_channel("CORR_RR", eps, d, k, py_model=py), diag, d, k, n - n1)
        est = combine_phases(spl_from_counts(c1, n1, eps, dom), n1, full_budget_from_counts(c2, n - n1, eps, dom), n - n1)
        worst = max(worst, max(float(np.max(np.abs(a - f))) for a in est))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5
    record(2, "estimators recover marginals from exact expected counts", ok,
           f"100 parameterizations, max error={worst:.1e}, {elapsed:.2f}s")
    assert ok


# 3 -------------------------------------------------------------------------


def grid_mse(f_a, f_b, eps, n_prime, grid):
    """avg_mse on a grid, written directly from the report law of the mechanism."""
    k = len(f_a)
    par = grr_params(eps, k)
    p = grid[:, None]

    def side(fa, fb):
        g_b = par.q + par.delta * fb
        pi = 0.5 * (par.q + par.delta * fa) + 0.5 * (p * g_b + (1 - p) * (1 - g_b) / (k - 1))
        bias = (pi - par.q) / par.delta - fa
        return np.mean(bias**2 + pi * (1 - pi) / (n_prime * par.delta**2), axis=1)

    return 0.5 * (side(f_a, f_b) + side(f_b, f_a))


def test_criterion_03_optimizer_vs_grid():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_gap, worst_arg, strict = -math.inf, 0.0, 0
    for i in range(100):
        k = (2, 10)[i % 2]
        f_a, f_b = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        eps, n_prime = float(rng.uniform(0.5, 5)), float(10 ** rng.uniform(3, 5))
        ctx = PairContext.from_epsilon(f_a, f_b, eps, n_prime)
        p = optimal_py(ctx)
        vals = grid_mse(f_a, f_b, eps, n_prime, GRID)
        worst_gap = max(worst_gap, avg_mse(ctx, p) - vals.min())
        if quadratic_coefficients(ctx)[2] > 1e-8:
            strict += 1
            worst_arg = max(worst_arg, abs(p - GRID[int(np.argmin(vals))]))
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-12 and worst_arg <= 1e-2 and elapsed < 30
    record(3, "optimal p_y at or below the 10001-point grid minimum", ok,
           f"max(avg_mse - grid min)={worst_gap:.1e}, max |p - argmin|={worst_arg:.1e} over {strict} curved cases, {elapsed:.2f}s")
    assert ok


# 4 -------------------------------------------------------------------------


def test_criterion_04_variance_forms_agree():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        a, b = rng.uniform(size=2)
        ctx = PairContext.from_epsilon(
            np.array([a, 1 - a]), np.array([b, 1 - b]), float(rng.uniform(0.05, 8)), float(10 ** rng.uniform(0, 6))
        )
        p = float(rng.uniform())
        worst = max(worst, float(np.max(np.abs(variance_binary_form(ctx, p) - variance_general_form(ctx, p)))))
    ok = worst <= 1e-12
    record(4, "(1/4 - B^2) and pi(1 - pi) variance forms agree at k=2", ok, f"1000 inputs, max diff={worst:.1e}")
    assert ok


# 5 -------------------------------------------------------------------------


def test_criterion_05_phase2_bias_law():
    start = time.perf_counter()
    f_a, f_b, eps, p_y, n_prime, cohorts = (0.3, 0.7), (0.6, 0.4), 1.0, 0.7, 9000, 2000
    rng = np.random.default_rng(5)
    col_a = np.repeat([0, 1], [round(f_a[0] * n_prime), round(f_a[1] * n_prime)])
    col_b = rng.permutation(np.repeat([0, 1], [round(f_b[0] * n_prime), round(f_b[1] * n_prime)]))
    x = np.column_stack([col_a, col_b])
    py = np.array([[1.0, p_y], [p_y, 1.0]])
    ests = np.array([phase2_estimate(corr_rr_phase2_batch(x, eps, (2, 2), py, rng), eps, (2, 2)) for _ in range(cohorts)])
    # ests[c, j, v]
    worst_z = 0.0
    for j, (fa, fb) in enumerate(((f_a, f_b), (f_b, f_a))):
        ctx = PairContext.from_epsilon(np.array(fa), np.array(fb), eps, n_prime)
        for v in range(2):
            e = ests[:, j, v]
            z = abs(e.mean() - fa[v] - ctx.bias(p_y)[v]) / (e.std(ddof=1) / math.sqrt(cohorts))
            worst_z = max(worst_z, z)
    elapsed = time.perf_counter() - start
    ok = worst_z <= 4 and elapsed < 120
    record(5, "Phase-II mean bias matches (d0 + p_y e)/2", ok,
           f"{cohorts} cohorts, worst |z|={worst_z:.2f} (limit 4), {elapsed:.1f}s")
    assert ok


# 6 -------------------------------------------------------------------------


def test_criterion_06_binary_headline():
    start = time.perf_counter()
    cfg = ExperimentConfig.from_dict({
        "sources": [synth_source(10**4, 2, 2, 0.9, seed=6)],
        "mechanisms": ["SPL", "CORR_RR"],
        "epsilons": [1.0],
        "phase1_fractions": [0.1],
        "repetitions": 200,
        "seed": 6,
    })
    spl, corr = run_experiment(cfg)
    ratio = corr.mse_mean / spl.mse_mean
    elapsed = time.perf_counter() - start
    ok = ratio <= 0.6 and elapsed < 180
    record(6, "binary rho=0.9: Corr-RR MSE <= 0.6 x SPL MSE", ok,
           f"Corr-RR {corr.mse_mean:.3e} / SPL {spl.mse_mean:.3e} = {ratio:.3f}, {elapsed:.1f}s")
    assert ok


# 7 -------------------------------------------------------------------------


def test_criterion_07_correlation_trend():
    cfg = ExperimentConfig.from_dict({
        "sources": [synth_source(10**4, 6, 10, 0.1, seed=7), synth_source(10**4, 6, 10, 0.9, seed=7)],
        "mechanisms": ["SPL", "CORR_RR"],
        "epsilons": [1.0],
        "repetitions": 100,
        "seed": 7,
    })
    rows = {(r.source, r.mechanism): r for r in run_experiment(cfg)}
    lo, hi = rows[("rho=0.1", "CORR_RR")], rows[("rho=0.9", "CORR_RR")]
    s_lo, s_hi = rows[("rho=0.1", "SPL")], rows[("rho=0.9", "SPL")]
    reduction = 1 - hi.mse_mean / lo.mse_mean
    spl_z = abs(s_lo.mse_mean - s_hi.mse_mean) / pooled_se(s_lo, s_hi)
    ok = reduction >= 0.2 and spl_z < 2
    record(7, "Corr-RR MSE at rho=0.9 >= 20% below rho=0.1; SPL flat in rho", ok,
           f"Corr-RR {lo.mse_mean:.3e} -> {hi.mse_mean:.3e} ({100 * reduction:.1f}% lower); "
           f"SPL gap {spl_z:.2f} pooled SE")
    assert ok


# 8 -------------------------------------------------------------------------


def test_criterion_08_epsilon_monotone():
    cfg = ExperimentConfig.from_dict({
        "sources": [synth_source(10**4, 4, 10, 0.5, seed=8)],
        "mechanisms": ["SPL", "RSFD", "RSRFD", "CORR_RR"],
        "epsilons": [1.0, 3.0, 5.0],
        "repetitions": 100,
        "seed": 8,
    })
    rows = {(r.mechanism, r.epsilon): r for r in run_experiment(cfg)}
    worst_z, ok = math.inf, True
    for mech in cfg.mechanisms:
        for a, b in ((1.0, 3.0), (3.0, 5.0)):
            ra, rb = rows[(mech, a)], rows[(mech, b)]
            z = (ra.mse_mean - rb.mse_mean) / pooled_se(ra, rb)
            worst_z = min(worst_z, z)
            ok &= z > 2
    record(8, "every mechanism: MSE(eps=1) > MSE(eps=3) > MSE(eps=5) by > 2 pooled SE", ok,
           f"smallest gap {worst_z:.1f} pooled SE")
    assert ok


# 9 -------------------------------------------------------------------------


def test_criterion_09_phase_fraction_sweep():
    fractions = [0.05, 0.1, 0.2, 0.4, 0.6]
    cfg = ExperimentConfig.from_dict({
        "sources": [synth_source(10**4, 2, 10, 0.5, seed=9)],
        "mechanisms": ["SPL", "RSFD", "RSRFD", "CORR_RR"],
        "epsilons": [1.0],
        "phase1_fractions": fractions,
        "repetitions": 100,
        "seed": 9,
        "timing": False,
    })
    rows = run_experiment(cfg)
    corr = {r.phase1_fraction: r.mse_mean for r in rows if r.mechanism == "CORR_RR"}
    sweet = all(corr[0.1] <= corr[f] for f in fractions if f >= 0.4)
    flat = True
    for mech in ("SPL", "RSFD", "RSRFD"):
        keyed = {(r.mse_mean, r.mse_std, r.runs) for r in rows if r.mechanism == mech}
        flat &= len(keyed) == 1
    ok = sweet and flat
    detail = ", ".join(f"{f:g}: {corr[f]:.3e}" for f in fractions)
    record(9, "Corr-RR MSE at fraction 0.1 <= fractions >= 0.4; baselines flat", ok,
           f"{detail}; baselines identical={flat}")
    assert ok


# 10 ------------------------------------------------------------------------

RAW_NAMES = {
    "mushroom": ("agaricus-lepiota.data", "mushroom.data", "mushroom.csv"),
    "nursery": ("nursery.data", "nursery.csv"),
    "clave": ("ClaveVectors_Firm-Teacher_Model.txt", "clave.txt", "clave.csv"),
}


def _find_raw(name):
    root = os.environ.get("CORR_RR_DATA_DIR")
    if not root:
        return None
    for candidate in RAW_NAMES[name]:
        path = Path(root) / candidate
        if path.exists():
            return path
    return None


def test_criterion_10_real_data(tmp_path):
    title = "real-data recipes give (16,2), (8,3), (9,6); Corr-RR <= SPL on Mushroom"
    found = {name: _find_raw(name) for name in RAW_NAMES}
    if not all(found.values()):
        missing = [n for n, p in found.items() if p is None]
        reason = f"raw files for {', '.join(missing)} not found; set CORR_RR_DATA_DIR"
        skip(10, title, reason)
        pytest.skip(reason)
    shapes = {}
    for name, recipe in (("clave", CLAVE), ("nursery", NURSERY), ("mushroom", MUSHROOM)):
        ds, meta = ingest_file(found[name], recipe)
        shapes[name] = (ds.d, ds.uniform_k, ds.n)
        if name == "mushroom":
            save_dataset(ds, tmp_path / "mushroom.csv", meta)
    dims_ok = (
        shapes["clave"][:2] == (16, 2) and shapes["nursery"][:2] == (8, 3) and shapes["mushroom"][:2] == (9, 6)
    )
    cfg = ExperimentConfig.from_dict({
        "sources": [{"path": str(tmp_path / "mushroom.csv"), "name": "mushroom"}],
        "mechanisms": ["SPL", "CORR_RR"],
        "epsilons": [1.0],
        "repetitions": 100,
        "seed": 10,
    })
    spl, corr = run_experiment(cfg)
    ok = dims_ok and corr.mse_mean <= spl.mse_mean
    record(10, title, ok,
           f"shapes {shapes}; Mushroom Corr-RR/SPL = {corr.mse_mean / spl.mse_mean:.3f}")
    assert ok
