"""Client-side perturbation for SPL, RS+FD, RS+RFD and Corr-RR.

Every mechanism comes in two forms: a per-record function returning a
:class:`PerturbedRecord` (handy in tests, it exposes the selected attribute)
and a ``*_batch`` function that perturbs an ``(n, d)`` array in one go. The
batch form is what the experiment harness uses.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    DomainViolation,
    HeterogeneousDomains,
    PriorShapeError,
    RngStream,
    ShapeError,
    TooLarge,
    check_epsilon,
    is_normalized,
)
from .grr import grr_channel, grr_params, grr_perturb_many

SPL = "SPL"
RSFD = "RSFD"
RSRFD = "RSRFD"
CORR_RR = "CORR_RR"
MECHANISMS = (SPL, RSFD, RSRFD, CORR_RR)

CHANNEL_LIMIT = 4096


@dataclass(frozen=True)
class PerturbedRecord:
    values: tuple
    # index perturbed at full epsilon; bookkeeping only, never reported
    selected_index: int | None = None


# A pairwise py model is a symmetric (d, d) float array; the diagonal is unused.
PairwisePyModel = np.ndarray


def _as_records(records, domains) -> np.ndarray:
    arr = np.asarray(records, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != len(domains):
        raise ShapeError(f"records must have {len(domains)} columns, got shape {arr.shape}")
    bad = (arr < 0) | (arr >= np.asarray(domains)[None, :])
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise DomainViolation(i, j, int(arr[i, j]), int(domains[j]))
    return arr


def _check_prior(prior, domains) -> list[np.ndarray]:
    if len(prior) != len(domains):
        raise PriorShapeError(f"prior has {len(prior)} rows, expected {len(domains)}")
    rows = [np.asarray(r, dtype=float) for r in prior]
    for j, (row, k) in enumerate(zip(rows, domains)):
        if row.shape != (k,):
            raise PriorShapeError(f"prior row {j} has shape {row.shape}, expected ({k},)")
    if not is_normalized(rows):
        raise PriorShapeError("prior rows must be probability vectors")
    return rows


def check_py_model(py_model, d: int) -> np.ndarray:
    m = np.asarray(py_model, dtype=float)
    if m.shape != (d, d):
        raise ShapeError(f"py model must be {d}x{d}, got {m.shape}")
    off = ~np.eye(d, dtype=bool)
    if np.any((m[off] < 0) | (m[off] > 1)):
        raise ShapeError("py entries must lie in [0, 1]")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        raise ShapeError("py model must be symmetric")
    return m


def _common_k(domains) -> int:
    ks = set(int(k) for k in domains)
    if len(ks) != 1:
        raise HeterogeneousDomains(f"Corr-RR needs equal domain sizes, got {sorted(ks)}")
    return ks.pop()


# -- batch forms ---------------------------------------------------------


def spl_perturb_batch(records, epsilon, domains, rng: RngStream) -> np.ndarray:
    """GRR at ``epsilon / d`` applied independently to each attribute."""
    epsilon = check_epsilon(epsilon)
    x = _as_records(records, domains)
    d = len(domains)
    out = np.empty_like(x)
    for j, k in enumerate(domains):
        out[:, j] = grr_perturb_many(x[:, j], grr_params(epsilon / d, k), rng)
    return out


def _random_sampling(x, selected, epsilon, domains, rng, fake):
    out = np.empty_like(x)
    for j, k in enumerate(domains):
        noisy = grr_perturb_many(x[:, j], grr_params(epsilon, k), rng)
        out[:, j] = np.where(selected == j, noisy, fake(j, k, x.shape[0]))
    return out


def rsfd_perturb_batch(records, epsilon, domains, rng: RngStream, selected=None) -> np.ndarray:
    """One uniformly sampled attribute via GRR(epsilon); the rest uniform fakes."""
    epsilon = check_epsilon(epsilon)
    x = _as_records(records, domains)
    if selected is None:
        selected = rng.integers(len(domains), size=x.shape[0])
    return _random_sampling(
        x, selected, epsilon, domains, rng, lambda j, k, n: rng.integers(k, size=n)
    )


def rsrfd_perturb_batch(records, epsilon, domains, prior, rng: RngStream, selected=None) -> np.ndarray:
    """As RS+FD, but fake values for attribute ``m`` are drawn from ``prior[m]``."""
    epsilon = check_epsilon(epsilon)
    prior = _check_prior(prior, domains)
    x = _as_records(records, domains)
    if selected is None:
        selected = rng.integers(len(domains), size=x.shape[0])
    cdfs = [np.cumsum(p) for p in prior]

    def fake(j, k, n):
        u = rng.random(n) * cdfs[j][-1]
        return np.minimum(np.searchsorted(cdfs[j], u, side="right"), k - 1)

    return _random_sampling(x, selected, epsilon, domains, rng, fake)


def corr_rr_phase2_batch(records, epsilon, domains, py_model, rng: RngStream, selected=None) -> np.ndarray:
    """Phase-II Corr-RR: GRR(epsilon) on one attribute, the others derived from it.

    An unselected attribute ``m`` copies the selected report ``y_j`` with
    probability ``py[j, m]``; otherwise it takes one of the other ``k - 1``
    values uniformly. The true value of ``m`` is never read.
    """
    epsilon = check_epsilon(epsilon)
    k = _common_k(domains)
    x = _as_records(records, domains)
    n, d = x.shape
    py = check_py_model(py_model, d)
    if selected is None:
        selected = rng.integers(d, size=n)
    rows = np.arange(n)
    y_sel = grr_perturb_many(x[rows, selected], grr_params(epsilon, k), rng)
    out = np.empty_like(x)
    for m in range(d):
        copy = rng.random(n) < py[selected, m]
        other = (y_sel + rng.integers(1, k, size=n)) % k
        out[:, m] = np.where(selected == m, y_sel, np.where(copy, y_sel, other))
    return out


# -- per-record forms ----------------------------------------------------


def spl_perturb(record, epsilon, domains, rng: RngStream) -> PerturbedRecord:
    out = spl_perturb_batch([record], epsilon, domains, rng)[0]
    return PerturbedRecord(tuple(int(v) for v in out))


def rsfd_perturb(record, epsilon, domains, rng: RngStream) -> PerturbedRecord:
    sel = rng.integers(len(domains), size=1)
    out = rsfd_perturb_batch([record], epsilon, domains, rng, selected=sel)[0]
    return PerturbedRecord(tuple(int(v) for v in out), int(sel[0]))


def rsrfd_perturb(record, epsilon, domains, prior, rng: RngStream) -> PerturbedRecord:
    _check_prior(prior, domains)
    sel = rng.integers(len(domains), size=1)
    out = rsrfd_perturb_batch([record], epsilon, domains, prior, rng, selected=sel)[0]
    return PerturbedRecord(tuple(int(v) for v in out), int(sel[0]))


def corr_rr_phase2_perturb(record, epsilon, domains, py_model, rng: RngStream) -> PerturbedRecord:
    _common_k(domains)
    sel = rng.integers(len(domains), size=1)
    out = corr_rr_phase2_batch([record], epsilon, domains, py_model, rng, selected=sel)[0]
    return PerturbedRecord(tuple(int(v) for v in out), int(sel[0]))


# -- exact channels ------------------------------------------------------


def enumerate_records(d: int, k: int) -> np.ndarray:
    """All ``k**d`` records in lexicographic order, shape ``(k**d, d)``."""
    return np.array(list(itertools.product(range(k), repeat=d)), dtype=np.int64).reshape(-1, d)


def mechanism_channel(mechanism: str, epsilon: float, d: int, k: int, py_model=None, prior=None) -> np.ndarray:
    """Exact full-record channel ``M[y, x]`` over all ``k**d`` records.

    ``mechanism`` is one of SPL, RSFD, RSRFD, CORR_RR (the Phase-II channel;
    Phase-I users run SPL) or GRR (only valid for ``d == 1``). Random
    attribute selection is averaged out analytically.
    """
    epsilon = check_epsilon(epsilon)
    if k ** d > CHANNEL_LIMIT:
        raise TooLarge(f"k**d = {k ** d} exceeds the enumeration guard {CHANNEL_LIMIT}")
    mechanism = mechanism.upper().replace("+", "").replace("-", "_")
    recs = enumerate_records(d, k)
    Y, X = recs[:, None, :], recs[None, :, :]

    if mechanism in ("SPL", "CORR_RR_PHASE1", "GRR"):
        if mechanism == "GRR" and d != 1:
            raise ShapeError("GRR channel is single-attribute; use d=1")
        g = grr_channel(grr_params(epsilon / d, k))
        out = np.ones((len(recs), len(recs)))
        for j in range(d):
            out *= g[Y[..., j], X[..., j]]
        return out

    g = grr_channel(grr_params(epsilon, k))
    if mechanism == "RSFD":
        fill = [np.full(k, 1.0 / k)] * d
    elif mechanism == "RSRFD":
        fill = _check_prior(prior if prior is not None else [np.full(k, 1.0 / k)] * d, [k] * d)
    elif mechanism in ("CORR_RR", "CORR_RR_PHASE2"):
        py = check_py_model(py_model if py_model is not None else np.full((d, d), 0.5), d)
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")

    out = np.zeros((len(recs), len(recs)))
    for j in range(d):
        term = g[Y[..., j], X[..., j]]
        for m in range(d):
            if m == j:
                continue
            if mechanism in ("RSFD", "RSRFD"):
                term = term * fill[m][Y[..., m]]
            else:
                same = Y[..., m] == Y[..., j]
                term = term * np.where(same, py[j, m], (1 - py[j, m]) / (k - 1))
        out += term
    return out / d
