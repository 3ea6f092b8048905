"""Generalized randomized response (k-ary GRR)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CountMismatch, DomainViolation, RngStream, check_domain_size, check_epsilon


@dataclass(frozen=True)
class GrrParams:
    """Keep-probability ``p`` and per-other-value probability ``q`` for one (epsilon, k)."""

    epsilon: float
    k: int
    p: float
    q: float

    @property
    def delta(self) -> float:
        return self.p - self.q


def grr_params(epsilon: float, k: int) -> GrrParams:
    k = check_domain_size(k)
    epsilon = check_epsilon(epsilon)
    # p = e^eps / (e^eps + k - 1), written to stay finite for large epsilon
    q = 1.0 / (math.exp(epsilon) + k - 1) if epsilon < 700 else 0.0
    p = 1.0 / (1.0 + (k - 1) * math.exp(-epsilon))
    return GrrParams(epsilon=epsilon, k=k, p=p, q=q)


def grr_perturb(v: int, params: GrrParams, rng: RngStream) -> int:
    """Report ``v`` w.p. ``p``, otherwise a uniformly chosen other value.

    Consumes one uniform draw, plus one integer draw on the flip branch.
    """
    if not 0 <= v < params.k:
        raise DomainViolation(0, 0, v, params.k)
    if rng.random() < params.p:
        return int(v)
    return int((v + rng.integers(1, params.k)) % params.k)


def grr_perturb_many(values: np.ndarray, params: GrrParams, rng: RngStream) -> np.ndarray:
    """Vectorised :func:`grr_perturb` over an integer array."""
    values = np.asarray(values, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= params.k):
        i = int(np.flatnonzero((values < 0) | (values >= params.k))[0])
        raise DomainViolation(i, 0, int(values.flat[i]), params.k)
    keep = rng.random(values.shape) < params.p
    shift = rng.integers(1, params.k, size=values.shape)
    return np.where(keep, values, (values + shift) % params.k)


def grr_estimate(counts, n: float, params: GrrParams) -> np.ndarray:
    """Unbiased frequency estimate ``(c_v/n - q) / (p - q)``; not clamped."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (params.k,):
        raise CountMismatch(f"expected {params.k} tallies, got shape {counts.shape}")
    if n < 1 or not math.isclose(counts.sum(), n, rel_tol=1e-12, abs_tol=1e-9):
        raise CountMismatch(f"tallies sum to {counts.sum()}, expected n={n}")
    return (counts / n - params.q) / params.delta


def grr_variance(epsilon: float, k: int, n: int) -> float:
    """Approximate estimator variance ``(e^eps + k - 2) / (n (e^eps - 1)^2)``."""
    k = check_domain_size(k)
    epsilon = check_epsilon(epsilon)
    if n < 1:
        raise CountMismatch(f"n must be >= 1, got {n}")
    return (math.exp(epsilon) + k - 2) / (n * math.expm1(epsilon) ** 2)


def grr_channel(params: GrrParams) -> np.ndarray:
    """k x k matrix ``M[y, x] = Pr[output y | input x]``."""
    m = np.full((params.k, params.k), params.q)
    np.fill_diagonal(m, params.p)
    return m


def ldp_ratio(channel: np.ndarray) -> float:
    """Largest ``M[y, x] / M[y, x']`` over outputs and input pairs.

    0/0 counts as 1 and positive/0 as infinity.
    """
    m = np.asarray(channel, dtype=float)
    hi = m.max(axis=1)
    lo = m.min(axis=1)
    ratio = 1.0
    for h, l in zip(hi, lo):
        if h == 0:
            continue
        if l == 0:
            return math.inf
        ratio = max(ratio, h / l)
    return float(ratio)
