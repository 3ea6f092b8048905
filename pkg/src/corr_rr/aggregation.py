"""Server-side marginal estimators for each mechanism.

Each estimator has a ``*_from_counts`` form taking per-attribute tallies
(real-valued tallies are accepted, which is how the exact-expectation tests
drive them) and a batch form that tallies a report array first. Outputs are
raw, unclamped estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EmptyPhase, MarginalTable, ShapeError, check_epsilon
from .grr import grr_params
from .mechanisms import _check_prior


@dataclass(frozen=True)
class ReportBatch:
    """Report vectors from one mechanism run (``phase`` is "I"/"II" for Corr-RR)."""

    values: np.ndarray
    mechanism: str
    epsilon: float
    domains: tuple
    phase: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64).reshape(-1, len(self.domains))
        object.__setattr__(self, "values", values)
        if self.phase is not None and self.phase not in ("I", "II"):
            raise ShapeError(f"phase must be 'I' or 'II', got {self.phase!r}")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _values(batch, epsilon, domains) -> np.ndarray:
    if isinstance(batch, ReportBatch):
        if tuple(batch.domains) != tuple(domains):
            raise ShapeError(f"batch domains {batch.domains} != {tuple(domains)}")
        if not np.isclose(batch.epsilon, epsilon):
            raise ShapeError(f"batch epsilon {batch.epsilon} != {epsilon}")
        return batch.values
    values = np.asarray(batch, dtype=np.int64)
    if values.size == 0:
        return values.reshape(0, len(domains))
    if values.ndim != 2 or values.shape[1] != len(domains):
        raise ShapeError(f"reports must have shape (n, {len(domains)}), got {values.shape}")
    return values


def attribute_counts(values: np.ndarray, domains) -> list[np.ndarray]:
    values = np.asarray(values, dtype=np.int64).reshape(-1, len(domains))
    return [np.bincount(values[:, j], minlength=k).astype(float) for j, k in enumerate(domains)]


def _check_counts(counts, n, domains) -> list[np.ndarray]:
    if len(counts) != len(domains):
        raise ShapeError(f"got tallies for {len(counts)} attributes, expected {len(domains)}")
    rows = [np.asarray(c, dtype=float) for c in counts]
    for j, (c, k) in enumerate(zip(rows, domains)):
        if c.shape != (k,):
            raise ShapeError(f"attribute {j}: expected {k} tallies, got {c.shape}")
    if n <= 0:
        raise EmptyPhase("no reports to estimate from")
    return rows


def spl_from_counts(counts, n, epsilon, domains) -> MarginalTable:
    epsilon = check_epsilon(epsilon)
    d = len(domains)
    out = []
    for c, k in zip(_check_counts(counts, n, domains), domains):
        par = grr_params(epsilon / d, k)
        out.append((c - n * par.q) / (n * par.delta))
    return out


def full_budget_from_counts(counts, n, epsilon, domains) -> MarginalTable:
    """Per-attribute GRR(epsilon) inversion (the Phase-II estimator)."""
    epsilon = check_epsilon(epsilon)
    out = []
    for c, k in zip(_check_counts(counts, n, domains), domains):
        par = grr_params(epsilon, k)
        out.append((c - n * par.q) / (n * par.delta))
    return out


def rsrfd_from_counts(counts, n, epsilon, domains, prior) -> MarginalTable:
    """Invert ``Pr[Y_j = v] = (q + delta f_j(v)) / d + (d - 1) prior_j(v) / d``."""
    epsilon = check_epsilon(epsilon)
    prior = _check_prior(prior, domains)
    d = len(domains)
    out = []
    for c, k, pi in zip(_check_counts(counts, n, domains), domains, prior):
        par = grr_params(epsilon, k)
        out.append(d * (c / n - (d - 1) * pi / d - par.q / d) / par.delta)
    return out


def rsfd_from_counts(counts, n, epsilon, domains) -> MarginalTable:
    uniform = [np.full(k, 1.0 / k) for k in domains]
    return rsrfd_from_counts(counts, n, epsilon, domains, uniform)


def spl_estimate(batch, epsilon, domains) -> MarginalTable:
    values = _values(batch, epsilon, domains)
    return spl_from_counts(attribute_counts(values, domains), values.shape[0], epsilon, domains)


def rsfd_estimate(batch, epsilon, domains) -> MarginalTable:
    values = _values(batch, epsilon, domains)
    return rsfd_from_counts(attribute_counts(values, domains), values.shape[0], epsilon, domains)


def rsrfd_estimate(batch, epsilon, domains, prior) -> MarginalTable:
    values = _values(batch, epsilon, domains)
    return rsrfd_from_counts(attribute_counts(values, domains), values.shape[0], epsilon, domains, prior)


def phase2_estimate(batch, epsilon, domains) -> MarginalTable:
    """Phase-II estimate: each column inverted as if it were GRR(epsilon). Biased."""
    values = _values(batch, epsilon, domains)
    return full_budget_from_counts(attribute_counts(values, domains), values.shape[0], epsilon, domains)


def combine_phases(est1: MarginalTable | None, n1: int, est2: MarginalTable | None, n2: int) -> MarginalTable:
    """Count-weighted average ``(n1 * est1 + n2 * est2) / (n1 + n2)``."""
    if n1 == 0:
        return [np.array(r, dtype=float) for r in est2]
    if n2 == 0:
        return [np.array(r, dtype=float) for r in est1]
    n = n1 + n2
    return [(n1 * a + n2 * b) / n for a, b in zip(est1, est2)]


def corr_rr_estimate(phase1, phase2, epsilon, domains) -> MarginalTable:
    """Combine the Phase-I (SPL at epsilon/d) and Phase-II estimates by user count."""
    v1 = _values(phase1, epsilon, domains)
    v2 = _values(phase2, epsilon, domains)
    n1, n2 = v1.shape[0], v2.shape[0]
    if n1 + n2 == 0:
        raise EmptyPhase("both phases are empty")
    est1 = spl_from_counts(attribute_counts(v1, domains), n1, epsilon, domains) if n1 else None
    est2 = phase2_estimate(v2, epsilon, domains) if n2 else None
    return combine_phases(est1, n1, est2, n2)
