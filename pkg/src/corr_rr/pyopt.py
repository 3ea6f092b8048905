"""Analytic Phase-II MSE model and the optimal copy probability p_y.

Two attributes ``a`` and ``b`` over a common domain of size ``k``. A Phase-II
user perturbs one of them with GRR(epsilon) (fair coin) and, when ``b`` was
picked, reports ``a`` as a copy of ``y_b`` with probability ``p_y`` and as
one of the other ``k - 1`` values otherwise. The per-value report
probability for ``a`` is affine in ``p_y``::

    pi_v = alpha_v + beta_v * p_y
    bias_v = (d0_v + p_y * e_v) / 2
    mse_v = bias_v**2 + pi_v * (1 - pi_v) / (n' * delta**2)

With ``exact_kary=True`` (default) ``d0`` and ``e`` are the exact k-ary
terms ``(1 - f_b)/(k - 1) - f_a`` and ``(k f_b - 1)/(k - 1)``; at ``k == 2``
they reduce to ``1 - f_a - f_b`` and ``2 f_b - 1``, which is what
``exact_kary=False`` uses for every ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import HeterogeneousDomains, ShapeError, check_epsilon, is_normalized
from .grr import grr_params

FLAT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PairContext:
    f_a: np.ndarray
    f_b: np.ndarray
    delta: float
    n_prime: float
    exact_kary: bool = True
    k: int = field(init=False)

    def __post_init__(self):
        f_a = np.asarray(self.f_a, dtype=float)
        f_b = np.asarray(self.f_b, dtype=float)
        if f_a.ndim != 1 or f_a.shape != f_b.shape or f_a.size < 2:
            raise ShapeError(f"marginals must be equal-length vectors, got {f_a.shape} and {f_b.shape}")
        if not is_normalized([f_a, f_b]):
            raise ShapeError("marginals must be probability vectors")
        if not 0 < self.delta < 1:
            raise ShapeError(f"delta must lie in (0, 1), got {self.delta}")
        if self.n_prime < 1:
            raise ShapeError(f"n_prime must be >= 1, got {self.n_prime}")
        object.__setattr__(self, "f_a", f_a)
        object.__setattr__(self, "f_b", f_b)
        object.__setattr__(self, "k", f_a.size)

    @classmethod
    def from_epsilon(cls, f_a, f_b, epsilon, n_prime, exact_kary=True) -> "PairContext":
        par = grr_params(check_epsilon(epsilon), len(f_a))
        return cls(f_a, f_b, par.delta, n_prime, exact_kary)

    def swapped(self) -> "PairContext":
        return PairContext(self.f_b, self.f_a, self.delta, self.n_prime, self.exact_kary)

    @property
    def q(self) -> float:
        return (1 - self.delta) / self.k

    @property
    def d0(self) -> np.ndarray:
        if self.exact_kary:
            return (1 - self.f_b) / (self.k - 1) - self.f_a
        return 1 - self.f_a - self.f_b

    @property
    def a0(self) -> np.ndarray:
        return self.f_a - self.f_b

    @property
    def e(self) -> np.ndarray:
        if self.exact_kary:
            return (self.k * self.f_b - 1) / (self.k - 1)
        return 2 * self.f_b - 1

    @property
    def alpha(self) -> np.ndarray:
        return self.q + self.delta / 2 * (self.d0 + 2 * self.f_a)

    @property
    def beta(self) -> np.ndarray:
        return self.delta / 2 * self.e

    def pi(self, p_y: float) -> np.ndarray:
        return self.alpha + self.beta * p_y

    def bias(self, p_y: float) -> np.ndarray:
        """Expected Phase-II estimate of ``f_a`` minus ``f_a`` (the A(v) term)."""
        return (self.d0 + p_y * self.e) / 2

    def b_term(self, p_y: float) -> np.ndarray:
        """``delta/2 * (a0 + p_y e)``; equals ``pi - 1/2`` only when k == 2."""
        return self.delta / 2 * (self.a0 + p_y * self.e)

    @property
    def noise_scale(self) -> float:
        return self.n_prime * self.delta**2


def variance_binary_form(ctx: PairContext, p_y: float) -> np.ndarray:
    """``(1/4 - B^2) / (n' delta^2)`` per value; valid for k == 2 only."""
    return (0.25 - ctx.b_term(p_y) ** 2) / ctx.noise_scale


def variance_general_form(ctx: PairContext, p_y: float) -> np.ndarray:
    pi = ctx.pi(p_y)
    return pi * (1 - pi) / ctx.noise_scale


def phase2_value_mse(ctx: PairContext, v: int, p_y: float) -> float:
    """MSE of the Phase-II estimate of ``f_a(v)``."""
    if not 0 <= v < ctx.k:
        raise ShapeError(f"value {v} outside 0..{ctx.k - 1}")
    if ctx.k == 2:
        var = variance_binary_form(ctx, p_y)[v]
    else:
        var = variance_general_form(ctx, p_y)[v]
    return float(ctx.bias(p_y)[v] ** 2 + var)


def _side_mse(ctx: PairContext, p_y: float) -> float:
    return float(np.mean(ctx.bias(p_y) ** 2 + variance_general_form(ctx, p_y)))


def avg_mse(ctx: PairContext, p_y: float) -> float:
    """Phase-II MSE averaged over both attributes and all k values."""
    return 0.5 * (_side_mse(ctx, p_y) + _side_mse(ctx.swapped(), p_y))


def quadratic_coefficients(ctx: PairContext) -> tuple[float, float, float]:
    """``(c0, c1, c2)`` with ``avg_mse(p) == c0 + c1 p + c2 p**2``."""
    c = np.zeros(3)
    for side in (ctx, ctx.swapped()):
        a, b, s = side.alpha, side.beta, side.noise_scale
        c[0] += np.mean(side.d0**2 / 4 + a * (1 - a) / s)
        c[1] += np.mean(side.d0 * side.e / 2 + b * (1 - 2 * a) / s)
        c[2] += np.mean(side.e**2 / 4 - b**2 / s)
    c /= 2
    return float(c[0]), float(c[1]), float(c[2])


def optimal_py(ctx: PairContext) -> float:
    """Minimise :func:`avg_mse` over ``[0, 1]``.

    Candidates are the parabola vertex (clamped, only when the quadratic
    term is positive) and both endpoints. A flat objective returns 0.5.
    """
    _, c1, c2 = quadratic_coefficients(ctx)
    if abs(c2) < FLAT_TOL and abs(c1) < FLAT_TOL:
        return 0.5
    candidates = []
    if c2 > 0:
        candidates.append(min(1.0, max(0.0, -c1 / (2 * c2))))
    candidates += [0.0, 1.0]
    return min(candidates, key=lambda p: avg_mse(ctx, p))


def closed_form_py(ctx: PairContext) -> float:
    """A simplified closed-form ratio, unclamped.

    Kept for comparison only; it drops the delta-dependent variance terms
    that :func:`optimal_py` accounts for. NaN when the denominator vanishes.
    """
    k, n = ctx.k, ctx.n_prime
    d0, e, a0 = ctx.d0, ctx.e, ctx.a0
    num = np.sum(d0 * e / (2 * k) - a0 * e / (2 * n * k))
    den = np.sum(e**2 / (4 * k) - e**2 / (4 * n * k))
    return float(num / den) if den != 0 else math.nan


def infer_py_matrix(marginals, epsilon, n_prime, exact_kary=True) -> np.ndarray:
    """Symmetric d x d matrix of optimal p_y for every attribute pair.

    ``marginals`` should already be clamped-normalized. The diagonal is 1.
    """
    rows = [np.asarray(r, dtype=float) for r in marginals]
    ks = {r.size for r in rows}
    if len(ks) != 1:
        raise HeterogeneousDomains(f"all attributes need the same domain size, got {sorted(ks)}")
    delta = grr_params(check_epsilon(epsilon), ks.pop()).delta
    d = len(rows)
    out = np.eye(d)
    for j in range(d):
        for m in range(j + 1, d):
            p = optimal_py(PairContext(rows[j], rows[m], delta, n_prime, exact_kary))
            out[j, m] = out[m, j] = p
    return out
