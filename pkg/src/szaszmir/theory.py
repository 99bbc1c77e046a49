"""Closed-form asymptotic expansions for the smoothed empirical CDF.

For a twice continuously differentiable F and interior x, the smoothed
estimator with levels m = (m_1, ..., m_d) satisfies

    bias     =  (1/2) sum_j (x_j / m_j) d2F/dx_j2 (x)      + o(1/min m)
    variance =  sigma^2(x)/n - V(x; m)/n                   + o(1/(n sqrt(min m)))

with sigma^2 = F (1 - F) and V(x; m) = sum_j m_j^{-1/2} dF/dx_j (x)
sqrt(x_j / pi).  Balancing squared bias against the variance gain gives
the pointwise optimum m_opt = n^{2/3} (4 B^2 / V)^{2/3} for
B = (1/2) sum_j x_j d2F/dx_j2.

In the boundary layer x = lam / m the picture changes: the bias drops
to second order,

    bias = (1/2) sum_j (lam_j / m_j^2) d2F/dx_j2 (x^{(j,0)}) + o(1/(min m)^2),

where x^{(j,0)} zeroes the j-th coordinate, while the variance keeps no
m-dependent gain at leading order, so no smoothing level is optimal
there.

Deficiency translates the variance gain into sample-size currency: the
number of raw-empirical observations needed to match the smoothed
estimator's mean squared error.  ``deficiency_exact`` inverts
MSE(F_k) = sigma^2 / k exactly; ``deficiency_asymptotic`` evaluates the
two regime formulas.

Everything here is deterministic; the Monte Carlo counterparts live in
``validation``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from . import specialfn
from .estimators import as_smoothing, smoothed_operator
from .models import DistributionModel

__all__ = [
    "InteriorExpansion",
    "BoundaryExpansion",
    "pointwise_coefficients",
    "integrated_coefficients",
    "interior_bias",
    "interior_variance",
    "interior_expansion",
    "m_opt_pointwise",
    "m_opt_integrated",
    "deficiency_exact",
    "deficiency_asymptotic",
    "boundary_bias",
    "boundary_variance",
    "boundary_mse",
    "boundary_expansion",
    "sm_mean_exact",
    "sm_variance_exact",
    "skellam_mean_abs_asymptotic",
    "skellam_mean_abs_exact",
]


@dataclass(frozen=True)
class InteriorExpansion:
    """Leading-order bias, variance and their MSE at an interior point."""

    bias: float
    variance: float

    @property
    def mse(self) -> float:
        return self.bias * self.bias + self.variance


@dataclass(frozen=True)
class BoundaryExpansion:
    """Leading-order bias, variance and their MSE in the boundary layer."""

    bias: float
    variance: float

    @property
    def mse(self) -> float:
        return self.bias * self.bias + self.variance


def _point(x, d: int):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (d,):
        raise ValueError(f"point must have shape ({d},), got {arr.shape}")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError(f"point must be finite and nonnegative, got {x!r}")
    return arr


def pointwise_coefficients(model: DistributionModel, x):
    """(sigma^2, V, B) at ``x``: variance level, variance-gain and bias slopes.

    V(x) = sum_j dF/dx_j sqrt(x_j / pi),  B(x) = (1/2) sum_j x_j d2F/dx_j2.
    """
    x = _point(x, model.d)
    row = x[None, :]
    f = float(model.cdf(row)[0])
    sigma2 = f * (1.0 - f)
    v = 0.0
    b = 0.0
    for j in range(model.d):
        v += float(model.partial(j, row)[0]) * math.sqrt(x[j] / math.pi)
        b += 0.5 * x[j] * float(model.partial2(j, row)[0])
    return sigma2, v, b


def integrated_coefficients(model: DistributionModel, grid):
    """(int sigma^2, int V, int B^2) over the grid's integration region."""
    pts = grid.points
    f = model.cdf(pts)
    sigma2 = f * (1.0 - f)
    v = np.zeros(pts.shape[0])
    b = np.zeros(pts.shape[0])
    for j in range(model.d):
        v += model.partial(j, pts) * np.sqrt(pts[:, j] / math.pi)
        b += 0.5 * pts[:, j] * model.partial2(j, pts)
    w = grid.cell_weight
    return w * sigma2.sum(), w * v.sum(), w * (b * b).sum()


def interior_bias(model: DistributionModel, m, x) -> float:
    """Leading bias (1/2) sum_j (x_j / m_j) d2F/dx_j2 (x)."""
    x = _point(x, model.d)
    m = as_smoothing(m, model.d)
    row = x[None, :]
    total = 0.0
    for j in range(model.d):
        total += 0.5 * (x[j] / m[j]) * float(model.partial2(j, row)[0])
    return total


def interior_variance(model: DistributionModel, m, x, n: int) -> float:
    """Leading variance (sigma^2(x) - V(x; m)) / n."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    x = _point(x, model.d)
    m = as_smoothing(m, model.d)
    row = x[None, :]
    f = float(model.cdf(row)[0])
    gain = 0.0
    for j in range(model.d):
        gain += float(model.partial(j, row)[0]) * math.sqrt(x[j] / math.pi) / math.sqrt(m[j])
    return (f * (1.0 - f) - gain) / n


def interior_expansion(model: DistributionModel, m, x, n: int) -> InteriorExpansion:
    """Bundle of the interior bias/variance expansions at (m, n, x)."""
    return InteriorExpansion(
        bias=interior_bias(model, m, x), variance=interior_variance(model, m, x, n)
    )


def m_opt_pointwise(model: DistributionModel, x, n: int):
    """Pointwise MSE-optimal level n^{2/3} (4 B^2 / V)^{2/3}.

    Returns ``None`` when V(x) B(x) = 0: with no bias term there is no
    finite optimum, and with no variance gain no level helps.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    _, v, b = pointwise_coefficients(model, x)
    if v * b == 0.0:
        return None
    return float(n ** (2.0 / 3.0) * (4.0 * b * b / v) ** (2.0 / 3.0))


def m_opt_integrated(model: DistributionModel, grid, n: int):
    """Level minimizing the integrated MSE expansion over the grid's region.

    Same form as the pointwise rule with B^2 and V replaced by their
    integrals; ``None`` when either integral vanishes.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    _, int_v, int_b2 = integrated_coefficients(model, grid)
    if int_v * int_b2 == 0.0:
        return None
    return float(n ** (2.0 / 3.0) * (4.0 * int_b2 / int_v) ** (2.0 / 3.0))


def deficiency_exact(sigma2: float, mse_sm: float) -> int:
    """Smallest k with sigma^2 / k <= ``mse_sm``.

    This is the number of raw empirical-CDF observations needed to
    match the given mean squared error, using MSE(F_k) = sigma^2 / k
    exactly (the empirical CDF is unbiased).
    """
    sigma2 = float(sigma2)
    mse_sm = float(mse_sm)
    if not np.isfinite(sigma2) or sigma2 < 0.0:
        raise ValueError(f"sigma^2 must be finite and nonnegative, got {sigma2!r}")
    if not np.isfinite(mse_sm) or mse_sm <= 0.0:
        raise ValueError(f"target MSE must be finite and positive, got {mse_sm!r}")
    k = max(1, int(math.ceil(sigma2 / mse_sm)))
    while sigma2 / k > mse_sm:
        k += 1
    while k > 1 and sigma2 / (k - 1) <= mse_sm:
        k -= 1
    return k


def deficiency_asymptotic(
    model: DistributionModel,
    x,
    n: int,
    regime: str,
    m: float | None = None,
    c: float | None = None,
    grid=None,
) -> float:
    """Asymptotic prediction of the deficiency L(n) - n.

    ``regime='high'`` (m growing faster than n^{2/3}) needs the level
    ``m`` and returns n V / (sigma^2 sqrt(m)).  ``regime='critical'``
    (m ~ c n^{2/3}) needs ``c`` and returns
    n^{2/3} (V / (sigma^2 sqrt(c)) - B^2 / (sigma^2 c^2)).

    With ``grid`` set, the pointwise coefficients at ``x`` are replaced
    by integrated ones over the grid's region (x is ignored), giving
    the integrated-deficiency prediction.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    if grid is not None:
        sigma2, v, b2 = integrated_coefficients(model, grid)
    else:
        sigma2, v, b = pointwise_coefficients(model, x)
        b2 = b * b
    if sigma2 <= 0.0:
        raise ValueError("sigma^2 vanishes; deficiency is undefined here")
    if regime == "high":
        if m is None:
            raise ValueError("regime 'high' requires the smoothing level m")
        m = float(m)
        if m <= 0.0:
            raise ValueError(f"smoothing level must be positive, got {m!r}")
        return n * v / (sigma2 * math.sqrt(m))
    if regime == "critical":
        if c is None:
            raise ValueError("regime 'critical' requires the rate constant c")
        c = float(c)
        if c <= 0.0:
            raise ValueError(f"rate constant must be positive, got {c!r}")
        return n ** (2.0 / 3.0) * (v / math.sqrt(c) - b2 / (c * c)) / sigma2
    raise ValueError(f"unknown regime {regime!r}; expected 'high' or 'critical'")


def boundary_bias(model: DistributionModel, m, lam) -> float:
    """Boundary-layer bias at x = lam / m.

    (1/2) sum_j (lam_j / m_j^2) d2F/dx_j2 (x^{(j,0)}) with the j-th
    coordinate of x zeroed in the derivative argument (one-sided
    limits at the face).
    """
    m = as_smoothing(m, model.d)
    lam = _point(lam, model.d)
    x = lam / m.astype(np.float64)
    total = 0.0
    for j in range(model.d):
        face = x.copy()
        face[j] = 0.0
        total += 0.5 * (lam[j] / (m[j] * m[j])) * float(model.partial2(j, face[None, :])[0])
    return total


def boundary_variance(model: DistributionModel, m, lam, n: int) -> float:
    """Boundary variance envelope sigma^2(lam / m) / n.

    In the boundary layer the interior's m^{-1/2} variance gain is
    gone: at fixed lam the exact variance is
    sigma^2(x) (1 - E|K - L| / (2 lam_sum-wise)) / n + O(1/(n m^2))
    per coordinate with K, L iid Poisson, a level-free factor, so no
    finite level is optimal.  This function returns the level-free
    envelope sigma^2 / n; ``sm_variance_exact`` gives the exact value.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    m = as_smoothing(m, model.d)
    lam = _point(lam, model.d)
    x = lam / m.astype(np.float64)
    f = float(model.cdf(x[None, :])[0])
    return f * (1.0 - f) / n


def boundary_mse(model: DistributionModel, m, lam, n: int) -> float:
    """Squared boundary bias plus boundary variance."""
    b = boundary_bias(model, m, lam)
    return b * b + boundary_variance(model, m, lam, n)


def boundary_expansion(model: DistributionModel, m, lam, n: int) -> BoundaryExpansion:
    """Bundle of the boundary expansions at (m, n, lam)."""
    return BoundaryExpansion(
        bias=boundary_bias(model, m, lam), variance=boundary_variance(model, m, lam, n)
    )


def sm_mean_exact(cdf_fn, m, x, tail_eps: float = 1e-12, d: int | None = None) -> float:
    """Exact E[F_hat(x)] = (operator applied to F)(x); see ``smoothed_operator``."""
    return smoothed_operator(cdf_fn, m, x, tail_eps=tail_eps, d=d)


def sm_variance_exact(cdf_fn, m, x, n: int, tail_eps: float = 1e-12, d: int | None = None) -> float:
    """Exact variance of the smoothed estimator at ``x`` under F = ``cdf_fn``.

    The per-observation weight has second moment
    E[psi^2] = E[F(min(K, L) / m)] for K, L independent product-Poisson
    vectors with means m_j x_j, because the squared tail is the tail of
    the coordinatewise minimum.  Summing F(k/m) against the exact
    min-distribution weights

        q_j(k) = P{K_j >= k}^2 - P{K_j >= k + 1}^2

    over the concentration box gives E[psi^2] to within ``tail_eps``,
    and Var(F_hat) = (E[psi^2] - E[psi]^2) / n.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if d is None:
        d = x.shape[0]
    x = _point(x, d)
    m = as_smoothing(m, d)
    axes = []
    weights = []
    for j in range(d):
        lam = float(m[j]) * float(x[j])
        if lam <= 0.0:
            ks = np.array([0], dtype=np.int64)
            weights.append(np.array([1.0]))
            axes.append(ks)
            continue
        # the min of two iid counts deviates at most twice as often,
        # so a third of the budget per side keeps the total under tail_eps
        t = specialfn.tail_bound_halfwidth(lam, tail_eps / (3.0 * d))
        lo = max(0, int(math.floor(lam - t)))
        hi = int(math.ceil(lam + t))
        ks = np.arange(lo, hi + 1, dtype=np.int64)
        tails = specialfn.poisson_tail_batch(lam, np.arange(lo, hi + 2, dtype=np.int64))
        weights.append(tails[:-1] ** 2 - tails[1:] ** 2)
        axes.append(ks)
    grids = np.meshgrid(*[a / float(mj) for a, mj in zip(axes, m)], indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=1)
    values = np.asarray(cdf_fn(points), dtype=np.float64).reshape([a.size for a in axes])
    second = values
    for w in reversed(weights):
        second = second @ w
    mean = smoothed_operator(cdf_fn, m, x, tail_eps=tail_eps, d=d)
    return (float(second) - mean * mean) / n


def skellam_mean_abs_asymptotic(lam: float) -> float:
    """Leading term sqrt(4 lam / pi) of E|K - L| for K, L iid Poisson(lam)."""
    if lam < 0.0:
        raise ValueError(f"Poisson mean must be nonnegative, got {lam!r}")
    return math.sqrt(4.0 * lam / math.pi)


def skellam_mean_abs_exact(lam: float) -> float:
    """Exact E|K - L| = 2 lam e^{-2 lam} (I_0(2 lam) + I_1(2 lam))."""
    if lam < 0.0:
        raise ValueError(f"Poisson mean must be nonnegative, got {lam!r}")
    z = 2.0 * lam
    return z * (_sp.ive(0, z) + _sp.ive(1, z))
