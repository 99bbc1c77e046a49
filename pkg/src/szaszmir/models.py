"""Reference distributions, their derivatives, and seeded samplers.

Two families drive the simulation study and the theory checks:

* ``m1`` -- independent Gamma(alpha, beta) marginals (product CDF);
* ``m2`` -- a Clayton copula over the same Gamma marginals, sampled by
  the frailty construction U_j = (1 + E_j / V)^{-1/theta} with
  V ~ Gamma(1/theta) and E_j iid standard exponential.

A one-dimensional exponential/Gamma mixture with a nonvanishing second
derivative at the origin backs the boundary-layer checks, where both
study models have degenerate leading coefficients.

Randomness comes from the counter-based Philox generator keyed by a
64-bit value; substreams for replication r of a cell are derived by a
splitmix64 chain over (master seed, model name, n, r), so any
replication can be reproduced in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import specialfn
from .estimators import Sample

__all__ = [
    "DistributionModel",
    "gamma_product_model",
    "clayton_cdf",
    "clayton_gamma_model",
    "boundary_mixture_model",
    "model_by_name",
    "sample_model",
    "splitmix64",
    "fnv1a64",
    "mix64",
    "substream_seed",
    "make_rng",
]

_MASK64 = (1 << 64) - 1

# below this marginal probability the Clayton factors are evaluated by
# their u -> 0 limits (C_j -> 1); see clayton_gamma_model
_U_TINY = 1e-8


def splitmix64(z: int) -> int:
    """One splitmix64 output step for a 64-bit state."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    """FNV-1a hash of a string, stable across processes and runs."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def mix64(*parts: int) -> int:
    """Fold integers into one 64-bit seed by a splitmix64 chain."""
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK64))
    return h


def substream_seed(master: int, model_name: str, n: int, rep: int) -> int:
    """Seed of the (model, n, rep) replication substream."""
    return mix64(master, fnv1a64(model_name), n, rep)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


@dataclass(frozen=True)
class DistributionModel:
    """A distribution on [0, inf)^d with the pieces the theory needs.

    ``cdf`` maps an (N, d) array to (N,) values; ``partial`` and
    ``partial2`` give the first and second derivative in coordinate
    ``j``; ``sampler(seed, n)`` draws an (n, d) array reproducibly.
    """

    name: str
    d: int
    cdf: Callable[[np.ndarray], np.ndarray]
    partial: Callable[[int, np.ndarray], np.ndarray]
    partial2: Callable[[int, np.ndarray], np.ndarray]
    sampler: Callable[[int, int], np.ndarray]
    params: dict = field(default_factory=dict)


def _check_points(points, d: int):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and d == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points must have shape (N, {d})")
    return pts


def _check_coord(j: int, d: int) -> None:
    if not 0 <= j < d:
        raise ValueError(f"coordinate index must lie in [0, {d}), got {j}")


def _gamma_pdf_deriv(x, alpha: float, beta: float):
    """d/dx of the Gamma(alpha, beta) density with one-sided values at 0."""
    x = np.asarray(x, dtype=np.float64)
    dens = specialfn.gamma_pdf(x, alpha, beta)
    out = np.zeros(x.shape, dtype=np.float64)
    pos = x > 0.0
    out[pos] = dens[pos] * ((alpha - 1.0) / x[pos] - beta)
    at0 = x == 0.0
    if np.any(at0):
        if alpha == 2.0:
            out[at0] = beta * beta
        elif alpha == 1.0:
            out[at0] = -beta * beta
        elif alpha > 2.0:
            out[at0] = 0.0
        else:
            raise ValueError(
                f"density derivative at 0 diverges for shape {alpha!r}"
            )
    return out


def gamma_product_model(d: int = 2, alpha: float = 2.0, beta: float = 1.0) -> DistributionModel:
    """Independent Gamma(alpha, beta) coordinates: F(x) = prod_j G(x_j)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")

    def cdf(points):
        pts = _check_points(points, d)
        out = np.ones(pts.shape[0], dtype=np.float64)
        for j in range(d):
            out *= specialfn.gamma_cdf_batch(pts[:, j], alpha, beta)
        return out

    def _others(pts, j):
        out = np.ones(pts.shape[0], dtype=np.float64)
        for k in range(d):
            if k != j:
                out *= specialfn.gamma_cdf_batch(pts[:, k], alpha, beta)
        return out

    def partial(j, points):
        _check_coord(j, d)
        pts = _check_points(points, d)
        return specialfn.gamma_pdf(pts[:, j], alpha, beta) * _others(pts, j)

    def partial2(j, points):
        _check_coord(j, d)
        pts = _check_points(points, d)
        return _gamma_pdf_deriv(pts[:, j], alpha, beta) * _others(pts, j)

    def sampler(seed, n):
        rng = make_rng(seed)
        return rng.gamma(alpha, 1.0 / beta, size=(n, d))

    return DistributionModel(
        name="m1", d=d, cdf=cdf, partial=partial, partial2=partial2,
        sampler=sampler, params={"alpha": alpha, "beta": beta},
    )


def clayton_cdf(u, theta: float):
    """Clayton copula C(u) = (sum_j u_j^{-theta} - d + 1)^{-1/theta}.

    Zero coordinates map to 0 by the continuity convention; values
    above 1 are rejected; output is clamped to [0, 1].
    """
    if not np.isfinite(theta) or theta <= 0.0:
        raise ValueError(f"theta must be finite and positive, got {theta!r}")
    pts = np.asarray(u, dtype=np.float64)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise ValueError("u must be a vector or an (N, d) array")
    if np.any(~np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("copula arguments must lie in [0, 1]")
    d = pts.shape[1]
    out = np.zeros(pts.shape[0], dtype=np.float64)
    interior = np.all(pts > 0.0, axis=1)
    if np.any(interior):
        with np.errstate(over="ignore"):
            a = np.sum(pts[interior] ** (-theta), axis=1) - (d - 1)
            out[interior] = np.clip(a ** (-1.0 / theta), 0.0, 1.0)
    return out[0] if squeeze else out


def clayton_gamma_model(
    d: int = 2, theta: float = 2.0, alpha: float = 2.0, beta: float = 1.0
) -> DistributionModel:
    """Clayton(theta) dependence over Gamma(alpha, beta) marginals.

    Derivatives follow the chain rule through u_j = G(x_j):

        dC/du_j   = A^{-1/theta - 1} u_j^{-theta - 1}
        d2C/du_j2 = -(theta + 1) u_j^{-theta - 2} A^{-1/theta - 2} (A - u_j^{-theta})

    with A = sum_k u_k^{-theta} - d + 1.  As u_j -> 0 with the other
    coordinates fixed, dC/du_j -> 1 and the d2C term vanishes, so below
    ``_U_TINY`` the factors are replaced by those limits (the one-sided
    boundary values; they require theta >= 1 to be finite).
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not np.isfinite(theta) or theta <= 0.0:
        raise ValueError(f"theta must be finite and positive, got {theta!r}")

    def cdf(points):
        pts = _check_points(points, d)
        u = np.stack(
            [specialfn.gamma_cdf_batch(pts[:, j], alpha, beta) for j in range(d)], axis=1
        )
        return clayton_cdf(np.clip(u, 0.0, 1.0), theta)

    def _factors(j, pts):
        """(dC/du_j, d2C/du_j^2) at u = G(pts), with boundary limits."""
        u = np.stack(
            [specialfn.gamma_cdf_batch(pts[:, k], alpha, beta) for k in range(d)], axis=1
        )
        u = np.clip(u, 0.0, 1.0)
        uj = u[:, j]
        cj = np.ones(pts.shape[0], dtype=np.float64)
        cjj = np.zeros(pts.shape[0], dtype=np.float64)
        safe = uj >= _U_TINY
        if np.any(safe):
            us = u[safe]
            s = us ** (-theta)
            a = np.sum(s, axis=1) - (d - 1)
            sj = s[:, j]
            cj[safe] = a ** (-1.0 / theta - 1.0) * us[:, j] ** (-theta - 1.0)
            cjj[safe] = (
                -(theta + 1.0)
                * us[:, j] ** (-theta - 2.0)
                * a ** (-1.0 / theta - 2.0)
                * (a - sj)
            )
        tiny = ~safe
        if np.any(tiny):
            if theta < 1.0:
                raise ValueError("boundary limits of the Clayton factors need theta >= 1")
            others = np.sum(u[tiny] ** (-theta), axis=1) - u[tiny][:, j] ** (-theta) - (d - 1)
            # cj -> 1 (already set); the cjj factor keeps its u^{theta-1} decay
            cjj[tiny] = -(theta + 1.0) * uj[tiny] ** (theta - 1.0) * others
        return cj, cjj

    def partial(j, points):
        _check_coord(j, d)
        pts = _check_points(points, d)
        cj, _ = _factors(j, pts)
        return cj * specialfn.gamma_pdf(pts[:, j], alpha, beta)

    def partial2(j, points):
        _check_coord(j, d)
        pts = _check_points(points, d)
        cj, cjj = _factors(j, pts)
        dens = specialfn.gamma_pdf(pts[:, j], alpha, beta)
        return cjj * dens * dens + cj * _gamma_pdf_deriv(pts[:, j], alpha, beta)

    def sampler(seed, n):
        rng = make_rng(seed)
        frailty = rng.gamma(1.0 / theta, 1.0, size=n)
        shocks = rng.standard_exponential(size=(n, d))
        u = (1.0 + shocks / frailty[:, None]) ** (-1.0 / theta)
        return specialfn.gamma_quantile_batch(u, alpha, beta)

    return DistributionModel(
        name="m2", d=d, cdf=cdf, partial=partial, partial2=partial2,
        sampler=sampler, params={"theta": theta, "alpha": alpha, "beta": beta},
    )


def boundary_mixture_model(beta: float = 1.0) -> DistributionModel:
    """One-dimensional mixture 0.75 Exp(beta) + 0.25 Gamma(2, beta).

    Its distribution function is F(t) = 1 - e^{-beta t} (1 + beta t / 4)
    with F''(0) = -beta^2 / 2 != 0, which keeps the leading
    boundary-layer bias term alive; the equal-weight mixture would have
    F''(0) = 0 and hide the rate this model exists to expose.
    """
    if not np.isfinite(beta) or beta <= 0.0:
        raise ValueError(f"rate must be finite and positive, got {beta!r}")

    def cdf(points):
        pts = _check_points(points, 1)
        t = beta * pts[:, 0]
        return -np.expm1(-t) - 0.25 * t * np.exp(-t)

    def partial(j, points):
        if j != 0:
            raise ValueError("one-dimensional model has only coordinate 0")
        pts = _check_points(points, 1)
        t = beta * pts[:, 0]
        return beta * np.exp(-t) * (3.0 + t) / 4.0

    def partial2(j, points):
        if j != 0:
            raise ValueError("one-dimensional model has only coordinate 0")
        pts = _check_points(points, 1)
        t = beta * pts[:, 0]
        return -beta * beta * np.exp(-t) * (2.0 + t) / 4.0

    def sampler(seed, n):
        rng = make_rng(seed)
        gam = rng.gamma(2.0, 1.0 / beta, size=n)
        expo = rng.standard_exponential(size=n) / beta
        pick = rng.random(size=n) < 0.25
        return np.where(pick, gam, expo)[:, None]

    return DistributionModel(
        name="bmix", d=1, cdf=cdf, partial=partial, partial2=partial2,
        sampler=sampler, params={"beta": beta},
    )


def model_by_name(
    name: str, d: int = 2, alpha: float = 2.0, beta: float = 1.0, theta: float = 2.0
) -> DistributionModel:
    """Instantiate a study model by its short name (``m1`` or ``m2``)."""
    key = name.strip().lower()
    if key == "m1":
        return gamma_product_model(d=d, alpha=alpha, beta=beta)
    if key == "m2":
        return clayton_gamma_model(d=d, theta=theta, alpha=alpha, beta=beta)
    raise ValueError(f"unknown model {name!r}; expected 'm1' or 'm2'")


def sample_model(model: DistributionModel, seed: int, n: int) -> Sample:
    """Draw ``n`` observations from ``model`` as a validated Sample."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    return Sample(model.sampler(seed, n))
