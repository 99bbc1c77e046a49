"""Smoothed empirical distribution functions on the nonnegative orthant.

The estimator applies the Szasz-Mirakyan operator to the empirical
distribution function F_n of a sample X_1, ..., X_n in [0, inf)^d with
a vector m of positive integer smoothing levels:

    F_hat(x) = sum_k F_n(k / m) prod_j e^{-m_j x_j} (m_j x_j)^{k_j} / k_j!

Because F_n is a sum of indicator products, the same estimator is the
sample average of per-observation weights

    psi_i(x) = prod_j P{Poisson(m_j x_j) >= ceil(m_j X_ij)},

which is how every production path here computes it: O(n d) per
evaluation point instead of a lattice sum.  The lattice form is kept as
``sm_estimate_series`` and serves as the equivalence oracle in tests.
"""

from __future__ import annotations

import math

import numpy as np

from . import specialfn
from ._poisson_kernels import TailWindows

__all__ = [
    "Sample",
    "load_sample",
    "as_smoothing",
    "snap_ceil",
    "CeilCache",
    "empirical_cdf",
    "empirical_cdf_batch",
    "sm_weight",
    "sm_weights",
    "sm_estimate",
    "sm_estimate_batch",
    "loo_estimate",
    "sm_estimate_series",
    "smoothed_operator",
]

# threshold snap: m_j * X_ij this close to an integer is treated as exact,
# so values meant to land on the lattice do not get bumped up a cell
_SNAP = 1e-9

# refuse lattice sums beyond this many nodes (exponential in d)
_MAX_LATTICE = 20_000_000


class Sample:
    """Validated n x d data matrix on the nonnegative orthant."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"sample must be a 2-d array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"sample must be nonempty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample contains non-finite values")
        if np.any(arr < 0.0):
            raise ValueError("sample contains negative values")
        arr.flags.writeable = False
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __repr__(self) -> str:  # pragma: no cover
        return f"Sample(n={self.n}, d={self.d})"


def load_sample(path) -> Sample:
    """Read a delimited text file into a :class:`Sample`.

    Accepts comma- or whitespace-separated columns with ``.`` as the
    decimal mark.  A header line is skipped when its first token does
    not parse as a number.  Errors name the offending 1-based line.
    """
    rows = []
    width = None
    header_allowed = True
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = [t for t in line.replace(",", " ").split() if t]
            if header_allowed:
                header_allowed = False
                try:
                    float(tokens[0])
                except ValueError:
                    continue  # at most one header line
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {line!r}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(values)}"
                )
            for v in values:
                if not math.isfinite(v):
                    raise ValueError(f"{path}: line {lineno}: non-finite value")
                if v < 0.0:
                    raise ValueError(f"{path}: line {lineno}: negative value {v!r}")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Sample(np.asarray(rows, dtype=np.float64))


def as_smoothing(m, d: int):
    """Normalize ``m`` into a (d,) vector of positive integer levels.

    A scalar is broadcast to every coordinate.  Non-integral or
    non-positive entries are rejected.
    """
    arr = np.asarray(m)
    if arr.ndim == 0:
        arr = np.full(d, arr)
    if arr.ndim != 1 or arr.shape[0] != d:
        raise ValueError(f"smoothing vector must have length {d}, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number) or np.issubdtype(arr.dtype, np.complexfloating):
        raise ValueError("smoothing levels must be numeric")
    shown = np.asarray(m).tolist()
    as_int = np.asarray(np.rint(arr), dtype=np.int64)
    if np.any(~np.isfinite(np.asarray(arr, dtype=np.float64))) or np.any(as_int != arr):
        raise ValueError(f"smoothing levels must be integers, got {shown!r}")
    if np.any(as_int < 1):
        raise ValueError(f"smoothing levels must be >= 1, got {shown!r}")
    return as_int


def snap_ceil(values) -> np.ndarray:
    """Ceiling with a 1e-9 snap: values that close to an integer take it.

    Keeps data sitting on the evaluation lattice up to float rounding
    from being pushed into the next cell.
    """
    y = np.asarray(values, dtype=np.float64)
    r = np.rint(y)
    return np.where(np.abs(y - r) <= _SNAP, r, np.ceil(y)).astype(np.int64)


class CeilCache:
    """Thresholds W_ij = ceil(m_j X_ij) for one (sample, m) pair."""

    __slots__ = ("m", "thresholds")

    def __init__(self, sample: Sample, m):
        m = as_smoothing(m, sample.d)
        self.m = m
        self.thresholds = snap_ceil(sample.data * m[None, :].astype(np.float64))


def _point(x, d: int):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (d,):
        raise ValueError(f"evaluation point must have shape ({d},), got {arr.shape}")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError(f"evaluation point must be finite and nonnegative, got {x!r}")
    return arr


def empirical_cdf(sample: Sample, x) -> float:
    """F_n(x): exact fraction of observations with every coordinate <= x."""
    x = _point(x, sample.d)
    return float(np.all(sample.data <= x[None, :], axis=1).sum()) / sample.n


def empirical_cdf_batch(sample: Sample, points):
    """F_n at each row of ``points`` (N, d)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != sample.d:
        raise ValueError(f"points must have shape (N, {sample.d})")
    out = np.empty(pts.shape[0], dtype=np.float64)
    chunk = max(1, int(5_000_000 // max(1, sample.n * sample.d)))
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        hits = np.all(sample.data[None, :, :] <= block[:, None, :], axis=2)
        out[start : start + chunk] = hits.sum(axis=1) / sample.n
    return out


def sm_weights(sample: Sample, m, x, cache: CeilCache | None = None):
    """Per-observation weights psi_i(x), shape (n,)."""
    x = _point(x, sample.d)
    if cache is None:
        cache = CeilCache(sample, m)
    lam = cache.m.astype(np.float64) * x
    tails = specialfn.poisson_tail_batch(lam[None, :], cache.thresholds)
    return tails.prod(axis=1)


def sm_weight(sample: Sample, m, x, i: int) -> float:
    """Weight psi_i(x) of observation ``i``."""
    if not 0 <= i < sample.n:
        raise ValueError(f"observation index out of range: {i}")
    return float(sm_weights(sample, m, x)[i])


def sm_estimate(sample: Sample, m, x, cache: CeilCache | None = None) -> float:
    """Smoothed distribution function estimate at one point."""
    return float(sm_weights(sample, m, x, cache=cache).mean())


def sm_estimate_batch(sample: Sample, m, points, eps: float = 1e-13):
    """Smoothed estimate at each row of ``points`` (N, d).

    Uses the windowed tail kernels; ``eps`` bounds the per-mean
    truncation error of the tail tables.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != sample.d:
        raise ValueError(f"points must have shape (N, {sample.d})")
    if np.any(~np.isfinite(pts)) or np.any(pts < 0.0):
        raise ValueError("points must be finite and nonnegative")
    cache = CeilCache(sample, m)
    weights = np.ones((pts.shape[0], sample.n), dtype=np.float64)
    for j in range(sample.d):
        windows = TailWindows(cache.m[j] * pts[:, j], eps)
        weights *= windows.gather(cache.thresholds[:, j])
    return weights.mean(axis=1)


def loo_estimate(sample: Sample, m, x, i: int) -> float:
    """Leave-one-out estimate dropping observation ``i``.

    Computed through the identity
    F_hat^{(-i)}(x) = (n F_hat(x) - psi_i(x)) / (n - 1), never by
    re-aggregating the remaining observations.
    """
    if sample.n < 2:
        raise ValueError("leave-one-out requires at least two observations")
    if not 0 <= i < sample.n:
        raise ValueError(f"observation index out of range: {i}")
    weights = sm_weights(sample, m, x)
    return float((weights.sum() - weights[i]) / (sample.n - 1))


def _lattice_axes(m, x, tail_eps: float):
    """Per-coordinate index ranges and Poisson weights for lattice sums."""
    d = x.shape[0]
    axes = []
    weights = []
    total = 1
    for j in range(d):
        lam = float(m[j]) * float(x[j])
        if lam <= 0.0:
            ks = np.array([0], dtype=np.int64)
        else:
            t = specialfn.tail_bound_halfwidth(lam, tail_eps / d)
            lo = max(0, int(math.floor(lam - t)))
            hi = int(math.ceil(lam + t))
            ks = np.arange(lo, hi + 1, dtype=np.int64)
        total *= ks.size
        if total > _MAX_LATTICE:
            raise ValueError("lattice sum too large; reduce m, x or the dimension")
        axes.append(ks)
        weights.append(specialfn.poisson_pmf(lam, ks))
    return axes, weights


def _contract(values, weights):
    # values has shape (K_1, ..., K_d); contract trailing axes in turn
    out = values
    for w in reversed(weights):
        out = out @ w
    return float(out)


def sm_estimate_series(sample: Sample, m, x, tail_eps: float = 1e-10) -> float:
    """Lattice-sum form of :func:`sm_estimate` (slow; oracle use only).

    Sums F_n(k / m) against product Poisson weights over the box whose
    per-coordinate truncated mass is below ``tail_eps / d``, so the
    result differs from the exact operator value by at most
    ``tail_eps``.
    """
    x = _point(x, sample.d)
    m = as_smoothing(m, sample.d)
    axes, weights = _lattice_axes(m, x, tail_eps)
    # per-coordinate indicator matrices at lattice coordinates k / m_j
    indicators = [
        sample.data[:, j, None] <= (axes[j][None, :] / float(m[j]))
        for j in range(sample.d)
    ]
    if sample.d == 1:
        fn = indicators[0].sum(axis=0) / sample.n
    elif sample.d == 2:
        fn = (indicators[0].T.astype(np.float64) @ indicators[1]) / sample.n
    else:
        shape = tuple(a.size for a in axes)
        fn = np.zeros(shape, dtype=np.float64)
        for i in range(sample.n):
            block = indicators[0][i].astype(np.float64)
            for j in range(1, sample.d):
                block = np.multiply.outer(block, indicators[j][i].astype(np.float64))
            fn += block
        fn /= sample.n
    return _contract(fn, weights)


def smoothed_operator(cdf_fn, m, x, tail_eps: float = 1e-10, d: int | None = None) -> float:
    """Szasz-Mirakyan operator applied to an arbitrary distribution function.

    ``cdf_fn`` must map an (N, d) array of points to an (N,) array of
    values in [0, 1].  Truncation follows the same per-coordinate box
    rule as :func:`sm_estimate_series`.  This is the deterministic
    route to the operator bias F_m(x) - F(x).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if d is None:
        d = x.shape[0]
    x = _point(x, d)
    m = as_smoothing(m, d)
    axes, weights = _lattice_axes(m, x, tail_eps)
    grids = np.meshgrid(*[a / float(mj) for a, mj in zip(axes, m)], indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=1)
    values = np.asarray(cdf_fn(points), dtype=np.float64).reshape([a.size for a in axes])
    return _contract(values, weights)
