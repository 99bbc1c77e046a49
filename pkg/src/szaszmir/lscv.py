"""Least-squares cross-validation for the smoothing levels.

The selection criterion is a discretized leave-one-out risk over a
quasi-Monte Carlo grid on the box S_delta = [delta, 1/delta)^d:

    LSCV(m) = w * sum_g [ F_hat(x_g)^2
              - (2/n) sum_i F_hat^{(-i)}(x_g) 1{X_i <= x_g} ],

with w the volume-per-node weight.  Expanding the leave-one-out
identity F_hat^{(-i)} = (n F_hat - psi_i) / (n - 1) collapses the
double sum to three reductions per candidate,

    sum_g F_hat(x_g)^2,
    sum_g F_hat(x_g) c_g          with c_g = #{i : X_i <= x_g},
    sum_{i,g} psi_i(x_g) 1{X_i <= x_g},

so a candidate costs one fused kernel sweep over the (grid x sample)
tableau instead of an O(n^2 G) double loop.

The search runs an isotropic pilot scan over the full candidate range
followed by exactly two cyclic coordinate-descent passes, each scanning
the full range per coordinate with the other coordinates held fixed.
Ties prefer the smallest level.  Scores are memoized by level vector,
so repeat visits are free and the returned evaluation count reflects
distinct candidates only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc as _qmc

from ._poisson_kernels import TailWindows
from .estimators import Sample, as_smoothing, snap_ceil

__all__ = [
    "IntegrationRegion",
    "EvaluationGrid",
    "SearchDomain",
    "qmc_grid",
    "ise",
    "LscvWorkspace",
    "lscv_score",
    "SelectionResult",
    "select_m",
]

_INDICATOR_CHUNK = 5_000_000


@dataclass(frozen=True)
class IntegrationRegion:
    """The box [delta, 1/delta)^d the discretized risk integrates over."""

    delta: float
    d: int

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d!r}")

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.d, self.delta)

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.d, 1.0 / self.delta)

    @property
    def volume(self) -> float:
        return float((1.0 / self.delta - self.delta) ** self.d)


@dataclass(frozen=True)
class EvaluationGrid:
    """Nodes discretizing an IntegrationRegion, with their shared weight.

    ``points`` has shape (G, d) and every node lies inside the region;
    ``cell_weight`` is volume / G, so sums over nodes approximate
    integrals over the box.
    """

    region: IntegrationRegion
    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != self.region.d:
            raise ValueError(
                f"points must have shape (G, {self.region.d}) with G >= 1, got {pts.shape}"
            )
        if np.any(pts < self.region.delta) or np.any(pts >= 1.0 / self.region.delta):
            raise ValueError("grid points must lie inside the integration region")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def cell_weight(self) -> float:
        return self.region.volume / self.size


def qmc_grid(
    region: IntegrationRegion,
    size: int = 4096,
    kind: str = "sobol",
    scramble: bool = False,
    seed=None,
) -> EvaluationGrid:
    """Low-discrepancy grid on the region, Sobol or Halton.

    Unscrambled sequences give a deterministic grid; pass
    ``scramble=True`` with a seed for a randomized one.  Sobol sizes
    should be powers of two to keep the balance properties.
    """
    if size < 1:
        raise ValueError(f"grid size must be >= 1, got {size!r}")
    if kind == "sobol":
        engine = _qmc.Sobol(d=region.d, scramble=scramble, seed=seed)
        exponent = size.bit_length() - 1
        if size == 1 << exponent:
            unit = engine.random_base2(m=exponent)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                unit = engine.random(size)
    elif kind == "halton":
        engine = _qmc.Halton(d=region.d, scramble=scramble, seed=seed)
        unit = engine.random(size)
    else:
        raise ValueError(f"unsupported grid kind {kind!r}; expected 'sobol' or 'halton'")
    span = 1.0 / region.delta - region.delta
    points = region.delta + span * unit
    return EvaluationGrid(region=region, points=points)


@dataclass(frozen=True)
class SearchDomain:
    """Candidate range for the level search.

    The per-coordinate candidates are m_min..m_max(n) with
    m_max(n) = min(floor(c n^{2/3}), m_cap, n): the n^{2/3} ceiling
    tracks the optimal rate, m_cap bounds the kernel cost, and levels
    above n are never competitive.
    """

    m_min: int = 5
    m_cap: int = 500
    c: float = 3.0

    def __post_init__(self):
        if self.m_min < 1:
            raise ValueError(f"m_min must be >= 1, got {self.m_min!r}")
        if self.m_cap < self.m_min:
            raise ValueError(f"m_cap must be >= m_min, got {self.m_cap!r}")
        if self.c <= 0.0:
            raise ValueError(f"rate constant c must be positive, got {self.c!r}")

    def m_max(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"sample size must be >= 1, got {n!r}")
        return min(int(math.floor(self.c * n ** (2.0 / 3.0))), self.m_cap, n)

    def candidates(self, n: int) -> range:
        top = self.m_max(n)
        if top < self.m_min:
            raise ValueError(
                f"candidate range is empty: m_max({n}) = {top} < m_min = {self.m_min}"
            )
        return range(self.m_min, top + 1)


def ise(estimates, truth, grid: EvaluationGrid) -> float:
    """Discretized integrated squared error of ``estimates`` against ``truth``."""
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != (grid.size,) or tru.shape != (grid.size,):
        raise ValueError(
            f"values must have shape ({grid.size},), got {est.shape} and {tru.shape}"
        )
    diff = est - tru
    return grid.cell_weight * float(diff @ diff)


class LscvWorkspace:
    """Per-(sample, grid) state shared across candidate evaluations.

    Holds the (G, n) indicator tableau 1{X_i <= x_g} as float64 (the
    fused kernel consumes it branchlessly), its row sums c_g, and the
    Poisson-tail window tables keyed by (coordinate, level).
    """

    def __init__(self, sample: Sample, grid: EvaluationGrid, eps: float = 1e-13):
        if sample.d != grid.region.d:
            raise ValueError(
                f"sample dimension {sample.d} != grid dimension {grid.region.d}"
            )
        if sample.n < 2:
            raise ValueError("leave-one-out cross-validation needs at least 2 observations")
        self.sample = sample
        self.grid = grid
        self.eps = float(eps)
        g, n, d = grid.size, sample.n, sample.d
        indicator = np.ones((g, n), dtype=np.float64)
        step = max(1, _INDICATOR_CHUNK // max(n, 1))
        for start in range(0, g, step):
            stop = min(g, start + step)
            block = np.ones((stop - start, n), dtype=bool)
            for j in range(d):
                block &= sample.data[:, j][None, :] <= grid.points[start:stop, j][:, None]
            indicator[start:stop] = block
        self.indicator = indicator
        self.count = indicator.sum(axis=1)
        self.ecdf_values = self.count / n
        self._columns = [np.ascontiguousarray(grid.points[:, j]) for j in range(d)]
        self._sample_cols = [np.ascontiguousarray(sample.data[:, j]) for j in range(d)]
        self._ones_cache: np.ndarray | None = None

    def ones_matrix(self) -> np.ndarray:
        if self._ones_cache is None:
            self._ones_cache = np.ones((self.grid.size, self.sample.n), dtype=np.float64)
        return self._ones_cache

    def windows(self, j: int, level: int) -> TailWindows:
        # built fresh per call: window tables for one level run to tens of
        # megabytes at large n, so caching them across a scan is a blowup,
        # and the scan structure touches each (coordinate, level) pair once
        return TailWindows(float(level) * self._columns[j], eps=self.eps)

    def thresholds(self, j: int, level: int) -> np.ndarray:
        return snap_ceil(float(level) * self._sample_cols[j])

    def tail_matrix(self, j: int, level: int, out=None) -> np.ndarray:
        return self.windows(j, level).gather(self.thresholds(j, level), out=out)

    def fused(self, j: int, level: int, t_other: np.ndarray):
        """(F_hat over the grid, sum_{i,g} psi 1{X_i <= x_g}) for one candidate."""
        return self.windows(j, level).fused_terms(
            self.thresholds(j, level), t_other, self.indicator
        )

    def estimate(self, m_vec) -> np.ndarray:
        """Smoothed estimate over the grid at level vector ``m_vec``."""
        m_vec = as_smoothing(m_vec, self.sample.d)
        d = self.sample.d
        if d == 1:
            t_other = self.ones_matrix()
        else:
            t_other = self.tail_matrix(0, int(m_vec[0]))
            for j in range(1, d - 1):
                t_other *= self.tail_matrix(j, int(m_vec[j]))
        f_hat, _ = self.fused(d - 1, int(m_vec[d - 1]), t_other)
        return f_hat

    def score_from_terms(self, f_hat: np.ndarray, cross: float) -> float:
        n = self.sample.n
        w = self.grid.cell_weight
        quad = float(f_hat @ f_hat)
        mixed = float(f_hat @ self.count)
        loo_sum = (n * mixed - cross) / (n - 1)
        return w * (quad - 2.0 / n * loo_sum)


def _score_candidate(ws: LscvWorkspace, m_vec: tuple[int, ...]) -> float:
    d = ws.sample.d
    if d == 1:
        t_other = ws.ones_matrix()
        scan = 0
    else:
        scan = d - 1
        t_other = ws.tail_matrix(0, m_vec[0])
        for j in range(1, scan):
            t_other *= ws.tail_matrix(j, m_vec[j])
    f_hat, cross = ws.fused(scan, m_vec[scan], t_other)
    return ws.score_from_terms(f_hat, cross)


def lscv_score(sample: Sample, m, grid: EvaluationGrid, workspace: LscvWorkspace | None = None) -> float:
    """Discretized leave-one-out risk of level vector ``m`` (up to the
    constant integral of F^2, which every candidate shares)."""
    m_vec = as_smoothing(m, sample.d)
    if workspace is None:
        workspace = LscvWorkspace(sample, grid)
    return _score_candidate(workspace, tuple(int(v) for v in m_vec))


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of the level search.

    ``trace`` rows are (stage, coordinate, levels, score) for every
    candidate visited in order; ``updates`` is the best score after the
    pilot and after each coordinate scan, a nonincreasing sequence.
    ``evaluations`` counts distinct scored level vectors.
    """

    m_star: np.ndarray
    score: float
    pilot: int
    evaluations: int
    trace: tuple = field(repr=False)
    updates: tuple = field(repr=False)


def select_m(
    sample: Sample,
    grid: EvaluationGrid,
    domain: SearchDomain | None = None,
    workspace: LscvWorkspace | None = None,
    passes: int = 2,
) -> SelectionResult:
    """Isotropic pilot scan, then ``passes`` cyclic coordinate-descent passes.

    Every scan covers the full candidate range; ties take the smallest
    level.  With memoized scores the later passes mostly revisit known
    candidates, so the cost is dominated by the pilot and first pass.
    """
    if domain is None:
        domain = SearchDomain()
    if passes < 0:
        raise ValueError(f"passes must be >= 0, got {passes!r}")
    if workspace is None:
        workspace = LscvWorkspace(sample, grid)
    cands = domain.candidates(sample.n)
    d = sample.d
    memo: dict[tuple[int, ...], float] = {}
    trace: list[tuple[str, int | None, tuple[int, ...], float]] = []

    def scored(stage: str, coord: int | None, m_vec: tuple[int, ...], t_other=None) -> float:
        s = memo.get(m_vec)
        if s is None:
            if t_other is None:
                s = _score_candidate(workspace, m_vec)
            else:
                scan = coord if coord is not None else d - 1
                f_hat, cross = workspace.fused(scan, m_vec[scan], t_other)
                s = workspace.score_from_terms(f_hat, cross)
            memo[m_vec] = s
        trace.append((stage, coord, m_vec, s))
        return s

    # isotropic pilot: exhaustive scan of m * (1, ..., 1)
    best_m = None
    best_s = math.inf
    for m in cands:
        vec = (m,) * d
        if d == 1:
            t_other = None
        else:
            t_other = workspace.tail_matrix(0, m)
            for j in range(1, d - 1):
                t_other *= workspace.tail_matrix(j, m)
        s = scored("pilot", None, vec, t_other)
        if s < best_s:
            best_s = s
            best_m = m
    current = [best_m] * d
    updates = [best_s]

    for p in range(passes):
        stage = f"pass{p + 1}"
        for j in range(d):
            if d == 1:
                t_other = None
            else:
                t_other = None
                for k in range(d):
                    if k == j:
                        continue
                    tm = workspace.tail_matrix(k, current[k])
                    t_other = tm if t_other is None else t_other * tm
            scan_best_m = None
            scan_best_s = math.inf
            for m in cands:
                vec = tuple(current[:j] + [m] + current[j + 1 :])
                s = scored(stage, j, vec, t_other)
                if s < scan_best_s:
                    scan_best_s = s
                    scan_best_m = m
            current[j] = scan_best_m
            updates.append(scan_best_s)

    m_star = np.array(current, dtype=np.int64)
    return SelectionResult(
        m_star=m_star,
        score=updates[-1],
        pilot=best_m,
        evaluations=len(memo),
        trace=tuple(trace),
        updates=tuple(updates),
    )
