"""Monte Carlo comparison of the empirical and smoothed CDF estimators.

One replication draws a sample from a named model, computes the
empirical-CDF ISE over a fixed QMC grid, runs the level search, and
computes the smoothed ISE at the selected levels.  Replication seeds
are derived from the master seed by mixing (model, n, rep), so any cell
or single replication can be recomputed independently and the full run
is reproducible from the config alone.

Outputs per model: a raw per-replication log (written and flushed row
by row in replication order, so a crash preserves every finished
replication), a summary table (median, IQR, mean, variance of both ISE
columns plus the scaled mean gap n^{4/3} (mean_ecdf - mean_sm)), and a
figure table of mean ISE against n.  A shared file collects the
selected-level statistics: the per-replication min and max coordinate
averaged over replications, raw and scaled by n^{-2/3}.

Floats are written with 17 significant digits, so rerunning a config
reproduces the output files byte for byte.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lscv import IntegrationRegion, LscvWorkspace, SearchDomain, ise, qmc_grid, select_m
from .models import model_by_name, substream_seed, sample_model

__all__ = [
    "ExperimentConfig",
    "ReplicationResult",
    "CellSummary",
    "ExperimentResult",
    "parse_config_text",
    "run_replication",
    "summarize",
    "run_experiment",
    "write_summary_files",
    "read_raw_log",
    "resolve_threads",
]

THREADS_ENV = "SZASZMIR_THREADS"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a simulation run; every field has a default.

    ``threads = 0`` means take the worker count from the environment
    variable named in ``THREADS_ENV``, falling back to 1.  Replications
    run in worker processes only when the resolved count exceeds 1.
    """

    models: tuple[str, ...] = ("m1", "m2")
    d: int = 2
    alpha: float = 2.0
    beta: float = 1.0
    theta: float = 2.0
    n_list: tuple[int, ...] = (25, 50, 100, 200, 400)
    n_mc: int = 100
    delta: float = 0.05
    grid_size: int = 4096
    qmc_kind: str = "sobol"
    qmc_scramble: bool = False
    qmc_seed: int = 0
    m_min: int = 5
    m_cap: int = 500
    c: float = 3.0
    passes: int = 2
    master_seed: int = 20260818
    out_dir: str = "szaszmir-out"
    threads: int = 0
    figures: bool = True

    def __post_init__(self):
        if not self.models:
            raise ValueError("at least one model is required")
        if self.n_mc < 1:
            raise ValueError(f"n_mc must be >= 1, got {self.n_mc!r}")
        if not self.n_list or any(n < 2 for n in self.n_list):
            raise ValueError(f"n_list entries must be >= 2, got {self.n_list!r}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.passes < 0:
            raise ValueError(f"passes must be >= 0, got {self.passes!r}")

    def to_text(self) -> str:
        """Flat key = value form holding every field, parse_config_text's inverse."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, known[key].type)
        return cls(**kwargs)


def _coerce(key: str, raw, type_name):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key == "models":
            return tuple(s.strip() for s in text.split(",") if s.strip())
        if key == "n_list":
            return tuple(int(s) for s in text.split(",") if s.strip())
        if key in ("qmc_scramble", "figures"):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if key in ("alpha", "beta", "theta", "delta", "c"):
            return float(text)
        if key in ("qmc_kind", "out_dir"):
            return text
        return int(text)
    except ValueError as exc:
        raise ValueError(f"config key {key!r} has invalid value {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and # comments are skipped."""
    mapping: dict[str, str] = {}
    for idx, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {idx} is not 'key = value': {line!r}")
        key, _, value = stripped.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def resolve_threads(configured: int) -> int:
    if configured > 0:
        return configured
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if value > 0:
            return value
    return 1


@dataclass(frozen=True)
class ReplicationResult:
    model: str
    n: int
    rep: int
    ise_ecdf: float
    ise_sm: float
    m_star: tuple[int, ...]


# per-process cache of (model, grid, truth, domain); keyed by the config
# fields they depend on so workers rebuild only on genuine change
_CONTEXTS: dict[tuple, tuple] = {}


def _context(config: ExperimentConfig, model_name: str):
    key = (
        model_name,
        config.d,
        config.alpha,
        config.beta,
        config.theta,
        config.delta,
        config.grid_size,
        config.qmc_kind,
        config.qmc_scramble,
        config.qmc_seed,
        config.m_min,
        config.m_cap,
        config.c,
    )
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        model = model_by_name(
            model_name, d=config.d, alpha=config.alpha, beta=config.beta, theta=config.theta
        )
        region = IntegrationRegion(delta=config.delta, d=config.d)
        seed = config.qmc_seed if config.qmc_scramble else None
        grid = qmc_grid(
            region, size=config.grid_size, kind=config.qmc_kind,
            scramble=config.qmc_scramble, seed=seed,
        )
        truth = model.cdf(grid.points)
        domain = SearchDomain(m_min=config.m_min, m_cap=config.m_cap, c=config.c)
        ctx = (model, grid, truth, domain)
        _CONTEXTS[key] = ctx
    return ctx


def run_replication(config: ExperimentConfig, model_name: str, n: int, rep: int) -> ReplicationResult:
    """One full replication: draw, select levels, score both estimators."""
    model, grid, truth, domain = _context(config, model_name)
    seed = substream_seed(config.master_seed, model_name, n, rep)
    sample = sample_model(model, seed, n)
    ws = LscvWorkspace(sample, grid)
    ise_ecdf = ise(ws.ecdf_values, truth, grid)
    sel = select_m(sample, grid, domain, workspace=ws, passes=config.passes)
    ise_sm = ise(ws.estimate(sel.m_star), truth, grid)
    return ReplicationResult(
        model=model_name,
        n=n,
        rep=rep,
        ise_ecdf=ise_ecdf,
        ise_sm=ise_sm,
        m_star=tuple(int(v) for v in sel.m_star),
    )


_WORKER_CONFIGS: dict[str, ExperimentConfig] = {}


def _replication_worker(args):
    config_text, model_name, n, rep = args
    config = _WORKER_CONFIGS.get(config_text)
    if config is None:
        config = ExperimentConfig.from_mapping(parse_config_text(config_text))
        _WORKER_CONFIGS[config_text] = config
    return run_replication(config, model_name, n, rep)


@dataclass(frozen=True)
class CellSummary:
    """Replication statistics for one (model, n) cell.

    ``delta_n`` is n^{4/3} (mean ISE_ecdf - mean ISE_sm), the gap on
    the scale where the theory predicts a positive limit.  With a
    single replication the variances are reported as 0 and
    ``degenerate`` is set.
    """

    model: str
    n: int
    reps: int
    median_ecdf: float
    median_sm: float
    iqr_ecdf: float
    iqr_sm: float
    mean_ecdf: float
    mean_sm: float
    var_ecdf: float
    var_sm: float
    delta_n: float
    mean_mstar_min: float
    mean_mstar_max: float
    scaled_mstar_min: float
    scaled_mstar_max: float
    degenerate: bool


def summarize(model_name: str, n: int, results: list[ReplicationResult]) -> CellSummary:
    if not results:
        raise ValueError("cannot summarize an empty cell")
    e = np.array([r.ise_ecdf for r in results], dtype=np.float64)
    s = np.array([r.ise_sm for r in results], dtype=np.float64)
    mstar = np.array([r.m_star for r in results], dtype=np.float64)
    reps = len(results)
    degenerate = reps < 2

    def iqr(a):
        lo, hi = np.quantile(a, [0.25, 0.75])
        return float(hi - lo)

    scale = float(n) ** (2.0 / 3.0)
    return CellSummary(
        model=model_name,
        n=n,
        reps=reps,
        median_ecdf=float(np.median(e)),
        median_sm=float(np.median(s)),
        iqr_ecdf=iqr(e),
        iqr_sm=iqr(s),
        mean_ecdf=float(e.mean()),
        mean_sm=float(s.mean()),
        var_ecdf=0.0 if degenerate else float(e.var(ddof=1)),
        var_sm=0.0 if degenerate else float(s.var(ddof=1)),
        delta_n=float(n) ** (4.0 / 3.0) * float(e.mean() - s.mean()),
        mean_mstar_min=float(mstar.min(axis=1).mean()),
        mean_mstar_max=float(mstar.max(axis=1).mean()),
        scaled_mstar_min=float(mstar.min(axis=1).mean()) / scale,
        scaled_mstar_max=float(mstar.max(axis=1).mean()) / scale,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    summaries: dict
    paths: dict


def _raw_header(d: int) -> str:
    levels = ",".join(f"m_star_{j + 1}" for j in range(d))
    return f"model,n,rep,ise_ecdf,ise_sm,{levels}\n"


def _raw_row(r: ReplicationResult) -> str:
    levels = ",".join(str(v) for v in r.m_star)
    return f"{r.model},{r.n},{r.rep},{_fmt(r.ise_ecdf)},{_fmt(r.ise_sm)},{levels}\n"


_SUMMARY_HEADER = (
    "n,reps,median_ise_ecdf,median_ise_sm,iqr_ise_ecdf,iqr_ise_sm,"
    "mean_ise_ecdf,mean_ise_sm,var_ise_ecdf,var_ise_sm,delta_n,degenerate\n"
)

_MSTAR_HEADER = (
    "model,n,reps,mean_mstar_min,mean_mstar_max,scaled_mstar_min,scaled_mstar_max\n"
)


def _summary_row(c: CellSummary) -> str:
    cells = [
        str(c.n),
        str(c.reps),
        _fmt(c.median_ecdf),
        _fmt(c.median_sm),
        _fmt(c.iqr_ecdf),
        _fmt(c.iqr_sm),
        _fmt(c.mean_ecdf),
        _fmt(c.mean_sm),
        _fmt(c.var_ecdf),
        _fmt(c.var_sm),
        _fmt(c.delta_n),
        "true" if c.degenerate else "false",
    ]
    return ",".join(cells) + "\n"


def _mstar_row(c: CellSummary) -> str:
    cells = [
        c.model,
        str(c.n),
        str(c.reps),
        _fmt(c.mean_mstar_min),
        _fmt(c.mean_mstar_max),
        _fmt(c.scaled_mstar_min),
        _fmt(c.scaled_mstar_max),
    ]
    return ",".join(cells) + "\n"


def write_summary_files(out_dir, layout, summaries, figures: bool) -> dict:
    """Write summary, selected-level and figure outputs for finished cells.

    ``layout`` lists (model, [n, ...]) in output order; ``summaries``
    maps (model, n) to CellSummary.  Returns the written paths.  Used
    by ``run_experiment`` and by table regeneration from a raw log.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    for model_name, ns in layout:
        summary_path = out / f"summary_{model_name}.csv"
        with open(summary_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_SUMMARY_HEADER)
            for n in ns:
                fh.write(_summary_row(summaries[(model_name, n)]))
        paths[f"summary_{model_name}"] = summary_path

        figure_path = out / f"figure_{model_name}.csv"
        with open(figure_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("n,mean_ise_ecdf,mean_ise_sm\n")
            for n in ns:
                c = summaries[(model_name, n)]
                fh.write(f"{n},{_fmt(c.mean_ecdf)},{_fmt(c.mean_sm)}\n")
        paths[f"figure_{model_name}"] = figure_path

    mstar_path = out / "mstar.csv"
    with open(mstar_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_MSTAR_HEADER)
        for model_name, ns in layout:
            for n in ns:
                fh.write(_mstar_row(summaries[(model_name, n)]))
    paths["mstar"] = mstar_path

    if figures:
        from . import report

        for model_name, ns in layout:
            cells = [summaries[(model_name, n)] for n in ns]
            fig_path = out / f"figure_{model_name}.png"
            report.render_ise_figure(model_name, cells, fig_path)
            paths[f"figure_png_{model_name}"] = fig_path
        scaling_path = out / "mstar_scaling.png"
        report.render_mstar_figure(
            {m: [summaries[(m, n)] for n in ns] for m, ns in layout},
            scaling_path,
        )
        paths["mstar_png"] = scaling_path
    return paths


def run_experiment(config: ExperimentConfig, log=None) -> ExperimentResult:
    """Run the full (model x n x replication) grid and write all outputs.

    Raw rows are appended and flushed as they finish, in replication
    order; summaries and figures are written after their cells
    complete.  A failed replication aborts the run with the raw rows
    finished so far preserved on disk.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    config_path = out / "config_resolved.txt"
    config_path.write_text(config.to_text(), encoding="utf-8")
    paths["config"] = config_path

    threads = resolve_threads(config.threads)
    summaries: dict[tuple[str, int], CellSummary] = {}

    for model_name in config.models:
        raw_path = out / f"raw_{model_name}.csv"
        paths[f"raw_{model_name}"] = raw_path
        executor = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            with open(raw_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(_raw_header(config.d))
                fh.flush()
                for n in config.n_list:
                    results: list[ReplicationResult] = []
                    if executor is not None:
                        jobs = [
                            (config.to_text(), model_name, n, rep)
                            for rep in range(config.n_mc)
                        ]
                        iterator = executor.map(_replication_worker, jobs)
                    else:
                        iterator = (
                            run_replication(config, model_name, n, rep)
                            for rep in range(config.n_mc)
                        )
                    for res in iterator:
                        fh.write(_raw_row(res))
                        fh.flush()
                        results.append(res)
                        if log is not None:
                            log(
                                f"{model_name} n={res.n} rep={res.rep + 1}/{config.n_mc} "
                                f"ise_ecdf={res.ise_ecdf:.5f} ise_sm={res.ise_sm:.5f} "
                                f"m_star={res.m_star}"
                            )
                    summaries[(model_name, n)] = summarize(model_name, n, results)
        finally:
            if executor is not None:
                executor.shutdown()

    layout = [(model_name, list(config.n_list)) for model_name in config.models]
    paths.update(write_summary_files(out, layout, summaries, config.figures))
    return ExperimentResult(config=config, summaries=summaries, paths=paths)


def read_raw_log(path) -> dict[tuple[str, int], list[ReplicationResult]]:
    """Parse a raw per-replication log back into grouped results."""
    cells: dict[tuple[str, int], list[ReplicationResult]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = header.split(",")
        if fields[:5] != ["model", "n", "rep", "ise_ecdf", "ise_sm"] or not all(
            f.startswith("m_star_") for f in fields[5:]
        ) or len(fields) < 6:
            raise ValueError(f"{path}: not a raw replication log (header {header!r})")
        for idx, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(fields):
                raise ValueError(f"{path}: line {idx} has {len(parts)} fields, expected {len(fields)}")
            try:
                res = ReplicationResult(
                    model=parts[0],
                    n=int(parts[1]),
                    rep=int(parts[2]),
                    ise_ecdf=float(parts[3]),
                    ise_sm=float(parts[4]),
                    m_star=tuple(int(v) for v in parts[5:]),
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {idx} is malformed: {line!r}") from exc
            cells.setdefault((res.model, res.n), []).append(res)
    if not cells:
        raise ValueError(f"{path}: no replication rows")
    return cells
