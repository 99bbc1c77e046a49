"""Figure rendering for simulation outputs.

Two figures accompany the delimited tables: a log-log plot of mean ISE
against n for both estimators (with n^{-1} and n^{-4/3} guide slopes),
and the selected-level scaling plot of the n^{-2/3}-normalized mean
min/max levels.  Rendering uses the Agg backend so it works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_ise_figure", "render_mstar_figure"]


def render_ise_figure(model_name: str, cells, path) -> None:
    """Mean ISE of both estimators against n, log-log, with guide slopes."""
    ns = np.array([c.n for c in cells], dtype=np.float64)
    mean_e = np.array([c.mean_ecdf for c in cells])
    mean_s = np.array([c.mean_sm for c in cells])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(ns, mean_e, "o-", label="empirical")
    ax.loglog(ns, mean_s, "s-", label="smoothed")
    anchor = mean_e[0]
    ax.loglog(ns, anchor * (ns[0] / ns), ":", color="gray", label=r"$n^{-1}$ guide")
    ax.loglog(ns, anchor * (ns[0] / ns) ** (4.0 / 3.0), "--", color="gray",
              label=r"$n^{-4/3}$ guide")
    ax.set_xlabel("n")
    ax.set_ylabel("mean ISE")
    ax.set_title(f"{model_name}: mean ISE vs n")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_mstar_figure(cells_by_model: dict, path) -> None:
    """Scaled selected levels (mean min/max over n^{2/3}) against n."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for model_name, cells in cells_by_model.items():
        ns = np.array([c.n for c in cells], dtype=np.float64)
        lo = np.array([c.scaled_mstar_min for c in cells])
        hi = np.array([c.scaled_mstar_max for c in cells])
        line, = ax.plot(ns, lo, "o-", label=f"{model_name} min")
        ax.plot(ns, hi, "s--", color=line.get_color(), label=f"{model_name} max")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(r"selected level / $n^{2/3}$")
    ax.set_title("selected-level scaling")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
