"""Optional PNG figures for flow reports.  Imported lazily by the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def flow_figures(trace, ratios, outdir) -> list:
    """Q against its bound, deficit on a log scale, and the conformal ratios."""
    from .hypersurface import q_lower_bound

    plt = _pyplot()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = trace.array("t")
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(t, trace.array("Q"), label="Q(t)")
    ax.axhline(q_lower_bound(trace.n), color="k", ls="--", lw=0.8, label="sphere value")
    ax.set_xlabel("t")
    ax.set_ylabel("Q")
    ax.legend()
    fig.tight_layout()
    path = outdir / "q_monotonicity.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(t, trace.array("umbilic_deficit"), label="sup |h - id|")
    ax.semilogy(t, np.maximum(trace.array("horo_margin"), 1e-300), label="horoconvexity margin")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    path = outdir / "umbilicity.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if ratios:
        rt = [r["t"] for r in ratios]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.semilogy(rt, [abs(r["R1"] - 1) for r in ratios], label="|R1 - 1|")
        ax.semilogy(rt, [abs(r["R2"] - 1) for r in ratios], label="|R2 - 1|")
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        path = outdir / "conformal_ratios.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
