"""Figure rendering for the report path.

Figures are written next to the delimited outputs: a residual/error trace
per run and, for portfolio runs, a bar chart of the solution weights.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_trace", "render_weights"]


def render_trace(trace, path, title=None):
    """Semilog plot of the residual trace (and error trace when present)."""
    iters = [rec.iter for rec in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    res = [rec.residual for rec in trace]
    ax.semilogy(iters, res, label="relative change")
    errs = [rec.error for rec in trace]
    if any(e is not None and e > 0 for e in errs):
        ax.semilogy(
            [k for k, e in zip(iters, errs) if e is not None and e > 0],
            [e for e in errs if e is not None and e > 0],
            label="distance to solution",
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_weights(x, path, title=None):
    """Bar chart of a solution vector, e.g. portfolio weights."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.bar(range(1, len(x) + 1), x, width=1.0)
    ax.set_xlabel("asset")
    ax.set_ylabel("weight")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
