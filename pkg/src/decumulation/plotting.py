"""SVG small multiples of cohort equity paths.

A cohort is drawn solid up to its first breach; the rest of a failed cohort
is drawn as a dashed horizontal line at zero. Statistics never depend on this.
"""

from __future__ import annotations

from typing import Sequence


def write_equity_svg(panels: Sequence, path, ncols: int = 3) -> None:
    """``panels`` is a sequence of objects with ``report`` and a ``report.label``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "decumulation"
    nrows = max(1, -(-len(panels) // ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(4 * ncols, 3 * nrows), squeeze=False)
    for ax in axes.flat[len(panels):]:
        ax.set_visible(False)
    for ax, panel in zip(axes.flat, panels):
        report = panel.report
        for tr in report.trajectories:
            x = range(len(tr.equity_path))
            fb = tr.first_breach
            if fb is None:
                ax.plot(x, tr.equity_path, lw=0.5, color="tab:blue", alpha=0.5)
            else:
                ax.plot(range(fb + 1), tr.equity_path[: fb + 1], lw=0.5, color="tab:red", alpha=0.6)
                ax.plot([fb, len(tr.equity_path) - 1], [0.0, 0.0], lw=0.5, ls="--", color="tab:red")
        ax.axhline(0.0, color="black", lw=0.5)
        ax.set_title(f"{report.label}\nfailure {report.failure_rate:.0%}", fontsize=7)
        ax.set_xlabel("month", fontsize=7)
        ax.set_ylabel("equity / W", fontsize=7)
        ax.tick_params(labelsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
