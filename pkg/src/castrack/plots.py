"""Static SVG figures drawn from an episode CSV.

Plots read the CSV that was already written, so they can never change the
numbers. Output is deterministic: a fixed SVG hash salt and no date stamp.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .export import read_csv  # noqa: E402

_RC = {"svg.hashsalt": "castrack", "svg.fonttype": "none"}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _by_target(cols: dict) -> dict[int, np.ndarray]:
    ids = cols["castaway_id"].astype(int)
    return {i: np.flatnonzero(ids == i) for i in np.unique(ids)}


def plot_trajectory(csv_path, svg_path) -> None:
    """Top view: agent path, true castaway drift and final estimates."""
    cols = read_csv(csv_path)
    groups = _by_target(cols)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 6))
        first = groups[min(groups)]
        ax.plot(cols["agent_x"][first], cols["agent_y"][first], color="black", lw=0.6, label="agent")
        for i, idx in groups.items():
            line, = ax.plot(cols["truth_x"][idx], cols["truth_y"][idx], lw=1.5, label=f"castaway {i}")
            ax.plot(cols["est_x"][idx[-1:]], cols["est_y"][idx[-1:]], "x", color=line.get_color())
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best", fontsize="small")
        ax.set_title("top view")
        _save(fig, svg_path)


def plot_traces(csv_path, svg_path) -> None:
    """Covariance trace of each target against step, log scale."""
    cols = read_csv(csv_path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        for i, idx in _by_target(cols).items():
            ax.semilogy(cols["step"][idx], cols["trace"][idx], lw=1.0, label=f"castaway {i}")
        ax.set_xlabel("step")
        ax.set_ylabel("trace of P")
        ax.legend(loc="best", fontsize="small")
        _save(fig, svg_path)


def write_plots(csv_path, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [out_dir / "trajectory.svg", out_dir / "trace.svg"]
    plot_trajectory(csv_path, paths[0])
    plot_traces(csv_path, paths[1])
    return paths
