"""CSV and JSON writers.

Every artifact carries the seed and the fully resolved configuration: CSVs in
a single leading ``# `` comment line, JSON files under ``"seed"`` and
``"config"``. Floats are written with 9 significant digits. Wall-clock plan
times are left out of CSVs so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

TRUTH_COLUMNS = ("step", "castaway_id", "x", "y", "z")
EPISODE_COLUMNS = (
    "step", "castaway_id",
    "agent_x", "agent_y", "agent_z", "agent_vx", "agent_vy", "agent_vz",
    "u_x", "u_y", "u_z",
    "truth_x", "truth_y", "truth_z",
    "est_x", "est_y", "est_vx", "est_vy",
    "trace", "detected",
)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def header_line(seed: int, config: dict) -> str:
    meta = {"seed": seed, "config": config}
    return "# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def read_header(path) -> dict:
    """Parse the ``# `` metadata line of a CSV written here."""
    with Path(path).open() as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise ValueError(f"{path}: no metadata header")
    return json.loads(first[2:])


def _write_rows(path, seed, config, columns, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(header_line(seed, config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_truth_csv(path, truth: np.ndarray, seed: int, config: dict) -> None:
    """``truth`` is ``(C, n, 3)`` with row 0 the initial positions (step 0)."""
    C, n, _ = truth.shape
    rows = ((k, i, *truth[i, k]) for k in range(n) for i in range(C))
    _write_rows(path, seed, config, TRUTH_COLUMNS, rows)


def episode_rows(log):
    C = log.trace.shape[1]
    for k, step in enumerate(log.steps):
        for i in range(C):
            yield (
                int(step), i,
                *log.agent[k], *log.control[k],
                *log.truth[k, i],
                *log.mean[k, i],
                log.trace[k, i], bool(log.detected[k, i]),
            )


def write_episode_csv(path, log, config: dict) -> None:
    _write_rows(path, log.seed, config, EPISODE_COLUMNS, episode_rows(log))


def read_csv(path) -> dict[str, np.ndarray]:
    """Load a CSV written here into float columns keyed by name."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    names = next(reader)
    data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    if data.size == 0:
        data = np.empty((0, len(names)))
    return {name: data[:, j] for j, name in enumerate(names)}


def write_json(path, payload: dict, seed: int | None, config: dict | None) -> None:
    doc = {"seed": seed, "config": config, **payload}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
