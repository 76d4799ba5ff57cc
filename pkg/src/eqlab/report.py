"""CSV/JSON/SVG artifact writers for the experiment runner.

Numeric CSV cells use scientific notation with 17 significant digits, '.'
decimal separator and LF line endings; SVG figures are rendered through the
Agg backend with a fixed hash salt so reruns are byte-identical.
"""

from __future__ import annotations

import json
import os
import platform
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "eqlab"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt
import numpy as np
import scipy

from . import __version__


def fmt_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _jsonable(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "p") and hasattr(obj, "q"):
        return f"{obj.p}/{obj.q}"
    if hasattr(obj, "__float__") and not isinstance(obj, (str, int, float, bool)):
        return float(obj)
    return obj


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", newline="\n")


def write_manifest(outdir: Path, command: str, config: dict, t_start: float) -> None:
    manifest = {
        "command": command,
        "config": _jsonable(config),
        "versions": {
            "eqlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": time.time() - t_start,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    write_json(outdir / "manifest.json", manifest)


def new_figure(figsize=(6.0, 4.5)):
    return plt.subplots(figsize=figsize, dpi=100)


def save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def indicatrix_figure(points: np.ndarray, title: str):
    fig, ax = new_figure((5.0, 5.0))
    closed = np.vstack([points, points[:1]])
    ax.plot(closed[:, 0], closed[:, 1], "-", lw=0.8, color="#1f77b4")
    ax.plot([0.0], [0.0], "+", ms=10, color="#d62728")
    ax.set_aspect("equal")
    ax.set_xlabel("dx")
    ax.set_ylabel("dy")
    ax.set_title(title)
    return fig


def pinch_figure(ells: np.ndarray, mags: np.ndarray, title: str):
    fig, ax = new_figure()
    ax.loglog(ells, mags, ".-", ms=3, lw=0.7, label="cumulative magnitude")
    ref = 2.0 * ells * np.maximum(1.0, np.log(1.0 / ells))
    ax.loglog(ells, ref[0] - ref + 1e-300, "--", lw=0.8, label="2 l log(1/l) reference")
    ax.set_xlabel("l_alpha")
    ax.set_ylabel("magnitude")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    ax.set_title(title)
    return fig
