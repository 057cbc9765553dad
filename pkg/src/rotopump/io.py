"""Deterministic CSV/JSON writers, plot-data blocks and the run manifest."""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from .errors import RotopumpError

__all__ = ["fmt", "write_csv", "read_csv", "write_json", "write_plot_data", "write_manifest", "package_versions"]


def fmt(x) -> str:
    """Shortest round-trip text for a number; bools and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _open(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise RotopumpError(f"cannot write {path}: {exc}") from None


def write_csv(path, columns: dict) -> Path:
    """Write equal-length columns with a header row; '\\n' line ends."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    if len({len(c) for c in data}) > 1:
        raise ValueError("columns differ in length")
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path) -> dict:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] for r in body]
        try:
            out[name] = np.array([float(x) for x in col])
        except ValueError:
            out[name] = col
    return out


def write_json(path, obj) -> Path:
    path = Path(path)
    with _open(path) as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_plot_data(path, x, y, figure: str, xlabel: str, ylabel: str, notes: list[str] | None = None) -> Path:
    """Two whitespace-separated columns with '#' header comments."""
    path = Path(path)
    with _open(path) as fh:
        fh.write(f"# reproduces {figure}\n")
        for line in notes or []:
            fh.write(f"# {line}\n")
        fh.write(f"# {xlabel} {ylabel}\n")
        for a, b in zip(np.asarray(x), np.asarray(y)):
            fh.write(f"{fmt(a)} {fmt(b)}\n")
    return path


def package_versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {
        "rotopump": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "platform": platform.platform(),
    }


def write_manifest(out_dir, command: str, params, seed: int, threads: int, wall_time: float,
                   artifacts: list[Path], params_file: str | None = None) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "params_file": params_file,
        "parameters": params.values,
        "config_hash": params.config_hash(),
        "seed": seed,
        "threads": threads,
        "versions": package_versions(),
        "wall_time_s": wall_time,
        "artifacts": sorted(str(Path(a).relative_to(out_dir)) for a in artifacts),
    }
    return write_json(out_dir / "manifest.json", manifest)
