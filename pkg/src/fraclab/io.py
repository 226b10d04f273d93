"""CSV and JSON artifacts: grid fields, time series and run manifests."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridFunction, make_grid


def fmt(x) -> str:
    """17-significant-digit float text (round-trips exactly)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_grid_csv(path, u: GridFunction):
    """Columns ``x1[,x2[,x3]],value`` in row-major node order."""
    spec = u.spec
    cols = [c.reshape(-1) for c in spec.coords()] + [u.values.reshape(-1)]
    header = [f"x{i + 1}" for i in range(spec.n)] + ["value"]
    write_csv(path, header, zip(*cols))


def read_grid_csv(path) -> GridFunction:
    header, rows = read_csv(path)
    n = len(header) - 1
    if n not in (1, 2, 3) or header[-1] != "value":
        raise ValueError(f"unrecognised grid header {header}")
    data = np.array(rows, dtype=float)
    N = round(len(data) ** (1.0 / n))
    x = data[:, 0]
    L = -float(x.min())
    spec = make_grid(n, L, N)
    if not np.allclose(data[:, :n].reshape(-1), np.stack(
            [c.reshape(-1) for c in spec.coords()], axis=1).reshape(-1), rtol=0, atol=1e-9 * L):
        raise ValueError("grid coordinates do not match a uniform periodic grid")
    return GridFunction(spec, data[:, n])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return None if math.isnan(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, ensure_ascii=False)


@dataclass
class RunManifest:
    command: str
    parameters: dict
    grid: dict
    tool_version: str
    statuses: list = field(default_factory=list)
    wall_time: float = 0.0
    state: str = "running"
    extra: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def as_dict(self):
        return {
            "command": self.command,
            "parameters": self.parameters,
            "grid": self.grid,
            "tool_version": self.tool_version,
            "statuses": self.statuses,
            "wall_time": self.wall_time,
            "state": self.state,
            **self.extra,
        }

    def write(self, path):
        write_json(path, self.as_dict())

    def finalize(self, path, statuses=(), **extra):
        self.statuses = list(statuses)
        self.extra.update(extra)
        self.wall_time = time.perf_counter() - self._t0
        self.state = "finished"
        self.write(path)
