"""CSV and binary writers for samples, trajectories and curves.

Floats are written with 17 significant digits so doubles round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metrics import SampleSet

FLOAT_FMT = "%.17g"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_samples_csv(path, samples: SampleSet) -> None:
    d = samples.dim
    write_rows(Path(path), [f"x{k}" for k in range(d)], (list(map(float, r)) for r in samples.samples))


def read_samples_csv(path) -> SampleSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SampleSet(data, {"source": str(path)})


def write_samples_binary(path, samples: SampleSet) -> None:
    """Little-endian float64 ``.npy`` dump of the (n, d) sample array."""
    np.save(path, np.ascontiguousarray(samples.samples, dtype="<f8"), allow_pickle=False)


def read_samples_binary(path) -> SampleSet:
    return SampleSet(np.load(path, allow_pickle=False), {"source": str(path)})


def write_trajectory_csv(path, traj) -> None:
    """One row per (chain, step); columns chain, step, t, z*, xhat*, xtilde*."""
    n, d = traj.z.shape[1], traj.z.shape[2]
    header = ["chain", "step", "t"]
    header += [f"z{k}" for k in range(d)] + [f"xhat{k}" for k in range(d)] + [f"xtilde{k}" for k in range(d)]

    def rows():
        for c in range(n):
            for i in range(traj.steps, -1, -1):
                yield [c, i, float(traj.times[i]), *map(float, traj.z[i, c]),
                       *map(float, traj.xhat[i, c]), *map(float, traj.xtilde[i, c])]

    write_rows(Path(path), header, rows())


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
