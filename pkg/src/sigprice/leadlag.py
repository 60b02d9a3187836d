"""Price paths and their lead-lag embedding into R^2 + R.

Component order of the embedded path: 1 = time (lagged), 2 = lagged price,
3 = leading price.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TIME, LAG, LEAD = 1, 2, 3


@dataclass(frozen=True, eq=False)
class PricePath:
    """Discounted price samples on a timeline ``0 = t_0 < ... < t_n = 1`` with ``X_0 = 1``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        x = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.shape != x.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size < 2:
            raise ValueError("a price path needs at least 2 samples")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("timeline must start at 0 and end at 1")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if x[0] != 1.0:
            raise ValueError(f"initial price must be normalised to 1, got {x[0]}")
        if np.any(x <= 0):
            raise ValueError("prices must be positive")
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, PricePath):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.values, other.values
        )

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> PricePath:
        return cls(np.asarray(data["times"]), np.asarray(data["values"]))


def uniform_timeline(days: int = 252) -> np.ndarray:
    """``days`` equally spaced trading steps on [0, 1] (``days + 1`` sample times)."""
    if days < 1:
        raise ValueError("need at least one trading step")
    return np.linspace(0.0, 1.0, days + 1)


@dataclass(frozen=True, eq=False)
class LeadLagPath:
    """Piecewise-linear path through ``2n + 1`` vertices in R^3.

    Vertex ``j`` sits at parameter ``j / 2n``.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 2:
            raise ValueError(f"vertices must have shape (m >= 2, 3), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.vertices, axis=0)

    @property
    def parameters(self) -> np.ndarray:
        m = self.vertices.shape[0] - 1
        return np.arange(m + 1) / m


def lead_lag_vertices(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Vectorised lead-lag vertices for one path or a batch.

    ``values`` may be ``(n + 1,)`` or ``(batch, n + 1)``; the result has shape
    ``(..., 2n + 1, 3)``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    n = times.size - 1
    if n < 1:
        raise ValueError("lead-lag transform needs at least 2 samples")
    batch_shape = values.shape[:-1]
    out = np.empty(batch_shape + (2 * n + 1, 3))
    out[..., 0::2, 0] = times
    out[..., 1::2, 0] = times[:-1]
    out[..., 0::2, 1] = values
    out[..., 1::2, 1] = values[..., :-1]
    out[..., 0::2, 2] = values
    out[..., 1::2, 2] = values[..., 1:]
    return out


def lead_lag(path: PricePath) -> LeadLagPath:
    """Lead-lag transform: even vertices ``(t_k, X_k, X_k)``, odd ``(t_k, X_k, X_{k+1})``."""
    return LeadLagPath(lead_lag_vertices(path.times, path.values))


def _check_upto(llp: LeadLagPath, upto: int | None) -> int:
    m = llp.vertices.shape[0]
    if upto is None:
        return m - 1
    if not 0 <= upto < m:
        raise IndexError(f"vertex index {upto} outside 0..{m - 1}")
    return upto


def project_lag(llp: LeadLagPath, upto: int | None = None) -> np.ndarray:
    """(time, lagged price) at vertices ``0..upto``: information available without look-ahead."""
    k = _check_upto(llp, upto)
    return llp.vertices[: k + 1, :2].copy()


def project_lead(llp: LeadLagPath, upto: int | None = None) -> np.ndarray:
    """Leading price at vertices ``0..upto``."""
    k = _check_upto(llp, upto)
    return llp.vertices[: k + 1, 2].copy()


def read_path_csv(path: str | Path) -> PricePath:
    """Read a single path from CSV with header ``t,x``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["t", "x"]:
            raise ValueError(f"{path}: expected CSV header 't,x'")
        rows = [(float(r["t"]), float(r["x"])) for r in reader]
    t, x = zip(*rows) if rows else ((), ())
    return PricePath(np.array(t), np.array(x))


def write_path_csv(path: PricePath, dest: str | Path) -> None:
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"])
        for t, x in zip(path.times, path.values):
            w.writerow([repr(float(t)), repr(float(x))])


def write_batch(paths: Iterable[PricePath], dest: str | Path) -> None:
    """One JSON object per line: ``{"times": [...], "values": [...]}``."""
    with open(dest, "w") as fh:
        for p in paths:
            fh.write(json.dumps(p.to_dict()) + "\n")


def read_batch(src: str | Path) -> list[PricePath]:
    with open(src) as fh:
        return [PricePath.from_dict(json.loads(line)) for line in fh if line.strip()]


def stack_values(paths: Sequence[PricePath]) -> tuple[np.ndarray, np.ndarray]:
    """Stack paths sharing one timeline into ``(times, values[batch, n + 1])``."""
    if not paths:
        raise ValueError("empty path collection")
    times = paths[0].times
    for p in paths[1:]:
        if not np.array_equal(p.times, times):
            raise ValueError("paths do not share a timeline")
    return times, np.stack([p.values for p in paths])
