"""Payoff catalogue: European, up-and-out, up-and-in and realised-variance calls.

Every payoff in the catalogue depends on a path only through three summaries
(terminal price, running maximum over the trading dates, realised quadratic
variation), so batch evaluation works on those summaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .leadlag import PricePath


class Kind(str, Enum):
    EUROPEAN_CALL = "EuropeanCall"
    EUROPEAN_PUT = "EuropeanPut"
    UP_AND_OUT_CALL = "UpAndOutCall"
    UP_AND_IN_CALL = "UpAndInCall"
    VARIANCE_OPTION = "VarianceOption"
    # linear claims, used as sanity anchors: a cash amount, and X_1 - K
    CONSTANT = "Constant"
    FORWARD = "Forward"


BARRIER_KINDS = (Kind.UP_AND_OUT_CALL, Kind.UP_AND_IN_CALL)


@dataclass(frozen=True)
class Payoff:
    """Parameterised payoff.

    ``strike`` is in variance units for variance options and is the paid
    amount for ``Constant``.
    """

    kind: Kind
    strike: float
    barrier: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "strike", float(self.strike))
        # variance strike 0 is the variance swap
        if self.kind is Kind.CONSTANT:
            pass
        elif self.strike < 0 or (self.strike == 0 and self.kind is not Kind.VARIANCE_OPTION):
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.kind in BARRIER_KINDS:
            if self.barrier is None or not self.barrier > 1.0:
                raise ValueError("up-barriers must lie above the normalised spot 1")
            object.__setattr__(self, "barrier", float(self.barrier))
        elif self.barrier is not None:
            raise ValueError(f"{self.kind.value} takes no barrier")

    @property
    def label(self) -> str:
        if self.barrier is None:
            return f"{self.kind.value}(K={self.strike:g})"
        return f"{self.kind.value}(K={self.strike:g},B={self.barrier:g})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "strike": self.strike}
        if self.barrier is not None:
            d["barrier"] = self.barrier
        return d

    @classmethod
    def from_dict(cls, data: dict) -> Payoff:
        return cls(Kind(data["kind"]), data["strike"], data.get("barrier"))


@dataclass(frozen=True)
class PathSummary:
    terminal: np.ndarray
    running_max: np.ndarray
    qv: np.ndarray

    @classmethod
    def of(cls, values: np.ndarray) -> PathSummary:
        values = np.atleast_2d(values)
        return cls(
            terminal=values[:, -1],
            running_max=values.max(axis=1),
            qv=np.square(np.diff(values, axis=1)).sum(axis=1),
        )


def evaluate_summary(f: Payoff, s: PathSummary) -> np.ndarray:
    if f.kind is Kind.EUROPEAN_CALL:
        return np.maximum(s.terminal - f.strike, 0.0)
    if f.kind is Kind.EUROPEAN_PUT:
        return np.maximum(f.strike - s.terminal, 0.0)
    if f.kind is Kind.UP_AND_OUT_CALL:
        return np.where(s.running_max < f.barrier, np.maximum(s.terminal - f.strike, 0.0), 0.0)
    if f.kind is Kind.UP_AND_IN_CALL:
        return np.where(s.running_max >= f.barrier, np.maximum(s.terminal - f.strike, 0.0), 0.0)
    if f.kind is Kind.VARIANCE_OPTION:
        return np.maximum(s.qv - f.strike, 0.0)
    if f.kind is Kind.CONSTANT:
        return np.full_like(s.terminal, f.strike)
    if f.kind is Kind.FORWARD:
        return s.terminal - f.strike
    raise ValueError(f"unsupported payoff kind {f.kind}")


def evaluate_batch(f: Payoff, values: np.ndarray) -> np.ndarray:
    """Payoff on each row of a ``(batch, n + 1)`` array of price samples."""
    return evaluate_summary(f, PathSummary.of(values))


def evaluate(f: Payoff, p: PricePath) -> float:
    return float(evaluate_batch(f, p.values[None])[0])


def payoff_matrix(payoffs: Sequence[Payoff], values: np.ndarray) -> np.ndarray:
    """Cash flows with shape ``(batch, len(payoffs))``."""
    s = PathSummary.of(values)
    return np.column_stack([evaluate_summary(f, s) for f in payoffs])


@dataclass(frozen=True)
class FamilyGrids:
    """Parameter ranges for the catalogue.

    Points are placed at ``lo + (i + phase) (hi - lo) / n``; in-sample and
    held-out families use different phases so they interleave.
    """

    strikes: tuple[float, float] = (0.8, 1.2)
    barrier_strikes: tuple[float, float] = (0.8, 1.2)
    barriers: tuple[float, float] = (1.05, 1.5)
    # 0.25 and 2.25 times a 20% reference variance
    variance_strikes: tuple[float, float] = (0.25 * 0.04, 2.25 * 0.04)

    def __post_init__(self):
        for name in ("strikes", "barrier_strikes", "barriers", "variance_strikes"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"empty grid range for {name}: ({lo}, {hi})")


IN_SAMPLE_PHASE = 0.25
HELD_OUT_PHASE = 0.75


def _points(rng: tuple[float, float], n: int, phase: float) -> list[float]:
    lo, hi = rng
    return [lo + (i + phase) * (hi - lo) / n for i in range(n)]


def _barrier_grid(n: int) -> tuple[int, int]:
    nk = math.ceil(math.sqrt(n))
    return nk, math.ceil(n / nk)


def build_family(
    counts: Sequence[int] = (25, 25, 25, 25),
    grids: FamilyGrids | None = None,
    phase: float = IN_SAMPLE_PHASE,
) -> list[Payoff]:
    """Deterministic catalogue with ``counts`` = (European, up-and-out, up-and-in, variance).

    Barrier options use a strikes x barriers product grid truncated to the count.
    """
    grids = grids or FamilyGrids()
    if len(counts) != 4 or any(c < 0 for c in counts):
        raise ValueError("counts must be four non-negative integers")
    if sum(counts) == 0:
        raise ValueError("empty payoff family")
    n_eu, n_uo, n_ui, n_var = counts
    family = [Payoff(Kind.EUROPEAN_CALL, k) for k in _points(grids.strikes, n_eu, phase)] if n_eu else []
    for kind, n in ((Kind.UP_AND_OUT_CALL, n_uo), (Kind.UP_AND_IN_CALL, n_ui)):
        if not n:
            continue
        nk, nb = _barrier_grid(n)
        combos = [
            Payoff(kind, k, b)
            for k in _points(grids.barrier_strikes, nk, phase)
            for b in _points(grids.barriers, nb, phase)
        ]
        family.extend(combos[:n])
    if n_var:
        family.extend(Payoff(Kind.VARIANCE_OPTION, k) for k in _points(grids.variance_strikes, n_var, phase))
    return family


def split_counts(size: int, kinds: int = 4) -> tuple[int, ...]:
    """Spread ``size`` payoffs over the four kinds as evenly as possible, earlier kinds first."""
    if size < 1:
        raise ValueError("family size must be >= 1")
    base, extra = divmod(size, kinds)
    return tuple(base + (1 if i < extra else 0) for i in range(kinds))


def check_disjoint(in_sample: Sequence[Payoff], held_out: Sequence[Payoff]) -> None:
    overlap = set(in_sample) & set(held_out)
    if overlap:
        names = ", ".join(sorted(f.label for f in overlap))
        raise ValueError(f"in-sample and held-out families overlap: {names}")


def build_families(
    in_counts: Sequence[int] = (25, 25, 25, 25),
    out_counts: Sequence[int] = (25, 25, 25, 25),
    grids: FamilyGrids | None = None,
) -> tuple[list[Payoff], list[Payoff]]:
    """In-sample and held-out catalogues on interleaved grids; raises if they share a payoff."""
    fam_in = build_family(in_counts, grids, IN_SAMPLE_PHASE)
    fam_out = build_family(out_counts, grids, HELD_OUT_PHASE)
    check_disjoint(fam_in, fam_out)
    return fam_in, fam_out


def write_catalogue(payoffs: Sequence[Payoff], dest: str | Path) -> None:
    Path(dest).write_text(json.dumps([f.to_dict() for f in payoffs], indent=1) + "\n")


def read_catalogue(src: str | Path) -> list[Payoff]:
    return [Payoff.from_dict(d) for d in json.loads(Path(src).read_text())]


def _radical_inverse(k: int) -> float:
    x, f = 0.0, 0.5
    while k:
        x += f * (k & 1)
        k >>= 1
        f /= 2
    return x


def nested_order(family: Sequence[Payoff]) -> list[Payoff]:
    """Reorder ``family`` so every prefix is spread evenly over kinds and grids.

    Kinds are interleaved round-robin; within a kind, members are taken in
    base-2 radical-inverse order of their position, so a prefix samples the
    whole grid coarsely instead of one end of it.
    """
    groups: dict[Kind, list[Payoff]] = {}
    for f in family:
        groups.setdefault(f.kind, []).append(f)
    queues = [
        [g[i] for i in sorted(range(len(g)), key=_radical_inverse)] for g in groups.values()
    ]
    out = []
    for i in range(max(len(q) for q in queues)):
        out.extend(q[i] for q in queues if i < len(q))
    return out


def subfamily(family: Sequence[Payoff], size: int) -> list[Payoff]:
    """The first ``size`` payoffs of :func:`nested_order`; sizes give nested families."""
    if size < 1:
        raise ValueError("empty payoff family")
    if size > len(family):
        raise ValueError(f"requested {size} payoffs from a family of {len(family)}")
    return nested_order(family)[:size]
