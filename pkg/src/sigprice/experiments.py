"""End-to-end pricing experiments: market prices -> implied signature -> held-out prices."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .calibrate import (
    DEFAULT_RIDGE,
    ImpliedExpectedSignature,
    PayoffFunctional,
    Regularization,
    SignatureBasis,
    fit_implied_signature,
)
from .models import MCPrice, Market, market_prices, sample_values
from .payoffs import FamilyGrids, Kind, Payoff, build_family, check_disjoint, subfamily
from .payoffs import HELD_OUT_PHASE, IN_SAMPLE_PHASE

log = logging.getLogger(__name__)

MARKET_MODELS = ("HullWhite", "GARCH", "RoughVol")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it for diagnostics and exit codes."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ExperimentConfig:
    order: int = 5
    days: int = 252
    basis_paths: int = 10_000
    basis_seed: int = 20_210_101
    basis_params: dict = field(default_factory=lambda: {"vol_min": 0.05, "vol_max": 0.40})
    mc_paths: int = 100_000
    payoff_ridge: float = DEFAULT_RIDGE
    regularization: Regularization = field(default_factory=Regularization)
    family_counts: tuple[int, int, int, int] = (25, 25, 25, 25)
    held_out_counts: tuple[int, int, int, int] = (25, 25, 25, 25)
    grids: FamilyGrids = field(default_factory=FamilyGrids)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.basis_paths < 2 or self.mc_paths < 2:
            raise ValueError("need at least 2 basis and 2 Monte-Carlo paths")
        object.__setattr__(self, "family_counts", tuple(int(c) for c in self.family_counts))
        object.__setattr__(self, "held_out_counts", tuple(int(c) for c in self.held_out_counts))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regularization"] = self.regularization.to_dict()
        d["grids"] = {k: list(v) for k, v in asdict(self.grids).items()}
        d["family_counts"] = list(self.family_counts)
        d["held_out_counts"] = list(self.held_out_counts)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        if "regularization" in data:
            data["regularization"] = Regularization.from_dict(data["regularization"])
        if "grids" in data:
            data["grids"] = FamilyGrids(**{k: tuple(v) for k, v in data["grids"].items()})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def basis_market(self) -> Market:
        return Market("BlackScholes", dict(self.basis_params), self.days, self.basis_seed)

    def family(self) -> list[Payoff]:
        return build_family(self.family_counts, self.grids, IN_SAMPLE_PHASE)

    def held_out(self) -> list[Payoff]:
        return build_family(self.held_out_counts, self.grids, HELD_OUT_PHASE)


class PricingContext:
    """Caches the basis, fitted functionals and Monte-Carlo prices across runs."""

    def __init__(self, config: ExperimentConfig | None = None):
        self.config = config or ExperimentConfig()
        self._basis: SignatureBasis | None = None
        self._functionals: dict[Payoff, PayoffFunctional] = {}
        self._prices: dict[tuple[str, Payoff], MCPrice] = {}

    @property
    def basis(self) -> SignatureBasis:
        if self._basis is None:
            cfg = self.config
            try:
                bm = cfg.basis_market()
                log.info("simulating %d basis paths", cfg.basis_paths)
                values = sample_values(bm, cfg.basis_paths)
                self._basis = SignatureBasis(bm.timeline, values, cfg.order)
            except Exception as exc:
                raise StageError("basis", str(exc)) from exc
        return self._basis

    def functionals(self, payoffs: Sequence[Payoff]) -> list[PayoffFunctional]:
        missing = [f for f in dict.fromkeys(payoffs) if f not in self._functionals]
        if missing:
            try:
                for fn in self.basis.fit(missing, self.config.payoff_ridge):
                    self._functionals[fn.payoff] = fn
            except StageError:
                raise
            except Exception as exc:
                raise StageError("functionals", str(exc)) from exc
        return [self._functionals[f] for f in payoffs]

    def prices(self, market: Market, payoffs: Sequence[Payoff]) -> list[MCPrice]:
        key = json.dumps(market.to_dict(), sort_keys=True)
        missing = [f for f in dict.fromkeys(payoffs) if (key, f) not in self._prices]
        if missing:
            if market.days != self.config.days:
                raise StageError("market", f"market has {market.days} days, config {self.config.days}")
            try:
                log.info("pricing %d payoffs under %s", len(missing), market.model)
                for f, p in zip(missing, market_prices(market, missing, self.config.mc_paths)):
                    self._prices[(key, f)] = p
            except Exception as exc:
                raise StageError("market", str(exc)) from exc
        return [self._prices[(key, f)] for f in payoffs]


@dataclass(frozen=True)
class PredictionRow:
    payoff_id: int
    label: str
    kind: str
    true_price: float
    std_err: float
    predicted_price: float
    error: float


def compute_metrics(rows: Sequence[PredictionRow]) -> dict:
    """R^2 (1 - SS_res / SS_tot over held-out prices), MSE and MAE; R^2 also over non-vanilla rows."""
    if not rows:
        raise ValueError("empty prediction table")
    t = np.array([r.true_price for r in rows])
    p = np.array([r.predicted_price for r in rows])
    exotic = np.array([r.kind != Kind.EUROPEAN_CALL.value for r in rows])
    return {
        "n": len(rows),
        "r2": _r2(t, p),
        "r2_exotic": _r2(t[exotic], p[exotic]) if exotic.sum() >= 2 else float("nan"),
        "mse": float(np.mean((p - t) ** 2)),
        "mae": float(np.mean(np.abs(p - t))),
    }


def _r2(t: np.ndarray, p: np.ndarray) -> float:
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    ss_res = float(np.sum((t - p) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else float("-inf")
    return 1.0 - ss_res / ss_tot


@dataclass
class ExperimentReport:
    model: str
    market: dict
    family_size: int
    rows: list[PredictionRow]
    metrics: dict
    calibration: dict
    config: dict

    def check_metrics(self) -> None:
        """Raise if the stored metrics do not recompute from the prediction table."""
        again = compute_metrics(self.rows)
        for k, v in again.items():
            stored = self.metrics.get(k)
            if not (stored == v or (isinstance(v, float) and np.isnan(v) and np.isnan(stored))):
                raise ValueError(f"metric {k} does not match the prediction table: {stored} vs {v}")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "market": self.market,
            "family_size": self.family_size,
            "metrics": self.metrics,
            "calibration": self.calibration,
            "config": self.config,
            "predictions": [asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentReport:
        rep = cls(
            model=data["model"],
            market=data["market"],
            family_size=int(data["family_size"]),
            rows=[PredictionRow(**r) for r in data["predictions"]],
            metrics=data["metrics"],
            calibration=data["calibration"],
            config=data["config"],
        )
        rep.check_metrics()
        return rep

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["payoff_id", "label", "kind", "true_price", "std_err", "predicted_price", "error"])
        for r in self.rows:
            w.writerow([r.payoff_id, r.label, r.kind, repr(r.true_price), repr(r.std_err),
                        repr(r.predicted_price), repr(r.error)])
        return buf.getvalue()

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "family_size", "r2", "r2_exotic", "mse", "mae"])
        m = self.metrics
        w.writerow([self.model, self.family_size, repr(m["r2"]), repr(m["r2_exotic"]),
                    repr(m["mse"]), repr(m["mae"])])
        return buf.getvalue()


def run_pricing_experiment(
    market: Market,
    family: Sequence[Payoff] | None = None,
    held_out: Sequence[Payoff] | None = None,
    config: ExperimentConfig | None = None,
    context: PricingContext | None = None,
) -> ExperimentReport:
    """Calibrate an implied expected signature to ``family`` and price ``held_out``.

    "True" held-out prices are Monte-Carlo prices on the same market paths
    that price the family.
    """
    if context is None:
        context = PricingContext(config)
    cfg = context.config
    family = list(cfg.family() if family is None else family)
    held_out = list(cfg.held_out() if held_out is None else held_out)
    if not family:
        raise StageError("family", "empty payoff family")
    if not held_out:
        raise StageError("family", "empty held-out family")
    try:
        check_disjoint(family, held_out)
    except ValueError as exc:
        raise StageError("family", str(exc)) from exc

    prices_in = context.prices(market, family)
    prices_out = context.prices(market, held_out)
    fns_in = context.functionals(family)
    fns_out = context.functionals(held_out)
    try:
        implied = fit_implied_signature(
            fns_in,
            [p.price for p in prices_in],
            cfg.order,
            cfg.regularization,
            basis=context.basis,
        )
    except Exception as exc:
        raise StageError("implied", str(exc)) from exc

    rows = []
    for i, (f, fn, p) in enumerate(zip(held_out, fns_out, prices_out)):
        pred = implied.price(fn)
        rows.append(PredictionRow(i, f.label, f.kind.value, p.price, p.std_err, pred, pred - p.price))
    calibration = {
        "rank": implied.rank,
        "numerical_rank": implied.numerical_rank,
        "max_residual": implied.max_residual,
        "min_functional_r2": min(fn.r2 for fn in fns_in),
        "family": [f.to_dict() for f in family],
    }
    return ExperimentReport(
        model=market.model,
        market=market.to_dict(),
        family_size=len(family),
        rows=rows,
        metrics=compute_metrics(rows),
        calibration=calibration,
        config=cfg.to_dict(),
    )


def calibrate_market(
    market: Market, family: Sequence[Payoff], context: PricingContext
) -> ImpliedExpectedSignature:
    prices = context.prices(market, family)
    fns = context.functionals(family)
    try:
        return fit_implied_signature(
            fns, [p.price for p in prices], context.config.order,
            context.config.regularization, basis=context.basis,
        )
    except Exception as exc:
        raise StageError("implied", str(exc)) from exc


@dataclass
class SweepResult:
    sizes: list[int]
    reports: list[ExperimentReport]

    @property
    def r2(self) -> list[float]:
        return [r.metrics["r2"] for r in self.reports]

    @property
    def non_decreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.r2, self.r2[1:]))

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family_size", "r2", "r2_exotic", "mse", "mae"])
        for s, r in zip(self.sizes, self.reports):
            m = r.metrics
            w.writerow([s, repr(m["r2"]), repr(m["r2_exotic"]), repr(m["mse"]), repr(m["mae"])])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"sizes": self.sizes, "r2": self.r2, "non_decreasing": self.non_decreasing}


def run_family_size_sweep(
    market: Market,
    sizes: Sequence[int] = (33, 66, 100),
    config: ExperimentConfig | None = None,
    context: PricingContext | None = None,
) -> SweepResult:
    """Repeat the experiment on nested prefixes of the configured family."""
    sizes = list(sizes)
    if not sizes:
        raise StageError("family", "no family sizes given")
    if any(s < 1 for s in sizes):
        raise StageError("family", "empty payoff family")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise StageError("family", "sizes must be strictly increasing")
    if context is None:
        context = PricingContext(config)
    full = context.config.family()
    if sizes[-1] > len(full):
        raise StageError("family", f"largest size {sizes[-1]} exceeds the family of {len(full)}")
    held_out = context.config.held_out()
    reports = [
        run_pricing_experiment(market, subfamily(full, s), held_out, context=context) for s in sizes
    ]
    return SweepResult(sizes, reports)
