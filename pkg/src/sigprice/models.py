"""Seeded Monte-Carlo path laws: Black-Scholes, Hull-White, GARCH(1,1), rough Bergomi.

All models run at zero interest rate, so simulated prices are already
discounted and are martingales started at 1. Every path draws its normals from
its own Philox stream keyed by ``(path_index, seed)``, which makes a batch
independent of chunking and of how the work is split across processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .leadlag import PricePath, uniform_timeline

MODELS = ("BlackScholes", "HullWhite", "GARCH", "RoughVol")

DEFAULT_PARAMS: dict[str, dict] = {
    "BlackScholes": {"vol_min": 0.05, "vol_max": 0.40},
    "HullWhite": {"vol0": 0.20, "vol_of_vol": 0.5, "rho": 0.0, "var_drift": 0.0},
    # daily (omega, alpha, beta); long-run daily variance omega / (1 - alpha - beta)
    # = 1.6e-4, i.e. about 20% annualised over 252 days
    "GARCH": {"omega": 8e-6, "alpha": 0.10, "beta": 0.85},
    "RoughVol": {"H": 0.10, "eta": 1.9, "rho": -0.7, "xi0": 0.04},
}


@dataclass(frozen=True)
class Market:
    """A named path law: model, parameters, trading timeline and seed."""

    model: str
    params: dict = field(default_factory=dict)
    days: int = 252
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        merged = {**DEFAULT_PARAMS[self.model], **self.params}
        unknown = set(merged) - set(DEFAULT_PARAMS[self.model]) - {"vol"}
        if unknown:
            raise ValueError(f"unknown parameters for {self.model}: {sorted(unknown)}")
        object.__setattr__(self, "params", merged)
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        _VALIDATORS[self.model](merged)

    @property
    def timeline(self) -> np.ndarray:
        return uniform_timeline(self.days)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> Market:
        return cls(
            model=data["model"],
            params=dict(data.get("params", {})),
            days=int(data.get("days", 252)),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> Market:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _validate_bs(p):
    if "vol" in p:
        if p["vol"] < 0:
            raise ValueError("volatility must be non-negative")
    elif not 0 <= p["vol_min"] <= p["vol_max"]:
        raise ValueError("need 0 <= vol_min <= vol_max")


def _validate_hw(p):
    if p["vol0"] < 0:
        raise ValueError("initial volatility must be non-negative")
    if p["vol_of_vol"] < 0:
        raise ValueError("vol-of-vol must be non-negative")
    if not -1 <= p["rho"] <= 1:
        raise ValueError("correlation must lie in [-1, 1]")


def _validate_garch(p):
    if p["omega"] <= 0 or p["alpha"] < 0 or p["beta"] < 0:
        raise ValueError("GARCH needs omega > 0 and alpha, beta >= 0")
    if p["alpha"] + p["beta"] >= 1:
        raise ValueError("GARCH needs alpha + beta < 1 for a finite long-run variance")


def _validate_rough(p):
    if not 0 < p["H"] <= 0.5:
        raise ValueError(f"Hurst parameter must lie in (0, 1/2], got {p['H']}")
    if p["eta"] < 0:
        raise ValueError("vol-of-vol eta must be non-negative")
    if not -1 <= p["rho"] <= 1:
        raise ValueError("correlation must lie in [-1, 1]")
    if p["xi0"] <= 0:
        raise ValueError("forward variance xi0 must be positive")


_VALIDATORS: dict[str, Callable[[dict], None]] = {
    "BlackScholes": _validate_bs,
    "HullWhite": _validate_hw,
    "GARCH": _validate_garch,
    "RoughVol": _validate_rough,
}

# (normal rows per path, uniforms per path)
_DRAWS = {"BlackScholes": (1, 1), "HullWhite": (2, 0), "GARCH": (1, 0), "RoughVol": (3, 0)}


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Philox stream for one path; the 128-bit key packs ``(index, seed)``."""
    return np.random.Generator(np.random.Philox(key=(int(index) << 64) | int(seed)))


def _draw(m: Market, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    rows, n_unif = _DRAWS[m.model]
    z = np.empty((count, rows, m.days))
    u = np.empty((count, n_unif))
    for i in range(count):
        g = path_generator(m.seed, start + i)
        if n_unif:
            u[i] = g.random(n_unif)
        z[i] = g.standard_normal((rows, m.days))
    return z, u


def _log_to_prices(log_inc: np.ndarray) -> np.ndarray:
    out = np.empty((log_inc.shape[0], log_inc.shape[1] + 1))
    out[:, 0] = 0.0
    np.cumsum(log_inc, axis=1, out=out[:, 1:])
    return np.exp(out)


def _black_scholes(p, z, u, dt):
    if "vol" in p:
        sigma = np.full((z.shape[0], 1), float(p["vol"]))
    else:
        sigma = (p["vol_min"] + (p["vol_max"] - p["vol_min"]) * u[:, 0])[:, None]
    return _log_to_prices(sigma * math.sqrt(dt) * z[:, 0] - 0.5 * sigma**2 * dt)


def _hull_white(p, z, u, dt):
    # variance is geometric Brownian motion, sampled exactly; price uses the
    # left-point variance on each step, which keeps it a martingale
    xi, rho = p["vol_of_vol"], p["rho"]
    zv = z[:, 1]
    zs = rho * zv + math.sqrt(1 - rho**2) * z[:, 0]
    log_v = np.empty_like(zv)
    log_v[:, 0] = 2 * math.log(p["vol0"]) if p["vol0"] > 0 else -np.inf
    log_v[:, 1:] = log_v[:, :1] + np.cumsum(
        (p["var_drift"] - 0.5 * xi**2) * dt + xi * math.sqrt(dt) * zv[:, :-1], axis=1
    )
    v = np.exp(log_v)
    return _log_to_prices(np.sqrt(v * dt) * zs - 0.5 * v * dt)


def _garch(p, z, u, dt):
    omega, alpha, beta = p["omega"], p["alpha"], p["beta"]
    n = z.shape[2]
    h = np.full(z.shape[0], omega / (1 - alpha - beta))
    log_inc = np.empty((z.shape[0], n))
    for k in range(n):
        r = np.sqrt(h) * z[:, 0, k]
        log_inc[:, k] = r - 0.5 * h
        h = omega + alpha * r**2 + beta * h
    return _log_to_prices(log_inc)


def _hybrid_kernel(a: float, n: int) -> np.ndarray:
    """Weights of the Riemann part of the kappa = 1 hybrid scheme, ``g(b_k / n)``."""
    k = np.arange(2, n + 1, dtype=float)
    gamma = np.zeros(n + 1)
    if a == 0.0:
        gamma[2:] = 1.0
    else:
        b = ((k ** (a + 1) - (k - 1) ** (a + 1)) / (a + 1)) ** (1 / a)
        gamma[2:] = (b / n) ** a
    return gamma


def _rough_bergomi(p, z, u, dt):
    H, eta, rho, xi0 = p["H"], p["eta"], p["rho"], p["xi0"]
    a = H - 0.5
    n = z.shape[2]
    # (increment of W, exact near-diagonal Volterra integral) per step
    c01 = dt ** (a + 1) / (a + 1)
    cov = np.array([[dt, c01], [c01, dt ** (2 * a + 1) / (2 * a + 1)]])
    if a == 0.0:
        # singular covariance: the near term is the Brownian increment itself
        chol = np.array([[math.sqrt(dt), 0.0], [math.sqrt(dt), 0.0]])
    else:
        chol = np.linalg.cholesky(cov)
    dw = z[:, 0] * chol[0, 0]
    near = z[:, 0] * chol[1, 0] + z[:, 1] * chol[1, 1]
    gamma = _hybrid_kernel(a, n)
    # volterra[:, i] = near[:, i-1] + sum_{k>=2} gamma[k] dw[:, i-k], volterra[:, 0] = 0
    toeplitz = np.zeros((n, n))
    for k in range(2, n + 1):
        idx = np.arange(n - k + 1)
        toeplitz[idx, idx + k - 1] = gamma[k]
    volterra = np.zeros((z.shape[0], n + 1))
    volterra[:, 1:] = near + dw @ toeplitz
    t = np.arange(n + 1) * dt
    v = xi0 * np.exp(eta * math.sqrt(2 * a + 1) * volterra - 0.5 * eta**2 * t ** (2 * a + 1))
    db = rho * dw + math.sqrt(1 - rho**2) * z[:, 2] * math.sqrt(dt)
    v_left = v[:, :-1]
    return _log_to_prices(np.sqrt(v_left) * db - 0.5 * v_left * dt)


_SIMULATORS = {
    "BlackScholes": _black_scholes,
    "HullWhite": _hull_white,
    "GARCH": _garch,
    "RoughVol": _rough_bergomi,
}


def sample_values(m: Market, count: int, start: int = 0, chunk: int = 4096) -> np.ndarray:
    """Price samples of paths ``start .. start + count - 1`` as a ``(count, days + 1)`` array."""
    if count < 1:
        raise ValueError("count must be >= 1")
    dt = 1.0 / m.days
    out = np.empty((count, m.days + 1))
    for s in range(0, count, chunk):
        c = min(chunk, count - s)
        z, u = _draw(m, start + s, c)
        out[s : s + c] = _SIMULATORS[m.model](m.params, z, u, dt)
    out[:, 0] = 1.0
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise FloatingPointError(f"{m.model} produced non-finite or non-positive prices")
    return out


def sample_paths(m: Market, count: int, start: int = 0) -> list[PricePath]:
    times = m.timeline
    return [PricePath(times, row) for row in sample_values(m, count, start)]


def iter_chunks(m: Market, count: int, chunk: int = 8192):
    """Yield ``(start, values)`` blocks covering ``count`` paths."""
    for s in range(0, count, chunk):
        c = min(chunk, count - s)
        yield s, sample_values(m, c, start=s)


@dataclass(frozen=True)
class MCPrice:
    price: float
    std_err: float


def market_prices(
    m: Market, payoffs: Sequence, mc_paths: int = 100_000, chunk: int = 8192
) -> list[MCPrice]:
    """Monte-Carlo prices of several payoffs on one shared set of market paths."""
    from .payoffs import payoff_matrix

    if mc_paths < 2:
        raise ValueError("need at least 2 Monte-Carlo paths for a standard error")
    k = len(payoffs)
    total = np.zeros(k)
    total_sq = np.zeros(k)
    for _, values in iter_chunks(m, mc_paths, chunk):
        cf = payoff_matrix(payoffs, values)
        total += cf.sum(axis=0)
        total_sq += np.square(cf).sum(axis=0)
    mean = total / mc_paths
    var = np.maximum(total_sq / mc_paths - mean**2, 0.0) * mc_paths / (mc_paths - 1)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
        raise FloatingPointError("Monte-Carlo payoff estimate diverged")
    se = np.sqrt(var / mc_paths)
    return [MCPrice(float(p), float(s)) for p, s in zip(mean, se)]


def market_price(m: Market, f, mc_paths: int = 100_000) -> MCPrice:
    """Monte-Carlo price of ``f`` under ``m`` with its standard error."""
    return market_prices(m, [f], mc_paths)[0]
