"""Signature regressions: payoff -> linear functional, prices -> implied expected signature.

Two least-squares problems share one set of basis paths:

* each payoff is regressed on the lead-lag signatures of the basis paths,
  giving a functional ``l_F`` with ``<l_F, Sig(path)> ~ F(path)``;
* market prices of a family of payoffs are inverted through the stacked map
  ``E -> (<l_F, E>)_F`` to obtain an implied expected signature ``E``.

Both solves go through an SVD, so rank deficiency is visible and handled by
pseudo-inversion rather than failing.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .leadlag import PricePath, stack_values
from .payoffs import Payoff, payoff_matrix
from .signature import DEFAULT_ORDER, lead_lag_signatures
from .tensor import LinearFunctional, TruncatedTensor, dimension, pair

DEFAULT_RIDGE = 1e-8


class RankDeficiencyWarning(UserWarning):
    """An unregularised solve met a singular system and fell back to minimum norm."""


@dataclass(frozen=True, eq=False)
class PayoffFunctional:
    payoff: Payoff
    functional: LinearFunctional
    r2: float
    residual: float  # in-sample root-mean-square error on the basis paths
    rank: int = 0
    ridge: float = DEFAULT_RIDGE

    def price(self, expected_signature: TruncatedTensor) -> float:
        return pair(self.functional, expected_signature)

    def to_dict(self) -> dict:
        return {
            **self.functional.to_dict(),
            "payoff": self.payoff.to_dict(),
            "r2": self.r2,
            "residual": self.residual,
            "rank": self.rank,
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PayoffFunctional:
        return cls(
            payoff=Payoff.from_dict(data["payoff"]),
            functional=TruncatedTensor.from_dict(data),
            r2=float(data["r2"]),
            residual=float(data["residual"]),
            rank=int(data.get("rank", 0)),
            ridge=float(data.get("ridge", DEFAULT_RIDGE)),
        )


class SignatureBasis:
    """Basis paths, their order-N lead-lag signatures and the standardised design.

    Columns that are constant across the basis (pure-time words, whose
    iterated integrals are the same for every path on a fixed timeline) are
    dropped from the regression; their effect is carried by the intercept.
    """

    def __init__(self, times: np.ndarray, values: np.ndarray, order: int = DEFAULT_ORDER,
                 signatures: np.ndarray | None = None, check_distinct: bool = True):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] < 2:
            raise ValueError("need at least 2 basis paths")
        if check_distinct and np.unique(values, axis=0).shape[0] != values.shape[0]:
            raise ValueError("basis paths must be pairwise distinct")
        self.times = np.asarray(times, dtype=float)
        self.values = values
        self.order = order
        if signatures is None:
            signatures = lead_lag_signatures(self.times, values, order)
        if signatures.shape != (values.shape[0], dimension(3, order)):
            raise ValueError("signature array does not match the paths and order")
        self.signatures = signatures

    @classmethod
    def from_paths(cls, paths: Sequence[PricePath], order: int = DEFAULT_ORDER) -> SignatureBasis:
        times, values = stack_values(paths)
        return cls(times, values, order)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @cached_property
    def mean_signature(self) -> np.ndarray:
        return self.signatures.mean(axis=0)

    @cached_property
    def _design(self):
        feats = self.signatures[:, 1:]
        mu = feats.mean(axis=0)
        sd = feats.std(axis=0)
        keep = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
        z = (feats[:, keep] - mu[keep]) / sd[keep]
        u, s, vt = np.linalg.svd(z, full_matrices=False)
        return mu, sd, keep, u, s, vt

    def standardized(self) -> np.ndarray:
        mu, sd, keep, u, s, vt = self._design
        return (self.signatures[:, 1:][:, keep] - mu[keep]) / sd[keep]

    def cashflows(self, payoffs: Sequence[Payoff]) -> np.ndarray:
        return payoff_matrix(payoffs, self.values)

    def ridge_penalty(self, ridge: float) -> float:
        """Absolute penalty ``ridge * trace(Z^T Z) / p`` on standardised coefficients."""
        mu, sd, keep, u, s, vt = self._design
        return ridge * float(np.sum(s**2)) / max(int(keep.sum()), 1)

    def solve(self, y: np.ndarray, ridge: float = DEFAULT_RIDGE, rcond: float = 1e-12):
        """Ridge regression of targets ``y`` (n, k) on the design; returns (raw functionals (k, dim), rank)."""
        mu, sd, keep, u, s, vt = self._design
        y = np.asarray(y, dtype=float).reshape(self.size, -1)
        ybar = y.mean(axis=0)
        rank = int(np.sum(s > rcond * s[0])) if s.size else 0
        if ridge > 0:
            lam = self.ridge_penalty(ridge)
            gain = s / (s**2 + lam)
        else:
            if rank < s.size:
                warnings.warn(
                    f"design matrix has rank {rank} < {s.size} columns; using the minimum-norm solution",
                    RankDeficiencyWarning,
                    stacklevel=3,
                )
            gain = np.where(s > rcond * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
        beta = vt.T @ (gain[:, None] * (u.T @ (y - ybar)))
        coeffs = np.zeros((y.shape[1], self.signatures.shape[1]))
        coeffs[:, 1:][:, keep] = (beta / sd[keep][:, None]).T
        coeffs[:, 0] = ybar - (mu[keep] / sd[keep]) @ beta
        return coeffs, rank

    def objective(self, coeffs: np.ndarray, y: np.ndarray, ridge: float = DEFAULT_RIDGE) -> float:
        """The penalised least-squares objective minimised by :meth:`solve`."""
        mu, sd, keep, *_ = self._design
        coeffs = np.asarray(coeffs, dtype=float)
        resid = self.signatures @ coeffs - y
        beta = coeffs[1:][keep] * sd[keep]
        return float(resid @ resid + self.ridge_penalty(ridge) * beta @ beta)

    def fit(self, payoffs: Sequence[Payoff], ridge: float = DEFAULT_RIDGE) -> list[PayoffFunctional]:
        """Fit one functional per payoff with a single shared factorisation."""
        y = self.cashflows(payoffs)
        coeffs, rank = self.solve(y, ridge)
        fitted = self.signatures @ coeffs.T
        out = []
        for j, f in enumerate(payoffs):
            res = fitted[:, j] - y[:, j]
            ss_res = float(res @ res)
            ss_tot = float(np.sum((y[:, j] - y[:, j].mean()) ** 2))
            if ss_tot <= 1e-24 * max(1.0, float(np.sum(y[:, j] ** 2))):
                # constant cash flow; intercept reproduces it
                r2 = 1.0
            else:
                r2 = 1.0 - ss_res / ss_tot
            out.append(
                PayoffFunctional(
                    payoff=f,
                    functional=TruncatedTensor(3, self.order, coeffs[j]),
                    r2=r2,
                    residual=float(np.sqrt(ss_res / self.size)),
                    rank=rank,
                    ridge=ridge,
                )
            )
        return out


def _as_basis(basis_paths, order: int) -> SignatureBasis:
    if isinstance(basis_paths, SignatureBasis):
        if basis_paths.order != order:
            raise ValueError(f"basis was built at order {basis_paths.order}, requested {order}")
        return basis_paths
    return SignatureBasis.from_paths(list(basis_paths), order)


def fit_payoff_functional(
    f: Payoff,
    basis_paths: Sequence[PricePath] | SignatureBasis,
    order: int = DEFAULT_ORDER,
    ridge: float = DEFAULT_RIDGE,
) -> PayoffFunctional:
    """Regress the cash flows of ``f`` on basis-path signatures.

    ``basis_paths`` may be a prepared :class:`SignatureBasis` to avoid
    recomputing signatures and the factorisation across payoffs.
    """
    return _as_basis(basis_paths, order).fit([f], ridge)[0]


def fit_payoff_functionals(
    payoffs: Sequence[Payoff],
    basis_paths: Sequence[PricePath] | SignatureBasis,
    order: int = DEFAULT_ORDER,
    ridge: float = DEFAULT_RIDGE,
) -> list[PayoffFunctional]:
    return _as_basis(basis_paths, order).fit(payoffs, ridge)


@dataclass(frozen=True)
class Regularization:
    """How the implied signature is selected among all price-consistent tensors.

    method
        ``"basis-weights"``: ``E = sum_i w_i Sig(basis_i)`` with ``sum w = 1`` and
        minimum ``|w - 1/n|``; ``"euclidean"``: minimum Euclidean norm of the
        non-scalar coefficients of ``E``.
    ridge
        Tikhonov weight relative to the largest squared singular value of the
        stacked map; 0 gives the pseudo-inverse.
    rcond
        Relative singular-value cutoff of the pseudo-inverse.
    rank_tol
        Relative tolerance for the reported effective rank.
    """

    method: str = "basis-weights"
    ridge: float = 1e-7
    rcond: float = 1e-12
    rank_tol: float = 1e-4

    def __post_init__(self):
        if self.method not in ("basis-weights", "euclidean"):
            raise ValueError(f"unknown regularization method {self.method!r}")
        if self.ridge < 0 or self.rcond < 0:
            raise ValueError("ridge and rcond must be non-negative")

    def to_dict(self) -> dict:
        return {"method": self.method, "ridge": self.ridge, "rcond": self.rcond, "rank_tol": self.rank_tol}

    @classmethod
    def from_dict(cls, data: dict) -> Regularization:
        return cls(**data)


@dataclass(frozen=True, eq=False)
class ImpliedExpectedSignature:
    tensor: TruncatedTensor
    residuals: np.ndarray  # fitted minus observed, per payoff
    rank: int  # effective rank of the stacked map at regularization.rank_tol
    numerical_rank: int
    regularization: Regularization = field(default_factory=Regularization)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    def price(self, functional: LinearFunctional | PayoffFunctional) -> float:
        if isinstance(functional, PayoffFunctional):
            functional = functional.functional
        return pair(functional, self.tensor)

    def to_dict(self) -> dict:
        return {
            **self.tensor.to_dict(),
            "residuals": self.residuals.tolist(),
            "rank": self.rank,
            "numerical_rank": self.numerical_rank,
            "regularization": self.regularization.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ImpliedExpectedSignature:
        return cls(
            tensor=TruncatedTensor.from_dict(data),
            residuals=np.asarray(data["residuals"], dtype=float),
            rank=int(data["rank"]),
            numerical_rank=int(data.get("numerical_rank", data["rank"])),
            regularization=Regularization.from_dict(data["regularization"]),
        )

    def save(self, dest: str | Path) -> None:
        Path(dest).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, src: str | Path) -> ImpliedExpectedSignature:
        return cls.from_dict(json.loads(Path(src).read_text()))


def _regularized_lstsq(a: np.ndarray, b: np.ndarray, reg: Regularization) -> np.ndarray:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(a.shape[1])
    live = s > reg.rcond * s[0]
    if reg.ridge > 0:
        gain = np.where(live, s / (s**2 + reg.ridge * s[0] ** 2), 0.0)
    else:
        gain = np.where(live, 1.0 / np.where(live, s, 1.0), 0.0)
    return vt.T @ (gain * (u.T @ b))


def _effective_rank(a: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0


def fit_implied_signature(
    functionals: Sequence[PayoffFunctional | LinearFunctional],
    prices: Sequence[float],
    order: int = DEFAULT_ORDER,
    regularization: Regularization | None = None,
    basis: SignatureBasis | None = None,
) -> ImpliedExpectedSignature:
    """Tensor ``E`` with ``<1*, E> = 1`` whose pairings best reproduce ``prices``.

    With ``method="basis-weights"`` (needs ``basis``) the search is restricted
    to the affine hull of the basis signatures, so ``E`` satisfies every
    linear identity the basis paths satisfy (for instance those implied by the
    deterministic time channel).
    """
    reg = regularization or Regularization()
    if len(functionals) == 0:
        raise ValueError("empty payoff family")
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (len(functionals),):
        raise ValueError(f"got {prices.size} prices for {len(functionals)} functionals")
    dim = dimension(3, order)
    rows = []
    for fn in functionals:
        t = fn.functional if isinstance(fn, PayoffFunctional) else fn
        if t.dim != 3 or t.order > order:
            raise ValueError(f"functional of dim {t.dim}, order {t.order} does not fit T^{order}(R^3)")
        rows.append(t.truncate(order).coeffs)
    lmat = np.vstack(rows)
    if not np.any(lmat):
        raise ValueError("all functionals are zero")

    if reg.method == "basis-weights":
        if basis is None:
            raise ValueError("basis-weights regularization needs the basis paths")
        if basis.order != order:
            raise ValueError("basis order does not match the requested order")
        sbar = basis.mean_signature
        centered = basis.signatures - sbar
        n = basis.size
        # E = sbar + centered^T dw / n; the scalar part stays exactly 1
        a = (lmat @ centered.T) / n
        dw = _regularized_lstsq(a, prices - lmat @ sbar, reg)
        coeffs = sbar + centered.T @ dw / n
        coeffs[0] = 1.0
        rank = _effective_rank(lmat @ centered.T / np.sqrt(n), reg.rank_tol)
    else:
        a = lmat[:, 1:]
        e = _regularized_lstsq(a, prices - lmat[:, 0], reg)
        coeffs = np.concatenate([[1.0], e])
        rank = _effective_rank(a, reg.rank_tol)

    numerical_rank = int(np.linalg.matrix_rank(lmat))
    tensor = TruncatedTensor(3, order, coeffs)
    return ImpliedExpectedSignature(
        tensor=tensor,
        residuals=lmat @ coeffs - prices,
        rank=rank,
        numerical_rank=numerical_rank,
        regularization=reg,
    )


def price_payoff(
    g: Payoff,
    e: ImpliedExpectedSignature,
    basis_paths: Sequence[PricePath] | SignatureBasis,
    ridge: float = DEFAULT_RIDGE,
) -> float:
    """Price ``g`` as ``<l_G, E>`` with ``l_G`` fitted on the basis paths."""
    fn = fit_payoff_functional(g, basis_paths, e.tensor.order, ridge)
    return e.price(fn)


def price_payoffs(
    payoffs: Sequence[Payoff],
    e: ImpliedExpectedSignature,
    basis_paths: Sequence[PricePath] | SignatureBasis,
    ridge: float = DEFAULT_RIDGE,
) -> np.ndarray:
    fns = fit_payoff_functionals(payoffs, basis_paths, e.tensor.order, ridge)
    return np.array([e.price(fn) for fn in fns])
