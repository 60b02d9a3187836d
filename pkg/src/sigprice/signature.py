"""Exact truncated signatures of piecewise-linear paths.

A straight segment with increment ``v`` has signature ``exp(v)``; a polyline
is the ordered tensor product of its segment exponentials (Chen). The batched
kernel multiplies a stack of running signatures by one segment exponential at a
time, using a Horner scheme so no exponential is ever materialised.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .leadlag import LAG, LEAD, LeadLagPath, PricePath, lead_lag_vertices, stack_values
from .tensor import LinearFunctional, TruncatedTensor, dimension, level_offsets, tensor_exp

DEFAULT_ORDER = 5


def sig_segment(increment, order: int = DEFAULT_ORDER) -> TruncatedTensor:
    """Signature of the straight segment with the given increment."""
    if order < 0:
        raise ValueError("order must be non-negative")
    return tensor_exp(increment, order)


def _mul_exp_inplace(sig: np.ndarray, v: np.ndarray, order: int, off: np.ndarray) -> None:
    # sig <- sig (x) exp(v), rows independent. Levels are rewritten top-down so
    # every level still reads the old lower levels.
    b, d = v.shape
    for k in range(order, 0, -1):
        acc = v / k
        if k > 1:
            # (sig_0 v / k + sig_1) v / (k-1) + ... ; sig_0 == 1 is not assumed
            acc = acc * sig[:, 0:1]
            for m in range(1, k):
                acc = acc + sig[:, off[m] : off[m + 1]]
                acc = (acc[:, :, None] * v[:, None, :]).reshape(b, -1) / (k - m)
        else:
            acc = acc * sig[:, 0:1]
        sig[:, off[k] : off[k + 1]] += acc


def sig_increments(increments: np.ndarray, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Signatures of polylines given by their segment increments.

    Parameters
    ----------
    increments : ndarray, shape (batch, segments, d) or (segments, d)
    order : int

    Returns
    -------
    ndarray, shape (batch, dimension(d, order)) or (dimension(d, order),)
    """
    inc = np.asarray(increments, dtype=float)
    single = inc.ndim == 2
    if single:
        inc = inc[None]
    b, m, d = inc.shape
    off = level_offsets(d, order)
    sig = np.zeros((b, dimension(d, order)))
    sig[:, 0] = 1.0
    for s in range(m):
        _mul_exp_inplace(sig, inc[:, s, :], order, off)
    return sig[0] if single else sig


def sig_path(path: LeadLagPath | np.ndarray, order: int = DEFAULT_ORDER) -> TruncatedTensor:
    """Signature of a piecewise-linear path (a :class:`LeadLagPath` or an ``(m, d)`` vertex array)."""
    vertices = path.vertices if isinstance(path, LeadLagPath) else np.asarray(path, dtype=float)
    if vertices.ndim != 2 or vertices.shape[0] < 2:
        raise ValueError("path needs at least one segment")
    coeffs = sig_increments(np.diff(vertices, axis=0), order)
    return TruncatedTensor(vertices.shape[1], order, coeffs)


def lead_lag_signatures(
    times: np.ndarray, values: np.ndarray, order: int = DEFAULT_ORDER, chunk: int = 2048
) -> np.ndarray:
    """Order-``order`` signatures of the lead-lag transforms of a batch of price paths.

    ``values`` has shape ``(batch, n + 1)``; returns ``(batch, dimension(3, order))``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    out = np.empty((values.shape[0], dimension(3, order)))
    for start in range(0, values.shape[0], chunk):
        verts = lead_lag_vertices(times, values[start : start + chunk])
        out[start : start + chunk] = sig_increments(np.diff(verts, axis=1), order)
    return out


def path_signatures(paths: Sequence[PricePath], order: int = DEFAULT_ORDER) -> np.ndarray:
    """Lead-lag signatures for a list of paths on a shared timeline."""
    times, values = stack_values(paths)
    return lead_lag_signatures(times, values, order)


def increment_functional(order: int = 1) -> LinearFunctional:
    """``e_2*``: pairs with a lead-lag signature to give ``X_1 - X_0``."""
    return TruncatedTensor.from_words(3, order, {(LAG,): 1.0})


def qv_functional(order: int = 2) -> LinearFunctional:
    """``e_3* (x) e_2* - e_2* (x) e_3*``: pairs to the discrete quadratic variation."""
    if order < 2:
        raise ValueError("the quadratic-variation functional needs order >= 2")
    return TruncatedTensor.from_words(3, order, {(LEAD, LAG): 1.0, (LAG, LEAD): -1.0})
