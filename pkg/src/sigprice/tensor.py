"""Truncated tensor algebra T^N(R^d) with a dense graded layout.

Coefficients are stored in one flat vector ordered degree-major, then
lexicographically by letters (letters are 1-based, ``1..d``). The degree-k
block is exactly the C-order ravel of a ``(d,) * k`` array, so the flat index
of a word ``(i_1, ..., i_k)`` is ``offset(k) + sum_j (i_j - 1) d^(k - j)``.

The same representation is used for linear functionals on the algebra (the
dual basis ``e_I*``); :func:`pair` contracts the two.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

Word = tuple[int, ...]


def dimension(d: int, order: int) -> int:
    """Number of coefficients of T^N(R^d): ``sum_{k=0}^N d^k``."""
    if d < 1:
        raise ValueError(f"dimension d must be >= 1, got {d}")
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    return sum(d**k for k in range(order + 1))


def level_offsets(d: int, order: int) -> np.ndarray:
    """Start index of each degree block, with a final sentinel (length order + 2)."""
    return np.concatenate([[0], np.cumsum([d**k for k in range(order + 1)])]).astype(int)


def words(d: int, order: int) -> Iterator[Word]:
    """All words of length 0..order in storage order."""
    for k in range(order + 1):
        yield from itertools.product(range(1, d + 1), repeat=k)


def word_index(word: Sequence[int], d: int) -> int:
    """Flat index of ``word`` in the graded layout."""
    k = len(word)
    idx = (d**k - 1) // (d - 1) if d > 1 else k
    pos = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside 1..{d}")
        pos = pos * d + (letter - 1)
    return idx + pos


def index_word(index: int, d: int) -> Word:
    """Inverse of :func:`word_index`."""
    if index < 0:
        raise ValueError("negative index")
    k = 0
    while index >= d**k:
        index -= d**k
        k += 1
    letters = []
    for _ in range(k):
        index, r = divmod(index, d)
        letters.append(r + 1)
    return tuple(reversed(letters))


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """Element of T^N(R^d). Also used as a linear functional in the dual basis."""

    dim: int
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        expected = dimension(self.dim, self.order)
        if coeffs.shape != (expected,):
            raise ValueError(
                f"expected {expected} coefficients for d={self.dim}, N={self.order}, "
                f"got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zero(cls, dim: int, order: int) -> TruncatedTensor:
        return cls(dim, order, np.zeros(dimension(dim, order)))

    @classmethod
    def unit(cls, dim: int, order: int) -> TruncatedTensor:
        c = np.zeros(dimension(dim, order))
        c[0] = 1.0
        return cls(dim, order, c)

    @classmethod
    def from_words(cls, dim: int, order: int, terms: dict[Word, float]) -> TruncatedTensor:
        """Build from a ``{word: coefficient}`` mapping (missing words are zero)."""
        c = np.zeros(dimension(dim, order))
        for w, v in terms.items():
            if len(w) > order:
                raise ValueError(f"word {w} longer than order {order}")
            c[word_index(w, dim)] += v
        return cls(dim, order, c)

    def level(self, k: int) -> np.ndarray:
        """Degree-k block as a ``(d,) * k`` array (read-only view)."""
        if not 0 <= k <= self.order:
            raise ValueError(f"degree {k} outside 0..{self.order}")
        off = level_offsets(self.dim, self.order)
        return self.coeffs[off[k] : off[k + 1]].reshape((self.dim,) * k)

    def __getitem__(self, word: Sequence[int]) -> float:
        return float(self.coeffs[word_index(tuple(word), self.dim)])

    def truncate(self, order: int) -> TruncatedTensor:
        """Project onto T^order; raising the order pads with zeros."""
        n = dimension(self.dim, order)
        c = np.zeros(n)
        m = min(n, self.coeffs.size)
        c[:m] = self.coeffs[:m]
        return TruncatedTensor(self.dim, order, c)

    def _check_compatible(self, other: TruncatedTensor) -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: TruncatedTensor) -> TruncatedTensor:
        self._check_compatible(other)
        order = max(self.order, other.order)
        return TruncatedTensor(
            self.dim, order, self.truncate(order).coeffs + other.truncate(order).coeffs
        )

    def __sub__(self, other: TruncatedTensor) -> TruncatedTensor:
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> TruncatedTensor:
        return TruncatedTensor(self.dim, self.order, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> TruncatedTensor:
        return -1.0 * self

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncatedTensor):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.order == other.order
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __repr__(self) -> str:
        return f"TruncatedTensor(dim={self.dim}, order={self.order}, coeffs={self.coeffs!r})"

    def to_dict(self) -> dict:
        return {"dim": self.dim, "order": self.order, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> TruncatedTensor:
        return cls(int(data["dim"]), int(data["order"]), np.asarray(data["coeffs"], dtype=float))


# Functionals share the representation; the alias documents intent at call sites.
LinearFunctional = TruncatedTensor


def letter(i: int, dim: int, order: int = 1) -> TruncatedTensor:
    """Basis element ``e_i`` (or its dual ``e_i*``)."""
    return TruncatedTensor.from_words(dim, order, {(i,): 1.0})


def tensor_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product; degrees above the common order are dropped."""
    if a.dim != b.dim or a.order != b.order:
        raise ValueError(
            f"tensor_mul needs matching dim/order, got ({a.dim}, {a.order}) and ({b.dim}, {b.order})"
        )
    d, n = a.dim, a.order
    off = level_offsets(d, n)
    out = np.zeros_like(a.coeffs)
    for k in range(n + 1):
        block = np.zeros(d**k)
        for i in range(k + 1):
            block += np.multiply.outer(
                a.coeffs[off[i] : off[i + 1]], b.coeffs[off[k - i] : off[k - i + 1]]
            ).ravel()
        out[off[k] : off[k + 1]] = block
    return TruncatedTensor(d, n, out)


def tensor_exp(v: np.ndarray, order: int) -> TruncatedTensor:
    """``sum_k v^{(x)k} / k!`` truncated at ``order``; the signature of a straight segment."""
    v = np.asarray(v, dtype=float)
    d = v.size
    blocks = [np.ones(1)]
    cur = np.ones(1)
    for k in range(1, order + 1):
        cur = np.multiply.outer(cur, v).ravel() / k
        blocks.append(cur)
    return TruncatedTensor(d, order, np.concatenate(blocks))


def tensor_inverse(a: TruncatedTensor) -> TruncatedTensor:
    """Inverse in T^N for a tensor with nonzero scalar part."""
    a0 = a.coeffs[0]
    if a0 == 0:
        raise ValueError("tensor with zero scalar part is not invertible")
    # a = a0 (1 + x) with x nilpotent in T^N: a^-1 = a0^-1 sum_k (-x)^k
    x = TruncatedTensor(a.dim, a.order, a.coeffs / a0 - TruncatedTensor.unit(a.dim, a.order).coeffs)
    term = TruncatedTensor.unit(a.dim, a.order)
    total = term
    for _ in range(a.order):
        term = tensor_mul(term, -1.0 * x)
        total = total + term
    return (1.0 / a0) * total


@lru_cache(maxsize=None)
def _shuffle_perms(i: int, j: int) -> tuple[tuple[int, ...], ...]:
    """Axis permutations realising every (i, j)-interleaving of an outer product."""
    perms = []
    for pos in itertools.combinations(range(i + j), i):
        chosen = set(pos)
        perm, ra, rb = [], 0, i
        for p in range(i + j):
            if p in chosen:
                perm.append(ra)
                ra += 1
            else:
                perm.append(rb)
                rb += 1
        perms.append(tuple(perm))
    return tuple(perms)


def _shuffle_levels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    i, j = a.ndim, b.ndim
    outer = np.multiply.outer(a, b)
    if i == 0 or j == 0:
        return outer
    out = np.zeros_like(outer)
    for perm in _shuffle_perms(i, j):
        out += outer.transpose(perm)
    return out


def shuffle(p: LinearFunctional, q: LinearFunctional) -> LinearFunctional:
    """Shuffle product; the result has order ``p.order + q.order``.

    Each pair of homogeneous parts is expanded as the sum over all
    interleavings of the letters, which is the closed form of the
    last-letter recursion ``ua ⧢ vb = (u ⧢ vb)a + (ua ⧢ v)b``.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    d = p.dim
    order = p.order + q.order
    off = level_offsets(d, order)
    out = np.zeros(dimension(d, order))
    for i in range(p.order + 1):
        a = p.level(i)
        if not a.any():
            continue
        for j in range(q.order + 1):
            b = q.level(j)
            if not b.any():
                continue
            out[off[i + j] : off[i + j + 1]] += _shuffle_levels(a, b).ravel()
    return TruncatedTensor(d, order, out)


def pair(l: LinearFunctional, a: TruncatedTensor) -> float:
    """Dual pairing ``<l, a>``; words present in only one operand contribute zero."""
    if l.dim != a.dim:
        raise ValueError(f"dimension mismatch: {l.dim} vs {a.dim}")
    m = min(l.coeffs.size, a.coeffs.size)
    return float(l.coeffs[:m] @ a.coeffs[:m])
