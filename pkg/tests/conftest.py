"""Shared oracles and fixtures.

The oracles here deliberately avoid the package's own algebra: shuffles are
enumerated word by word and signatures are computed by nested Gauss-Legendre
quadrature of the defining iterated integrals.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import pytest

from sigprice.tensor import TruncatedTensor, dimension, index_word

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_functional(rng: np.random.Generator, dim: int, order: int, density: float = 1.0):
    c = rng.standard_normal(dimension(dim, order))
    if density < 1.0:
        c *= rng.random(c.size) < density
    return TruncatedTensor(dim, order, c)


def random_polyline(rng: np.random.Generator, segments: int, dim: int = 3, scale: float = 1.0):
    steps = rng.standard_normal((segments, dim)) * scale
    return np.vstack([np.zeros(dim), np.cumsum(steps, axis=0)])


# --- shuffle by explicit enumeration of interleavings ------------------------

def word_shuffle(u: tuple, v: tuple) -> dict[tuple, int]:
    """Multiset of all interleavings of ``u`` and ``v``, counted with multiplicity."""
    out: dict[tuple, int] = {}
    n = len(u) + len(v)
    for pos in itertools.combinations(range(n), len(u)):
        w, iu, iv = [], 0, 0
        chosen = set(pos)
        for p in range(n):
            if p in chosen:
                w.append(u[iu])
                iu += 1
            else:
                w.append(v[iv])
                iv += 1
        out[tuple(w)] = out.get(tuple(w), 0) + 1
    return out


def brute_shuffle(p: TruncatedTensor, q: TruncatedTensor) -> dict[tuple, float]:
    terms: dict[tuple, float] = {}
    for i, a in enumerate(p.coeffs):
        if a == 0:
            continue
        u = index_word(i, p.dim)
        for j, b in enumerate(q.coeffs):
            if b == 0:
                continue
            v = index_word(j, q.dim)
            for w, mult in word_shuffle(u, v).items():
                terms[w] = terms.get(w, 0.0) + a * b * mult
    return terms


# --- signature by nested quadrature ------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def quadrature_signature(vertices: np.ndarray, order: int) -> TruncatedTensor:
    """Iterated integrals ``int_{0<t1<...<tk<1} dX^{i1}...dX^{ik}`` by nested quadrature.

    On each linear segment ``dX = v ds``; the running signature inside a
    segment is evaluated at Gauss-Legendre nodes by recursing on the word, so
    no tensor exponential or product is used. Six nodes integrate the
    polynomial integrands exactly up to degree 11.
    """
    vertices = np.asarray(vertices, dtype=float)
    d = vertices.shape[1]
    incs = np.diff(vertices, axis=0)

    def all_words():
        for k in range(1, order + 1):
            yield from itertools.product(range(1, d + 1), repeat=k)

    start: dict[tuple, float] = {(): 1.0, **{w: 0.0 for w in all_words()}}

    for v in incs:

        @lru_cache(maxsize=None)
        def value(word: tuple, s: float) -> float:
            # S^word at local parameter s of the current segment
            if not word:
                return 1.0
            head, last = word[:-1], word[-1]
            if s == 0.0:
                return start[word]
            nodes = 0.5 * s * (_GL_NODES + 1.0)
            integral = 0.5 * s * sum(w * value(head, float(x)) for w, x in zip(_GL_WEIGHTS, nodes))
            return start[word] + v[last - 1] * integral

        new = {(): 1.0}
        for w in all_words():
            new[w] = value(w, 1.0)
        start = new

    return TruncatedTensor.from_words(d, order, {w: c for w, c in start.items()})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
