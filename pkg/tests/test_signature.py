import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigprice.leadlag import PricePath, lead_lag, uniform_timeline
from sigprice.signature import (
    increment_functional,
    lead_lag_signatures,
    path_signatures,
    qv_functional,
    sig_increments,
    sig_path,
    sig_segment,
)
from sigprice.tensor import TruncatedTensor, pair, tensor_exp, tensor_mul

from conftest import quadrature_signature, random_polyline


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_segment_is_exponential():
    v = np.array([0.1, -0.4, 0.25])
    assert sig_segment(v, 4) == tensor_exp(v, 4)
    with pytest.raises(ValueError):
        sig_segment(v, -1)


def test_hand_computed_two_segment_path():
    # e1 then e2: S = exp(e1) (x) exp(e2); the 12 coordinate is 1 and 21 is 0
    s = sig_path(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), 2)
    assert s[(1,)] == 1.0 and s[(2,)] == 1.0
    assert s[(1, 2)] == 1.0 and s[(2, 1)] == 0.0
    assert s[(1, 1)] == 0.5 and s[(2, 2)] == 0.5


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_nested_quadrature(seed):
    rng = np.random.default_rng(seed)
    verts = random_polyline(rng, 3)
    got = sig_path(verts, 4).coeffs
    want = quadrature_signature(verts, 4).coeffs
    assert rel_err(got, want) < 1e-10


def test_chen_identity(rng):
    verts = random_polyline(rng, 9)
    whole = sig_path(verts, 5)
    left, right = sig_path(verts[:5], 5), sig_path(verts[4:], 5)
    np.testing.assert_allclose(tensor_mul(left, right).coeffs, whole.coeffs, rtol=1e-12, atol=1e-13)


def test_reversal_gives_inverse(rng):
    verts = random_polyline(rng, 6)
    prod = tensor_mul(sig_path(verts, 5), sig_path(verts[::-1], 5))
    np.testing.assert_allclose(prod.coeffs, TruncatedTensor.unit(3, 5).coeffs, atol=1e-10)


def test_translation_invariance(rng):
    verts = random_polyline(rng, 4)
    np.testing.assert_allclose(sig_path(verts + 5.0, 4).coeffs, sig_path(verts, 4).coeffs, rtol=1e-12)


def test_reparametrisation_invariance(rng):
    # splitting a segment in two does not change the signature
    verts = random_polyline(rng, 3)
    refined = np.insert(verts, 2, 0.3 * verts[1] + 0.7 * verts[2], axis=0)
    np.testing.assert_allclose(sig_path(refined, 5).coeffs, sig_path(verts, 5).coeffs, atol=1e-13)


def test_batch_matches_single(rng):
    inc = rng.standard_normal((4, 7, 3)) * 0.3
    batch = sig_increments(inc, 4)
    for i in range(4):
        np.testing.assert_allclose(batch[i], sig_increments(inc[i], 4), rtol=1e-14)


def test_rejects_degenerate_path():
    with pytest.raises(ValueError):
        sig_path(np.zeros((1, 3)), 3)


def _random_prices(rng, n, count):
    steps = rng.standard_normal((count, n)) * 0.2 / np.sqrt(n)
    values = np.exp(np.concatenate([np.zeros((count, 1)), np.cumsum(steps, axis=1)], axis=1))
    return values


def test_lead_lag_identities(rng):
    times = uniform_timeline(50)
    values = _random_prices(rng, 50, 20)
    sigs = lead_lag_signatures(times, values, 3, chunk=7)
    inc = increment_functional(3).coeffs
    qv = qv_functional(3).coeffs
    np.testing.assert_allclose(sigs @ inc, values[:, -1] - values[:, 0], rtol=1e-12)
    np.testing.assert_allclose(sigs @ qv, np.square(np.diff(values, axis=1)).sum(axis=1), rtol=1e-10)
    # time channel runs from 0 to 1
    np.testing.assert_allclose(sigs[:, 1], 1.0)


def test_lead_lag_signatures_agree_with_sig_path(rng):
    times = uniform_timeline(10)
    values = _random_prices(rng, 10, 3)
    sigs = lead_lag_signatures(times, values, 4)
    paths = [PricePath(times, v) for v in values]
    for p, s in zip(paths, sigs):
        np.testing.assert_allclose(sig_path(lead_lag(p), 4).coeffs, s, rtol=1e-13)
    np.testing.assert_allclose(path_signatures(paths, 4), sigs)


def test_functional_orders():
    assert pair(increment_functional(), sig_path(np.array([[0, 1, 1], [1, 2, 3.0]]), 1)) == 1.0
    with pytest.raises(ValueError):
        qv_functional(1)
