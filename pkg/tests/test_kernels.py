"""The compiled core and the NumPy fallback must agree."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from parmimo import _fallback, kernels

compiled = pytest.importorskip("parmimo._kernels")

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_backend_is_reported():
    assert kernels.BACKEND in ("compiled", "python")


@settings(max_examples=500, deadline=None)
@given(w=arrays(np.float64, st.integers(1, 200), elements=finite), r=st.floats(0, 1e4))
def test_threshold_agrees(w, r):
    assert compiled.linf_threshold(w, r) == pytest.approx(_fallback.linf_threshold(w, r), rel=1e-12, abs=1e-9)


def test_threshold_with_many_ties():
    w = np.array([2.0, -2.0, 2.0, 1.0, 2.0])
    for r in (0.0, 1e-300, 0.5, 4.0, 9.0, 10.0):
        assert compiled.linf_threshold(w, r) == pytest.approx(_fallback.linf_threshold(w, r), abs=1e-14)


def test_threshold_empty():
    assert compiled.linf_threshold(np.zeros(0), 1.0) == 0.0 == _fallback.linf_threshold(np.zeros(0), 1.0)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, 2**32 - 1), beta=st.floats(0, 1), r=st.floats(0, 50))
def test_truncation_step_agrees(n, seed, beta, r):
    rng = np.random.default_rng(seed)
    y, g, x = rng.standard_normal((3, n))
    outs = []
    for mod in (compiled, _fallback):
        xx, yy = x.copy(), np.empty(n)
        a = mod.truncation_step(y, g, 0.3, r, xx, beta, yy)
        outs.append((a, xx, yy))
    assert outs[0][0] == pytest.approx(outs[1][0], abs=1e-12)
    assert np.allclose(outs[0][1], outs[1][1], atol=1e-12)
    assert np.allclose(outs[0][2], outs[1][2], atol=1e-12)


def test_truncation_step_in_place_momentum_buffer():
    rng = np.random.default_rng(1)
    y, g, x = rng.standard_normal((3, 50))
    for mod in (compiled, _fallback):
        xa, ya = x.copy(), y.copy()
        a = mod.truncation_step(ya, g, 0.1, 2.0, xa, 0.4, ya)
        w = y - 0.1 * g
        xn = np.clip(w, -a, a)
        assert np.allclose(xa, xn) and np.allclose(ya, xn + 0.4 * (xn - x))


def test_truncation_step_flags_non_finite():
    y = np.array([1.0, np.inf])
    for mod in (compiled, _fallback):
        assert mod.truncation_step(y, np.zeros(2), 0.1, 1.0, np.zeros(2), 0.0, np.empty(2)) == -1.0


@pytest.mark.parametrize("accelerated", [True, False])
def test_dense_solver_agrees(accelerated):
    rng = np.random.default_rng(2)
    A = rng.standard_normal((6, 15))
    s = rng.standard_normal(6)
    L = 2.002 * np.linalg.norm(A, 2) ** 2
    x0 = rng.standard_normal(15) * 0.1
    a = compiled.fitra_dense(A, s, 0.3, L, 400, x0, accelerated)
    b = _fallback.fitra_dense(A, s, 0.3, L, 400, x0, accelerated)
    assert np.allclose(a, b, atol=1e-11)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), batch=st.integers(1, 5), n=st.integers(1, 80), scale=st.sampled_from([0.0, 0.5, 3.0]))
def test_viterbi_agrees(seed, batch, n, scale):
    rng = np.random.default_rng(seed)
    llr = np.round(rng.standard_normal((batch, 2 * n)) * scale, 1)  # rounding provokes ties
    assert np.array_equal(compiled.viterbi_decode(llr), _fallback.viterbi_decode(llr))
