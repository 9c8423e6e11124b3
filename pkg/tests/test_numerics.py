import numpy as np
import pytest

from parmimo.numerics import (
    PowerMethodError,
    SingularMatrixError,
    complex_normal,
    dft,
    idft,
    make_rng,
    pinv_rows,
    sigma_max,
)

from conftest import crandn


def brute_dft(a):
    W = a.size
    k = np.arange(W)
    return np.exp(-2j * np.pi * np.outer(k, k) / W) @ a


def test_dft_of_impulse_is_all_ones():
    assert np.allclose(dft(np.eye(4)[0]), np.ones(4), atol=0, rtol=0)


def test_dft_matches_direct_sum(rng):
    a = crandn(rng, 8)
    assert np.allclose(dft(a), brute_dft(a), atol=1e-12)


@pytest.mark.parametrize("unitary", [False, True])
def test_idft_inverts_dft(rng, unitary):
    a = crandn(rng, 128)
    back = idft(dft(a, unitary=unitary), unitary=unitary)
    assert np.linalg.norm(back - a) <= 1e-12 * np.linalg.norm(a)


def test_parseval_scaling(rng):
    a = crandn(rng, 64)
    # unnormalized: ||F a||^2 = W ||a||^2; unitary: equal energies
    assert np.isclose(np.sum(np.abs(dft(a)) ** 2), 64 * np.sum(np.abs(a) ** 2), rtol=1e-12)
    assert np.isclose(np.sum(np.abs(dft(a, unitary=True)) ** 2), np.sum(np.abs(a) ** 2), rtol=1e-12)


def test_dft_rejects_empty():
    with pytest.raises(ValueError):
        dft(np.zeros(0))


def test_pinv_of_identity_block():
    H = np.hstack([np.eye(3), np.zeros((3, 5))])
    assert np.allclose(pinv_rows(H), H.T, atol=1e-15)


def test_pinv_of_orthonormal_rows_is_hermitian_transpose(rng):
    Q, _ = np.linalg.qr(crandn(rng, 8, 3))
    H = Q.conj().T
    assert np.allclose(pinv_rows(H), H.conj().T, atol=1e-12)


def test_pinv_defining_identity(rng):
    H = crandn(rng, 3, 8)
    assert np.max(np.abs(H @ pinv_rows(H) - np.eye(3))) <= 1e-9
    assert np.allclose(pinv_rows(H), np.linalg.pinv(H), atol=1e-12)


def test_pinv_batched(rng):
    H = crandn(rng, 5, 2, 6)
    P = pinv_rows(H)
    assert np.allclose(H @ P, np.eye(2), atol=1e-12)


def test_pinv_rank_deficient_raises(rng):
    h = crandn(rng, 1, 6)
    with pytest.raises(SingularMatrixError):
        pinv_rows(np.vstack([h, 2 * h]))
    stack = np.stack([crandn(rng, 2, 6), np.vstack([h, h])])
    with pytest.raises(SingularMatrixError, match=r"index \(1,\)"):
        pinv_rows(stack)


def test_pinv_rejects_tall_matrix(rng):
    with pytest.raises(ValueError):
        pinv_rows(crandn(rng, 4, 2))


def test_sigma_max_identity():
    assert sigma_max(lambda x: x, lambda x: x, 7) == pytest.approx(1.0, abs=1e-12)


def test_sigma_max_diagonal():
    d = np.array([3.0, 1.0])
    assert sigma_max(lambda x: d * x, lambda x: d * x, 2, tol=1e-10) == pytest.approx(3.0, rel=1e-9)


def test_sigma_max_against_svd(rng):
    A = rng.standard_normal((4, 6))
    est = sigma_max(lambda x: A @ x, lambda y: A.T @ y, 6, tol=1e-12, max_iter=100000)
    assert abs(est - np.linalg.svd(A, compute_uv=False)[0]) <= 1e-6 * est


def test_sigma_max_complex_operator(rng):
    A = crandn(rng, 3, 5)
    est = sigma_max(lambda x: A @ x, lambda y: A.conj().T @ y, 5, tol=1e-12, max_iter=100000, dtype=complex)
    assert est == pytest.approx(np.linalg.norm(A, 2), rel=1e-6)


def test_sigma_max_reports_non_convergence():
    # close top singular values and a tiny budget
    d = np.array([1.0, 0.999, 0.5])
    with pytest.raises(PowerMethodError) as info:
        sigma_max(lambda x: d * x, lambda x: d * x, 3, tol=1e-15, max_iter=2)
    assert info.value.iterations == 2
    assert 0.5 < info.value.estimate <= 1.0


def test_sigma_max_is_deterministic(rng):
    A = rng.standard_normal((5, 5))
    runs = [sigma_max(lambda x: A @ x, lambda y: A.T @ y, 5) for _ in range(2)]
    assert runs[0] == runs[1]


def test_rng_reproducible():
    a = make_rng(123).standard_normal(10**6)
    b = make_rng(123).standard_normal(10**6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:10], make_rng(124).standard_normal(10))


def test_complex_normal_moments():
    z = complex_normal(make_rng(5), 200000, var=2.0)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.0, rel=0.02)
    assert np.var(z.real) == pytest.approx(1.0, rel=0.02)
    assert abs(np.mean(z * z)) < 0.03  # circular symmetry
