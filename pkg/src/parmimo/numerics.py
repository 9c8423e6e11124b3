"""DFT helpers, row pseudo-inverse, power-method spectral norm, seeded RNG."""

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class PowerMethodError(RuntimeError):
    """Power iteration hit ``max_iter`` before meeting its tolerance."""

    def __init__(self, estimate, iterations):
        super().__init__(
            f"power method did not converge in {iterations} iterations "
            f"(last estimate {estimate:.12g})"
        )
        self.estimate = estimate
        self.iterations = iterations


def make_rng(seed):
    """PCG64 generator; equal seeds give bit-identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def complex_normal(rng, shape, var=1.0):
    """i.i.d. circularly symmetric CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def dft(a, axis=-1, unitary=False):
    """Forward DFT, [F]_{k,l} = exp(-2j*pi*k*l/W).

    The default is unnormalized (so ``dft(idft(a)) == a`` with the 1/W on
    the inverse); ``unitary=True`` scales both directions by 1/sqrt(W).
    """
    a = np.asarray(a)
    if a.ndim == 0 or a.shape[axis] < 1:
        raise ValueError("dft needs a non-empty axis")
    return np.fft.fft(a, axis=axis, norm="ortho" if unitary else "backward")


def idft(a, axis=-1, unitary=False):
    a = np.asarray(a)
    if a.ndim == 0 or a.shape[axis] < 1:
        raise ValueError("idft needs a non-empty axis")
    return np.fft.ifft(a, axis=axis, norm="ortho" if unitary else "backward")


def pinv_rows(H, rtol=1e-10):
    """Right pseudo-inverse H^H (H H^H)^{-1} of a wide matrix (or a stack).

    Raises SingularMatrixError when the smallest singular value falls below
    ``rtol`` times the largest. For a stack the error names the first bad
    index.
    """
    H = np.asarray(H)
    if H.shape[-2] > H.shape[-1]:
        raise ValueError(f"expected M <= N, got shape {H.shape[-2:]}")
    gram = H @ np.conj(np.swapaxes(H, -1, -2))
    eig = np.linalg.eigvalsh(gram)
    ok = eig[..., 0] > (rtol**2) * eig[..., -1]
    if not np.all(ok):
        bad = np.argwhere(~np.atleast_1d(ok))[0]
        where = f" at index {tuple(int(i) for i in bad)}" if H.ndim > 2 else ""
        raise SingularMatrixError(f"matrix is rank deficient{where}")
    eye = np.broadcast_to(np.eye(H.shape[-2]), gram.shape)
    return np.conj(np.swapaxes(H, -1, -2)) @ np.linalg.solve(gram, eye)


def sigma_max(apply, adjoint, dim, tol=1e-6, max_iter=1000, seed=0x5EED, dtype=float):
    """Largest singular value of a linear map by power iteration on A^H A.

    ``apply`` and ``adjoint`` act on flat vectors; the start vector is a
    pseudo-random unit vector drawn from ``seed`` so runs are reproducible.
    Iteration stops once the estimate changes by at most ``tol`` relative.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = make_rng(seed)
    if np.issubdtype(np.dtype(dtype), np.complexfloating):
        v = complex_normal(rng, dim)
    else:
        v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, max_iter + 1):
        u = adjoint(apply(v))
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            return 0.0
        new = np.sqrt(nrm)
        v = u / nrm
        if abs(new - est) <= tol * new:
            return float(new)
        est = new
    raise PowerMethodError(float(est), max_iter)
