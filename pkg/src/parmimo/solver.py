"""First-order solvers for l-infinity-regularized least squares.

The problem is

    minimize  lam * ||x||_inf + ||s - A x||_2^2

over real x, with A given as any object exposing ``apply``/``adjoint`` and
``shape``. Each iteration takes a gradient step and then clips every entry
to [-alpha, alpha], where alpha solves a one-dimensional problem.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from parmimo import _fallback, kernels
from parmimo.numerics import sigma_max

LIPSCHITZ_MARGIN = 1.001


class SolverDivergenceError(FloatingPointError):
    def __init__(self, iteration):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration


# --------------------------------------------------------------------------
# proximal map


def prox_alpha(w, lam, L, method="exact", tol=None):
    """Truncation level for the prox of (lam/L)*||.||_inf at ``w``.

    Minimizes lam*a + (L/2) * sum((|w_i| - a)_+^2) over a >= 0. ``method``
    is "exact" (compiled pivot scan or sort, whichever backend is active),
    "sort" (the closed form), or "bisection".
    """
    if lam < 0 or L <= 0:
        raise ValueError("need lam >= 0 and L > 0")
    w = np.ascontiguousarray(w, dtype=np.float64).ravel()
    if method == "exact":
        return kernels.linf_threshold(w, lam / L)
    if method == "sort":
        return _fallback.linf_threshold(w, lam / L)
    if method == "bisection":
        return _alpha_bisection(w, lam, L, tol)
    raise ValueError(f"unknown method {method!r}")


def _alpha_bisection(w, lam, L, tol=None):
    # stationarity lam - L*sum((|w|-a)_+) is non-decreasing in a
    u = np.abs(w)
    hi = float(u.max(initial=0.0))
    if tol is None:
        tol = 1e-12 * max(1.0, hi)
    r = lam / L
    if r <= 0.0:
        return hi
    if u.sum() <= r:
        return 0.0
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.maximum(u - mid, 0.0).sum() > r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def truncate(w, alpha):
    return np.clip(w, -alpha, alpha)


def prox_truncate(w, lam, L):
    """argmin_x lam*||x||_inf + (L/2)*||x - w||^2."""
    return truncate(w, prox_alpha(w, lam, L))


def prox_objective(x, w, lam, L):
    x = np.asarray(x)
    return lam * np.abs(x).max(initial=0.0) + 0.5 * L * np.sum((x - np.asarray(w)) ** 2)


# --------------------------------------------------------------------------
# problems and results


@dataclass(eq=False)
class DenseOperator:
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return self.matrix @ x

    def adjoint(self, y):
        return self.matrix.T @ y


@dataclass(eq=False)
class LinfLsProblem:
    """lam*||x||_inf + ||s - A x||^2; ``L`` defaults to 2*(margin*sigma_max(A))^2."""

    operator: object
    target: np.ndarray
    lam: float
    L: float = None
    sigma_tol: float = 1e-6

    def __post_init__(self):
        if isinstance(self.operator, np.ndarray):
            self.operator = DenseOperator(self.operator)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.L is None:
            sig = sigma_max(
                self.operator.apply,
                self.operator.adjoint,
                self.operator.shape[1],
                tol=self.sigma_tol,
                max_iter=20000,
            )
            self.L = 2.0 * (LIPSCHITZ_MARGIN * sig) ** 2
        if not self.L > 0:
            raise ValueError("Lipschitz constant must be positive")

    def objective(self, x):
        r = self.target - self.operator.apply(x)
        return self.lam * np.abs(x).max(initial=0.0) + float(r @ r)


@dataclass
class SolverResult:
    x: np.ndarray
    iterations: int
    objective: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    seconds: float = 0.0

    def write_trace(self, path):
        """CSV rows (k, F(x_k), alpha_k); needs a run with ``record=True``."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["k", "objective", "alpha"])
            for k, (f, a) in enumerate(zip(self.objective, self.alpha), start=1):
                out.writerow([k, repr(float(f)), repr(float(a))])


# --------------------------------------------------------------------------
# iterations


def _gradient(A, s):
    # operators may fuse A^T (A y - s) into one call
    fused = getattr(A, "residual_adjoint", None)
    if fused is not None:
        return lambda y: fused(y, s)
    return lambda y: A.adjoint(A.apply(y) - s)


def _run(problem, K, x0, accelerated, record, rel_tol):
    if K < 1:
        raise ValueError("K must be >= 1")
    A, s, lam, L = problem.operator, problem.target, problem.lam, problem.L
    n = A.shape[1]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64).ravel()
    if x.size != n or not np.all(np.isfinite(x)):
        raise ValueError("x0 must be a finite vector matching the operator")
    grad = _gradient(A, s)
    y = x.copy()
    t = 1.0
    step = 2.0 / L
    r = lam / L
    res = SolverResult(x=x, iterations=0)
    prev_obj = None
    start = time.perf_counter()
    for k in range(1, K + 1):
        if accelerated:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            t = t_next
        else:
            beta = 0.0
        # x <- trunc_alpha(y - step*grad), y <- x + beta*(x - x_prev), in place
        alpha = kernels.truncation_step(y, grad(y), step, r, x, beta, y)
        if alpha < 0:
            raise SolverDivergenceError(k)
        res.iterations = k
        if record or rel_tol > 0:
            obj = problem.objective(x)
            if record:
                res.objective.append(obj)
                res.alpha.append(alpha)
            if rel_tol > 0 and prev_obj is not None and abs(prev_obj - obj) <= rel_tol * abs(prev_obj):
                break
            prev_obj = obj
    res.x = x.copy()
    res.seconds = time.perf_counter() - start
    return res


def fitra(problem, K, x0=None, record=False, rel_tol=0.0):
    """Fast iterative truncation: accelerated prox-gradient with momentum.

    Runs exactly K iterations unless ``rel_tol`` > 0 enables stopping on a
    small relative change of the objective. ``record`` keeps F(x_k) and the
    truncation level per iteration.
    """
    return _run(problem, K, x0, True, record, rel_tol)


def ista(problem, K, x0=None, record=False, rel_tol=0.0):
    """Plain truncation iteration (no momentum); a descent method."""
    return _run(problem, K, x0, False, record, rel_tol)


def fitra_dense(A, s, lam, L, K, x0=None, accelerated=True):
    """Same iteration as :func:`fitra` on a dense real matrix, run in the kernel core.

    Intended for long reference runs; returns only the final iterate.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    s = np.ascontiguousarray(s, dtype=np.float64)
    x0 = np.zeros(A.shape[1]) if x0 is None else np.ascontiguousarray(x0, dtype=np.float64)
    try:
        return kernels.fitra_dense(A, s, float(lam), float(L), int(K), x0, accelerated)
    except FloatingPointError as exc:
        it = int(str(exc).rsplit(" ", 1)[-1])
        raise SolverDivergenceError(it) from None
