"""Transmit-signal generators: LS (zero-forcing), MF, LS followed by clipping, and PMP."""

from dataclasses import dataclass, field

import numpy as np

from parmimo.numerics import SingularMatrixError, pinv_rows, sigma_max
from parmimo.solver import LIPSCHITZ_MARGIN, LinfLsProblem, fitra
from parmimo.system import (
    DimensionError,
    PmpOperator,
    RealOperator,
    build_pmp_problem,
    freq_to_time,
    normalize_frame,
    time_to_freq,
    to_real,
)

KINDS = ("LS", "MF", "LS_CLIP", "PMP")


@dataclass(frozen=True)
class PrecoderConfig:
    kind: str
    lam: float = 0.25
    K: int = 2000
    target_par_db: float = None
    target_precoder: str = None
    label: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "PMP":
            if self.lam < 0:
                raise ValueError("lam must be >= 0")
            if int(self.K) < 1:
                raise ValueError("K must be >= 1")
            if self.target_precoder not in (None, "pinv", "mf"):
                raise ValueError("target_precoder must be 'pinv' or 'mf'")
        if self.kind == "LS_CLIP" and self.target_par_db is None:
            raise ValueError("LS_CLIP needs target_par_db")

    @property
    def name(self):
        if self.label:
            return self.label
        if self.kind == "PMP":
            return f"PMP(lam={self.lam:g},K={self.K})"
        if self.kind == "LS_CLIP":
            return f"LS+clip({self.target_par_db:g}dB)"
        return self.kind


@dataclass(eq=False)
class TxFrame:
    """One precoded OFDM symbol before power normalization.

    ``time`` is (N, W), ``freq`` is (W, N); ``gains`` (|active|, M) is the
    per-user effective scalar gain a genie receiver divides out, before the
    1/sqrt(P) normalization.
    """

    time: np.ndarray
    freq: np.ndarray
    gains: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def power(self):
        return float(np.sum(np.abs(self.freq) ** 2))

    def normalized(self):
        Xn, P = normalize_frame(self.freq)
        return Xn, P


def _check(symbols, plan, chan):
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.shape != (plan.n_active, chan.M):
        raise DimensionError(f"symbols must have shape ({plan.n_active}, {chan.M})")
    if chan.W != plan.W:
        raise DimensionError("channel and tone plan disagree on W")
    return symbols


def _linear(symbols, plan, chan, G):
    X = np.zeros((plan.W, chan.N), dtype=np.complex128)
    X[plan.active_idx] = (G @ symbols[:, :, None])[:, :, 0]
    return X


def precode_ls(symbols, plan, chan):
    """x_w = H_w^+ s_w on active tones, zero elsewhere."""
    symbols = _check(symbols, plan, chan)
    H = chan.freq[plan.active_idx]
    try:
        G = pinv_rows(H)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"{exc} (tone bin {plan.active[_bad_tone(H)]})") from None
    X = _linear(symbols, plan, chan, G)
    return TxFrame(time=freq_to_time(X), freq=X, gains=np.ones(symbols.shape))


def _bad_tone(H):
    for i, h in enumerate(H):
        try:
            pinv_rows(h)
        except SingularMatrixError:
            return i
    return 0


def precode_mf(symbols, plan, chan):
    """x_w = H_w^H s_w on active tones, zero elsewhere."""
    symbols = _check(symbols, plan, chan)
    H = chan.freq[plan.active_idx]
    G = np.conj(np.swapaxes(H, 1, 2))
    X = _linear(symbols, plan, chan, G)
    gains = np.sum(np.abs(H) ** 2, axis=2)
    return TxFrame(time=freq_to_time(X), freq=X, gains=gains)


def clip_level(a, target_par):
    """Largest level c with PAR(clip_c(a)) <= target_par (linear).

    Real and imaginary parts are clipped to [-c, c] independently. Clipping
    at c gives PAR = n*c^2 / (sum_{u<c} u^2 + #{u>=c} * c^2) over the n = 2W
    part magnitudes u, which is non-decreasing in c, so the level is found
    on the sorted magnitudes in closed form.
    """
    a = np.asarray(a)
    u = np.sort(np.concatenate([np.abs(a.real), np.abs(a.imag)]))
    n = u.size
    if u[-1] == 0:
        return 0.0
    csum = np.concatenate([[0.0], np.cumsum(u**2)])

    def par_at(k):
        # clip level u[k]; entries 0..k-1 pass, k..n-1 clip
        return n * u[k] ** 2 / (csum[k] + (n - k) * u[k] ** 2)

    # already compliant up to rounding (e.g. a constant envelope at 0 dB)
    if par_at(n - 1) <= target_par * (1 + 1e-12):
        return float(u[-1])
    first = int(np.searchsorted(u, 0.0, side="right"))
    lo, hi = first, n - 1  # par_at(hi) > target
    if par_at(lo) > target_par:
        # even the smallest positive level overshoots: the floor n/#nonzero
        return float(u[first])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if par_at(mid) <= target_par:
            lo = mid
        else:
            hi = mid
    k = lo + 1  # level lies in [u[lo], u[hi]), entries 0..lo pass
    denom = n - target_par * (n - k)
    c = np.sqrt(target_par * csum[k] / denom)
    return float(min(max(c, u[lo]), u[hi]))


def clip_parts(a, c):
    return np.clip(a.real, -c, c) + 1j * np.clip(a.imag, -c, c)


def precode_ls_clip(symbols, plan, chan, target_par_db):
    """LS frame whose per-antenna time signals are clipped to meet a PAR target."""
    if not 0.0 <= target_par_db <= 10 * np.log10(2 * plan.W) + 1e-12:
        raise ValueError(f"target PAR must lie in [0, {10 * np.log10(2 * plan.W):.3f}] dB")
    base = precode_ls(symbols, plan, chan)
    target = 10 ** (target_par_db / 10)
    A = base.time.copy()
    levels = np.zeros(A.shape[0])
    for n in range(A.shape[0]):
        if not np.any(A[n]):
            continue
        levels[n] = clip_level(A[n], target)
        A[n] = clip_parts(A[n], levels[n])
    return TxFrame(time=A, freq=time_to_freq(A), gains=base.gains, info={"clip_levels": levels})


def precode_pmp(symbols, plan, chan, lam=0.25, K=2000, target_precoder=None, record=False, L=None):
    """Solve the Lagrangian PMP problem with FITRA and return the frame.

    The constraint system is embedded as a real problem; its Lipschitz
    constant comes from the power method unless ``L`` is given.
    """
    symbols = _check(symbols, plan, chan)
    problem = build_pmp_problem(symbols, plan, chan, target_precoder=target_precoder)
    op, b = to_real(problem, layout="interleaved")
    shape = (chan.N, plan.W)
    if not np.any(b):
        A = np.zeros(shape, dtype=np.complex128)
        return TxFrame(time=A, freq=time_to_freq(A), gains=np.ones(symbols.shape),
                       info={"iterations": 0})
    ls_problem = LinfLsProblem(op, b, lam, L=L)
    result = fitra(ls_problem, K, record=record)
    A = op.to_complex(result.x).reshape(shape).copy()
    info = {
        "iterations": result.iterations,
        "L": ls_problem.L,
        "sigma_max": np.sqrt(ls_problem.L / 2) / LIPSCHITZ_MARGIN,
        "residual": problem.residual_norm(A.ravel()),
        "seconds": result.seconds,
    }
    if record:
        info["result"] = result
    return TxFrame(time=A, freq=time_to_freq(A), gains=np.ones(symbols.shape), info=info)


def pmp_lipschitz(plan, chan, tol=1e-6):
    """Lipschitz constant used by ``precode_pmp`` for this channel.

    It depends only on the channel and tone plan, so callers running many
    PMP settings on one realization can compute it once and pass it on.
    """
    op = RealOperator(PmpOperator(plan, chan), "interleaved")
    sig = sigma_max(op.apply, op.adjoint, op.shape[1], tol=tol, max_iter=20000)
    return 2.0 * (LIPSCHITZ_MARGIN * sig) ** 2


def precode(config, symbols, plan, chan, record=False, L=None):
    if config.kind == "LS":
        return precode_ls(symbols, plan, chan)
    if config.kind == "MF":
        return precode_mf(symbols, plan, chan)
    if config.kind == "LS_CLIP":
        return precode_ls_clip(symbols, plan, chan, config.target_par_db)
    return precode_pmp(symbols, plan, chan, lam=config.lam, K=int(config.K),
                       target_precoder=config.target_precoder, record=record, L=L)
