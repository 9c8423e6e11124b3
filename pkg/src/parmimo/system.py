"""OFDM / MU-MIMO system model.

Conventions used throughout the package:

* frequency-domain frames are arrays ``X`` of shape (W, N), row w being the
  precoded vector x_w;
* time-domain frames are arrays of shape (N, W), row n being the samples
  transmitted from antenna n; flattening row-major gives the stacked
  signal [a_1; ...; a_N];
* the two are related by the unitary DFT along the sample axis.
"""

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from parmimo.numerics import complex_normal, dft, idft, pinv_rows


class DimensionError(ValueError):
    pass


class DegenerateFrameError(ValueError):
    pass


# --------------------------------------------------------------------------
# tone plans


@dataclass(frozen=True)
class TonePlan:
    W: int
    active: tuple

    def __post_init__(self):
        act = tuple(sorted(int(w) for w in self.active))
        if self.W < 1:
            raise ValueError("W must be >= 1")
        if not act:
            raise ValueError("tone plan needs at least one active tone")
        if len(set(act)) != len(act) or act[0] < 0 or act[-1] >= self.W:
            raise ValueError("active tones must be distinct bins in [0, W)")
        object.__setattr__(self, "active", act)

    @cached_property
    def inactive(self):
        used = set(self.active)
        return tuple(w for w in range(self.W) if w not in used)

    @cached_property
    def active_idx(self):
        return np.array(self.active, dtype=np.intp)

    @cached_property
    def inactive_idx(self):
        return np.array(self.inactive, dtype=np.intp)

    @property
    def n_active(self):
        return len(self.active)

    @property
    def n_inactive(self):
        return self.W - len(self.active)

    def to_json(self):
        return json.dumps({"W": self.W, "active": list(self.active)})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text) if isinstance(text, str) else text
        extra = set(doc) - {"W", "active"}
        if extra:
            raise ValueError(f"unknown tone plan keys: {sorted(extra)}")
        return cls(W=int(doc["W"]), active=tuple(doc["active"]))

    @classmethod
    def all_active(cls, W):
        return cls(W=W, active=tuple(range(W)))


def make_toneplan_80211n_40mhz():
    """108 data tones of the 802.11n 40 MHz map on a 128-point DFT.

    Occupied subcarriers are +-2..+-58; the six pilots (+-11, +-25, +-53) and
    everything else are left inactive. Logical index k maps to bin k mod 128.
    """
    W = 128
    pilots = {11, 25, 53}
    data = [k for k in range(-58, 59) if abs(k) >= 2 and abs(k) not in pilots]
    return TonePlan(W=W, active=tuple(k % W for k in data))


# --------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Tap-delay-line MIMO channel: ``taps`` has shape (T, M, N)."""

    taps: np.ndarray
    W: int

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128)
        if taps.ndim != 3:
            raise DimensionError("taps must have shape (T, M, N)")
        if taps.shape[0] > self.W:
            raise DimensionError("number of taps exceeds number of tones")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def T(self):
        return self.taps.shape[0]

    @property
    def M(self):
        return self.taps.shape[1]

    @property
    def N(self):
        return self.taps.shape[2]

    @cached_property
    def freq(self):
        """Per-tone matrices H_w = sum_t taps[t] exp(-2j pi w t / W), shape (W, M, N)."""
        ramp = np.exp(-2j * np.pi * np.outer(np.arange(self.W), np.arange(self.T)) / self.W)
        H = np.einsum("wt,tmn->wmn", ramp, self.taps)
        H.setflags(write=False)
        return H


def draw_channel(rng, N, M, T, W):
    if T > W:
        raise DimensionError("number of taps exceeds number of tones")
    return ChannelRealization(taps=complex_normal(rng, (T, M, N)), W=W)


# --------------------------------------------------------------------------
# re-ordering and normalization


def reorder_users_to_antennas(X):
    """(W, N) stack of per-tone vectors -> (N, W) stack of per-antenna vectors."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError("expected a (W, N) array")
    return X.T.copy()


def reorder_antennas_to_users(A):
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionError("expected an (N, W) array")
    return A.T.copy()


def freq_to_time(X):
    """Per-tone frame (W, N) -> per-antenna time-domain samples (N, W)."""
    return idft(reorder_users_to_antennas(X), axis=1, unitary=True)


def time_to_freq(A):
    return reorder_antennas_to_users(dft(A, axis=1, unitary=True))


def normalize_frame(X):
    """Scale a frame to unit total power; returns (scaled frame, power before)."""
    X = np.asarray(X)
    P = float(np.sum(np.abs(X) ** 2))
    if P == 0.0:
        raise DegenerateFrameError("cannot normalize an all-zero frame")
    return X / np.sqrt(P), P


# --------------------------------------------------------------------------
# the constraint operator


class PmpOperator:
    """Matrix-free map from stacked time-domain signals to constraint outputs.

    For an input of N*W complex samples it applies the DFT per antenna,
    re-orders to per-tone vectors x_w, and emits H_w x_w for each active tone
    (ascending) followed by x_w for each inactive tone (ascending). The
    output length is M*|active| + N*|inactive|.
    """

    def __init__(self, plan, chan):
        if chan.W != plan.W:
            raise DimensionError(f"channel has W={chan.W}, plan has W={plan.W}")
        self.plan = plan
        self.chan = chan
        self.N, self.M, self.W = chan.N, chan.M, plan.W
        self._H = np.ascontiguousarray(chan.freq[plan.active_idx])
        self._HH = np.ascontiguousarray(np.conj(np.swapaxes(self._H, 1, 2)))
        self.n_data = self.M * plan.n_active
        self.shape = (self.n_data + self.N * plan.n_inactive, self.N * self.W)

    def apply(self, a):
        a = np.asarray(a)
        if a.size != self.shape[1]:
            raise DimensionError(f"expected {self.shape[1]} samples, got {a.size}")
        X = np.fft.fft(a.reshape(self.N, self.W), axis=1, norm="ortho").T
        out = np.empty(self.shape[0], dtype=np.complex128)
        out[: self.n_data] = (self._H @ X[self.plan.active_idx][:, :, None]).ravel()
        out[self.n_data :] = X[self.plan.inactive_idx].ravel()
        return out

    def adjoint(self, b):
        b = np.asarray(b)
        if b.size != self.shape[0]:
            raise DimensionError(f"expected {self.shape[0]} outputs, got {b.size}")
        X = np.empty((self.W, self.N), dtype=np.complex128)
        y = b[: self.n_data].reshape(-1, self.M, 1)
        X[self.plan.active_idx] = (self._HH @ y)[:, :, 0]
        X[self.plan.inactive_idx] = b[self.n_data :].reshape(-1, self.N)
        return np.fft.ifft(X.T, axis=1, norm="ortho").ravel()

    def residual_adjoint(self, a, b):
        """C^H (C a - b) in one pass."""
        X = np.fft.fft(np.asarray(a).reshape(self.N, self.W), axis=1, norm="ortho").T
        act, ina = self.plan.active_idx, self.plan.inactive_idx
        r = (self._H @ X[act][:, :, None])[:, :, 0] - b[: self.n_data].reshape(-1, self.M)
        Y = np.empty((self.W, self.N), dtype=np.complex128)
        Y[act] = (self._HH @ r[:, :, None])[:, :, 0]
        Y[ina] = X[ina] - b[self.n_data :].reshape(-1, self.N)
        return np.fft.ifft(Y.T, axis=1, norm="ortho").ravel()

    def spectral_norm(self):
        """Exact sigma_max from per-tone SVDs (the DFT part is unitary)."""
        top = np.linalg.norm(self._H, 2, axis=(1, 2)).max()
        return float(max(top, 1.0)) if self.plan.n_inactive else float(top)


@dataclass(eq=False)
class PmpProblem:
    operator: PmpOperator
    target: np.ndarray

    def __post_init__(self):
        if self.target.size != self.operator.shape[0]:
            raise DimensionError("target length does not match operator output")

    def residual_norm(self, a):
        return float(np.linalg.norm(self.target - self.operator.apply(a)))


def stack_target(symbols, plan, N):
    """b-vector: active-tone symbol blocks, then zero blocks for inactive tones."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    return np.concatenate([symbols.ravel(), np.zeros(N * plan.n_inactive, dtype=np.complex128)])


def build_pmp_problem(symbols, plan, chan, target_precoder=None):
    """Assemble the PMP constraint system for one OFDM symbol.

    ``symbols`` has shape (|active|, M). With ``target_precoder`` given
    ("pinv", "mf", or an (|active|, N, M) array P) the data blocks become
    H_w P_w s_w instead of s_w.
    """
    op = PmpOperator(plan, chan)
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.shape != (plan.n_active, chan.M):
        raise DimensionError(f"symbols must have shape ({plan.n_active}, {chan.M})")
    if target_precoder is not None:
        H = op._H
        if isinstance(target_precoder, str):
            if target_precoder == "pinv":
                P = pinv_rows(H)
            elif target_precoder == "mf":
                P = op._HH
            else:
                raise ValueError(f"unknown target precoder {target_precoder!r}")
        else:
            P = np.asarray(target_precoder)
            if P.shape != (plan.n_active, chan.N, chan.M):
                raise DimensionError("target precoder must have shape (|active|, N, M)")
        symbols = (H @ (P @ symbols[:, :, None]))[:, :, 0]
    return PmpProblem(operator=op, target=stack_target(symbols, plan, chan.N))


# --------------------------------------------------------------------------
# complex -> real embedding


@dataclass(eq=False)
class RealOperator:
    """Real view [[Re C, -Im C], [Im C, Re C]] of a complex operator.

    With ``layout="stacked"`` real vectors are [Re z; Im z]. The
    "interleaved" layout (Re z_0, Im z_0, Re z_1, ...) is the same map up to
    a fixed permutation of coordinates and lets every conversion be a
    zero-copy view; the solver uses it for speed.
    """

    inner: object
    layout: str = "stacked"

    def __post_init__(self):
        if self.layout not in ("stacked", "interleaved"):
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def shape(self):
        m, n = self.inner.shape
        return (2 * m, 2 * n)

    def to_complex(self, x):
        return to_complex(x, self.layout)

    def to_real(self, z):
        return to_real_vector(z, self.layout)

    def apply(self, x):
        return self.to_real(self.inner.apply(self.to_complex(x)))

    def adjoint(self, y):
        return self.to_real(self.inner.adjoint(self.to_complex(y)))

    def residual_adjoint(self, x, s):
        fused = getattr(self.inner, "residual_adjoint", None)
        if fused is None:
            return self.adjoint(self.apply(x) - s)
        return self.to_real(fused(self.to_complex(x), self.to_complex(s)))


def to_real_vector(z, layout="stacked"):
    z = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    if layout == "interleaved":
        return z.view(np.float64)
    return np.concatenate([z.real, z.imag])


def to_complex(x, layout="stacked"):
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if layout == "interleaved":
        return x.view(np.complex128)
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def to_real(problem, layout="stacked"):
    """(operator, target) of the equivalent real-valued problem."""
    return RealOperator(problem.operator, layout), to_real_vector(problem.target, layout)


def linf_tilde(z):
    """max(||Re z||_inf, ||Im z||_inf)."""
    z = np.asarray(z)
    return float(max(np.abs(z.real).max(initial=0.0), np.abs(z.imag).max(initial=0.0)))
