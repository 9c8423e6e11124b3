"""Coded 16-QAM link: convolutional code, interleaver, Gray mapping, AWGN,
max-log demapping and soft Viterbi decoding."""

from dataclasses import dataclass

import numpy as np

from parmimo import kernels
from parmimo.numerics import complex_normal


@dataclass(frozen=True)
class CodeSpec:
    """Feed-forward rate-1/2 code; generators are octal tap masks, MSB = current input."""

    generators: tuple = (0o133, 0o171)
    constraint_length: int = 7

    def __post_init__(self):
        top = 1 << (self.constraint_length - 1)
        for g in self.generators:
            if g >= 2 * top or not g & top:
                raise ValueError(f"generator {g:o} does not match constraint length")
        if self.generators != (0o133, 0o171):
            # the decoder kernels hard-wire this trellis
            raise NotImplementedError("only the (133, 171) code is supported")

    @property
    def rate(self):
        return 1 / len(self.generators)

    def taps(self, g):
        return np.array([(g >> (self.constraint_length - 1 - i)) & 1 for i in range(self.constraint_length)],
                        dtype=np.int64)


DEFAULT_CODE = CodeSpec()


def conv_encode(bits, spec=DEFAULT_CODE):
    """Encode without tail bits; outputs alternate (g0, g1) per input bit."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("need a non-empty bit vector")
    n = bits.size
    streams = [np.convolve(bits, spec.taps(g))[:n] & 1 for g in spec.generators]
    return np.stack(streams, axis=1).ravel().astype(np.uint8)


def viterbi_decode(llrs, spec=DEFAULT_CODE):
    """Soft-input decode of one codeword (1-D) or a batch (2-D).

    LLRs are positive for bit 0. The trellis starts in state 0 and is not
    terminated, so traceback starts from the best final metric.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    single = llrs.ndim == 1
    batch = np.ascontiguousarray(np.atleast_2d(llrs))
    if batch.shape[1] % 2:
        raise ValueError("LLR count must be even")
    out = kernels.viterbi_decode(batch)
    return out[0] if single else out


# --------------------------------------------------------------------------
# interleaver


def make_interleaver(rng, n):
    return rng.permutation(n)


def interleave(bits, perm):
    """Position i of the output takes input ``perm[i]``; 2-D perms act per row."""
    return np.take_along_axis(np.asarray(bits), np.asarray(perm), axis=-1)


def deinterleave(values, perm):
    values = np.asarray(values)
    out = np.empty_like(values)
    np.put_along_axis(out, np.broadcast_to(perm, values.shape), values, axis=-1)
    return out


# --------------------------------------------------------------------------
# 16-QAM

# per-axis Gray labels: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
_AXIS = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}


def _table():
    pts = np.empty(16, dtype=np.complex128)
    labels = np.empty((16, 4), dtype=np.uint8)
    for idx in range(16):
        b = [(idx >> (3 - i)) & 1 for i in range(4)]
        pts[idx] = (_AXIS[(b[0], b[1])] + 1j * _AXIS[(b[2], b[3])]) / np.sqrt(10.0)
        labels[idx] = b
    return pts, labels


QAM16, QAM16_LABELS = _table()


def map_16qam_gray(bits, scale=1.0):
    """Map groups of 4 bits (b0 b1 -> I, b2 b3 -> Q) to unit-energy 16-QAM times ``scale``."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % 4:
        raise ValueError("bit count must be divisible by 4")
    groups = bits.reshape(*bits.shape[:-1], -1, 4)
    idx = groups @ np.array([8, 4, 2, 1])
    return scale * QAM16[idx]


def _distances(y, g):
    y = np.asarray(y, dtype=np.complex128)
    return np.abs(y[..., None] - np.asarray(g)[..., None] * QAM16) ** 2


def soft_demap(y, g, N0):
    """Max-log LLRs, shape (..., 4) per symbol, positive favouring bit 0.

    Model y = g*s + n with n ~ CN(0, N0) and s from the unit-energy table.
    """
    d = _distances(y, g)
    llr = np.empty(d.shape[:-1] + (4,))
    for b in range(4):
        one = QAM16_LABELS[:, b] == 1
        llr[..., b] = (d[..., one].min(axis=-1) - d[..., ~one].min(axis=-1)) / N0
    return llr


def exact_llr(y, g, N0):
    """Exact log-ratio of bit marginals (equiprobable symbols)."""
    logp = -_distances(y, g) / N0
    llr = np.empty(logp.shape[:-1] + (4,))
    for b in range(4):
        one = QAM16_LABELS[:, b] == 1
        llr[..., b] = np.logaddexp.reduce(logp[..., ~one], axis=-1) - np.logaddexp.reduce(logp[..., one], axis=-1)
    return llr


# --------------------------------------------------------------------------
# noise


def noise_variance(snr_db):
    return 10.0 ** (-snr_db / 10.0)


def apply_awgn(y, snr_db, rng):
    """Add CN(0, N0) noise with N0 = 10^(-snr_db/10); snr_db=inf adds nothing."""
    y = np.asarray(y)
    if np.isinf(snr_db) and snr_db > 0:
        return y.copy()
    return y + complex_normal(rng, y.shape, noise_variance(snr_db))


# --------------------------------------------------------------------------
# payloads and the end-to-end link


@dataclass(eq=False)
class UserPayloads:
    """Per-user info bits, interleavers and mapped symbols for one OFDM symbol.

    ``symbols`` has shape (|active|, M): column m holds user m's stream on
    the active tones in ascending order, scaled to energy 1/M.
    """

    info_bits: np.ndarray
    perms: np.ndarray
    symbols: np.ndarray


def make_payloads(rng, M, n_tones, spec=DEFAULT_CODE):
    """Draw info bits and interleavers for M users filling ``n_tones`` tones."""
    n_coded = 4 * n_tones
    n_info = int(n_coded * spec.rate)
    info = rng.integers(0, 2, size=(M, n_info), dtype=np.uint8)
    perms = np.stack([make_interleaver(rng, n_coded) for _ in range(M)])
    coded = interleave(np.stack([conv_encode(row, spec) for row in info]), perms)
    symbols = map_16qam_gray(coded, scale=1.0 / np.sqrt(M)).T.copy()
    return UserPayloads(info_bits=info, perms=perms, symbols=symbols)


def receive(Xn, chan, plan, snr_db, rng):
    """Per-user received samples y_w = H_w x_w + n_w on the active tones, shape (|active|, M)."""
    H = chan.freq[plan.active_idx]
    y = (H @ Xn[plan.active_idx][:, :, None])[:, :, 0]
    return apply_awgn(y, snr_db, rng)


def decode_users(y, gains, payloads, snr_db, spec=DEFAULT_CODE):
    """Demap, deinterleave and decode every user; returns block-error flags (M,)."""
    M = y.shape[1]
    N0 = noise_variance(snr_db) if np.isfinite(snr_db) else 1e-12
    llr = soft_demap(y.T, gains.T / np.sqrt(M), N0).reshape(M, -1)
    bits = viterbi_decode(deinterleave(llr, payloads.perms), spec)
    return np.any(bits != payloads.info_bits, axis=1)


def run_link(frame, chan, plan, payloads, snr_db, rng, spec=DEFAULT_CODE):
    """Normalize, transmit and decode one frame; returns per-user error flags."""
    Xn, P = frame.normalized()
    y = receive(Xn, chan, plan, snr_db, rng)
    return decode_users(y, frame.gains / np.sqrt(P), payloads, snr_db, spec)
