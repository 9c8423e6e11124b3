"""PAR, CCDF / PAR*, out-of-band ratio, block error rate, SNR operating point."""

import csv

import numpy as np


class MetricError(ValueError):
    pass


class NotBracketedError(MetricError):
    pass


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def par(a):
    """2W * max(||Re a||_inf, ||Im a||_inf)^2 / ||a||_2^2 for one antenna signal.

    Accepts a stack (..., W) and reduces over the last axis.
    """
    a = np.asarray(a)
    W = a.shape[-1]
    energy = np.sum(np.abs(a) ** 2, axis=-1)
    if np.any(energy == 0):
        raise MetricError("PAR is undefined for an all-zero signal")
    peak = np.maximum(np.abs(a.real).max(axis=-1), np.abs(a.imag).max(axis=-1))
    out = 2 * W * peak**2 / energy
    return float(out) if np.ndim(out) == 0 else out


def ccdf(samples_db, grid_db):
    """Empirical Prob{PAR > g} at each grid point (all values in dB)."""
    s = np.sort(np.asarray(samples_db, dtype=float))
    if s.size == 0:
        raise MetricError("no samples")
    g = np.asarray(grid_db, dtype=float)
    return (s.size - np.searchsorted(s, g, side="right")) / s.size


def par_star(samples_linear, level=0.01, min_samples=100):
    """PAR level (dB) exceeded by a fraction ``level`` of the samples.

    Uses the linear-interpolation (type 7) quantile.
    """
    s = np.asarray(samples_linear, dtype=float).ravel()
    if s.size < min_samples:
        raise MetricError(f"need at least {min_samples} PAR samples, got {s.size}")
    return float(to_db(np.quantile(s, 1.0 - level)))


def obr(X, plan):
    """Out-of-band ratio of a (W, N) frame: inactive vs active power density."""
    X = np.asarray(X)
    p = np.sum(np.abs(X) ** 2, axis=tuple(range(1, X.ndim)))
    inband = p[plan.active_idx].sum()
    if inband == 0:
        raise MetricError("no in-band power")
    if plan.n_inactive == 0:
        return 0.0
    return float(plan.n_active * p[plan.inactive_idx].sum() / (plan.n_inactive * inband))


def ser(block_errors):
    e = np.asarray(block_errors, dtype=float)
    if e.size == 0:
        raise MetricError("no outcomes")
    return float(e.mean())


def snr_operating_point(snr_db, ser_values, target=0.01):
    """Smallest SNR (dB) at which the SER curve reaches ``target``.

    Log-linear interpolation between the two grid points bracketing the
    first crossing; a zero SER at the upper point falls back to linear
    interpolation. Raises NotBracketedError if the curve never reaches the
    target or is already below it at the first grid point.
    """
    snr = np.asarray(snr_db, dtype=float)
    v = np.asarray(ser_values, dtype=float)
    hit = np.flatnonzero(v <= target)
    if hit.size == 0:
        raise NotBracketedError("SER never reaches the target on this grid")
    i = hit[0]
    if i == 0:
        raise NotBracketedError("SER is already below the target at the first grid point")
    x0, x1, y0, y1 = snr[i - 1], snr[i], v[i - 1], v[i]
    if y1 > 0:
        f = (np.log10(y0) - np.log10(target)) / (np.log10(y0) - np.log10(y1))
    else:
        f = (y0 - target) / (y0 - y1)
    return float(x0 + f * (x1 - x0))


def write_curves(path, rows):
    """CSV of (x_value, y_value, series_label) rows; None becomes an empty field."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x_value", "y_value", "series_label"])
        for x, y, label in rows:
            out.writerow([fmt(x), fmt(y), label])


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return ""
    return repr(v)
