"""Filtering, dynamic time warping and penalized smoothing splines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg, signal

from .errors import InvalidArgument


def median_filter(values, window=5):
    """Centered running median; windows shrink at the ends."""
    if window < 1 or window % 2 == 0:
        raise InvalidArgument(f"median window must be a positive odd integer, got {window}")
    x = np.asarray(values, dtype=float)
    n = x.size
    h = window // 2
    if h == 0 or n == 0:
        return x.copy()
    out = np.empty(n)
    if n > 2 * h:
        out[h:n - h] = np.median(sliding_window_view(x, window), axis=1)
        edges = list(range(h)) + list(range(n - h, n))
    else:
        edges = range(n)
    for i in edges:
        out[i] = np.median(x[max(0, i - h):i + h + 1])
    return out


def estimate_period(values, dt, min_period=1.0):
    """Dominant period from the highest autocorrelation peak.

    The autocorrelation is normalised per lag (unbiased) and searched past its
    first zero crossing, at lags of at least ``min_period`` seconds and at most
    half the series. Returns None when the series is flat or shows no repeat.
    """
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    energy = x @ x
    if x.size < 4 or energy <= 1e-12 * max(1.0, np.abs(x).max() ** 2):
        return None
    n = x.size
    ac = signal.correlate(x, x, mode="full", method="fft")[n - 1:]
    ac = ac / (energy * (n - np.arange(n)) / n)
    below = np.flatnonzero(ac < 0)
    if below.size == 0:
        return None
    lo = max(int(below[0]), int(np.ceil(min_period / dt)))
    hi = n // 2
    if hi - lo < 3:
        return None
    tail = ac[lo:hi + 1]
    peaks, _ = signal.find_peaks(tail)
    peaks = peaks[tail[peaks] > 0]
    if peaks.size == 0:
        return None
    return float((lo + peaks[np.argmax(tail[peaks])]) * dt)


def adaptive_lowpass(values, dt, harmonics=5.0, order=2, fallback_period=None):
    """Zero-phase Butterworth low-pass tuned to the motion period.

    Cutoff is ``harmonics / period``. Flat series come back unchanged, and a
    series with no detectable repeat uses ``fallback_period`` (or is returned
    unchanged when that is None).
    """
    x = np.asarray(values, dtype=float)
    if x.size < 8:
        raise InvalidArgument("adaptive low-pass needs at least 8 samples")
    if np.ptp(x) == 0:
        return x.copy()
    period = estimate_period(x, dt)
    if period is None:
        period = fallback_period
    if period is None:
        return x.copy()
    cutoff = harmonics / period
    nyquist = 0.5 / dt
    if cutoff >= nyquist:
        return x.copy()
    b, a = signal.butter(order, cutoff / nyquist)
    padlen = min(3 * max(len(a), len(b)), x.size - 1)
    return signal.filtfilt(b, a, x, padlen=padlen)


@dataclass
class WarpPath:
    pairs: np.ndarray
    cost: float

    @property
    def ref_index(self):
        return self.pairs[:, 0]

    @property
    def query_index(self):
        return self.pairs[:, 1]


def dtw_align(ref, query):
    """Minimum-cost monotone alignment under absolute-difference local cost.

    Steps are (1,0), (0,1), (1,1); the traceback prefers the diagonal on ties.
    """
    r = np.asarray(ref, dtype=float)
    q = np.asarray(query, dtype=float)
    n, m = r.size, q.size
    if n == 0 or m == 0:
        raise InvalidArgument("DTW needs two non-empty series")
    local = np.abs(r[:, None] - q[None, :])
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        prev = acc[i - 1]
        row = acc[i]
        li = local[i - 1]
        # vertical and diagonal moves come from the previous row
        best = np.minimum(prev[1:], prev[:-1])
        for j in range(1, m + 1):
            b = best[j - 1]
            if row[j - 1] < b:
                b = row[j - 1]
            row[j] = li[j - 1] + b

    i, j = n, m
    pairs = [(n - 1, m - 1)]
    while i > 1 or j > 1:
        diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
        if diag <= up and diag <= left:
            i, j = i - 1, j - 1
        elif up <= left:
            i -= 1
        else:
            j -= 1
        pairs.append((i - 1, j - 1))
    pairs.reverse()
    return WarpPath(pairs=np.array(pairs, dtype=int), cost=float(acc[n, m]))


def apply_warp(path, values, target_len):
    """Resample ``values`` (query time base) onto the reference time base.

    Each reference index gets the mean of every query sample matched to it.
    """
    v = np.asarray(values, dtype=float)
    ref = path.ref_index
    qry = path.query_index
    if qry.max() + 1 != v.size or ref.max() + 1 != target_len:
        raise InvalidArgument(
            f"warp path spans {ref.max() + 1}x{qry.max() + 1}, got target {target_len} and series {v.size}")
    sums = np.bincount(ref, weights=v[qry], minlength=target_len)
    counts = np.bincount(ref, minlength=target_len)
    return sums / counts


def smooth_spline(values, x=None, p=0.1):
    """Cubic smoothing spline evaluated at its knots.

    Minimizes ``p * sum((y - f(x))**2) + (1 - p) * integral(f''**2)``, so
    ``p = 1`` interpolates. ``x`` defaults to the sample index.

    Solved in Reinsch form: with Q the (n, n-2) second divided-difference
    matrix and R the (n-2, n-2) tridiagonal Gram matrix of the hat
    functions, the knot second derivatives g solve
    ``(R + lam Q^T Q) g = Q^T y`` and ``f = y - lam Q g``, ``lam = (1-p)/p``.
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    if n < 4:
        raise InvalidArgument("smoothing spline needs at least 4 samples")
    if not 0 < p <= 1:
        raise InvalidArgument(f"smoothing parameter must be in (0, 1], got {p}")
    x = np.arange(n, dtype=float) if x is None else np.asarray(x, dtype=float)
    h = np.diff(x)
    if x.size != n or np.any(h <= 0):
        raise InvalidArgument("spline abscissae must be strictly increasing and match the data")
    lam = (1.0 - p) / p
    if lam == 0:
        return y.copy()

    inv = 1.0 / h
    # Q columns: [1/h_{k-1}, -1/h_{k-1} - 1/h_k, 1/h_k] at rows k-1, k, k+1
    q0, q1, q2 = inv[:-1], -inv[:-1] - inv[1:], inv[1:]
    m = n - 2
    # Q^T y
    qty = q0 * y[:-2] + q1 * y[1:-1] + q2 * y[2:]
    # symmetric pentadiagonal R + lam Q^T Q in upper banded storage
    ab = np.zeros((3, m))
    ab[2] = (h[:-1] + h[1:]) / 3 + lam * (q0 ** 2 + q1 ** 2 + q2 ** 2)
    ab[1, 1:] = h[1:-1] / 6 + lam * (q1[:-1] * q0[1:] + q2[:-1] * q1[1:])
    ab[0, 2:] = lam * q2[:-2] * q0[2:]
    g = linalg.solveh_banded(ab, qty)
    qg = np.zeros(n)
    qg[:-2] += q0 * g
    qg[1:-1] += q1 * g
    qg[2:] += q2 * g
    return y - lam * qg
