"""Digital reference demappers: exact and max-log LLRs.

Both accept scalar or array observations.  The exact LLR is evaluated
through a max-shifted log-sum-exp so it neither overflows nor
underflows at high SNR; the max-log minimum is a brute-force search
over the four points of each index set.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .constellation import Constellation, index_set


def _class_points(c: Constellation, k: int) -> tuple[np.ndarray, np.ndarray]:
    i0 = index_set(k, 0, c).indices
    i1 = index_set(k, 1, c).indices
    return c.points[list(i0)], c.points[list(i1)]


def exact_llr(r, k: int, c: Constellation, p) -> np.ndarray | float:
    """LLR of bit k from the true Gaussian likelihoods.

    log sum_{i in I_k^1} exp(-(r - x_i)^2 / 2 sigma^2)
      - log sum_{i in I_k^0} exp(-(r - x_i)^2 / 2 sigma^2)
    """
    p0, p1 = _class_points(c, k)
    r_arr = np.asarray(r, dtype=float)
    scalar = r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    inv = 1.0 / (2.0 * p.sigma * p.sigma)
    e1 = -(r_arr[..., None] - p1) ** 2 * inv
    e0 = -(r_arr[..., None] - p0) ** 2 * inv
    out = logsumexp(e1, axis=-1) - logsumexp(e0, axis=-1)
    return float(out[0]) if scalar else out


def maxlog_llr(r, k: int, c: Constellation, p) -> np.ndarray | float:
    """Max-log LLR: SNR * (min_{I_k^0} (r - x)^2 - min_{I_k^1} (r - x)^2)."""
    p0, p1 = _class_points(c, k)
    r_arr = np.asarray(r, dtype=float)
    scalar = r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    d0 = ((r_arr[..., None] - p0) ** 2).min(axis=-1)
    d1 = ((r_arr[..., None] - p1) ** 2).min(axis=-1)
    out = p.snr_linear * (d0 - d1)
    return float(out[0]) if scalar else out


def maxlog_breakpoints(k: int, c: Constellation) -> np.ndarray:
    """Kink locations of the max-log LLR in the observation domain.

    The squared-distance minimum over a class switches branches at the
    midpoints of consecutive points of that class; the difference of
    the two class minima is piecewise linear with kinks at exactly
    those midpoints.
    """
    p0, p1 = _class_points(c, k)
    mids = np.concatenate([(p0[:-1] + p0[1:]) / 2.0, (p1[:-1] + p1[1:]) / 2.0])
    return np.unique(np.round(mids, 15))


def maxlog_segment_slopes(k: int, c: Constellation, p) -> np.ndarray:
    """Slope of the max-log LLR on each segment between its kinks.

    On a segment where a is the active class-0 point and b the active
    class-1 point, the LLR is SNR * ((r-a)^2 - (r-b)^2), with slope
    2 * SNR * (b - a).
    """
    p0, p1 = _class_points(c, k)
    bks = maxlog_breakpoints(k, c)
    probes = np.concatenate([[bks[0] - 1.0], (bks[:-1] + bks[1:]) / 2.0, [bks[-1] + 1.0]])
    a = p0[np.argmin((probes[:, None] - p0) ** 2, axis=1)]
    b = p1[np.argmin((probes[:, None] - p1) ** 2, axis=1)]
    return 2.0 * p.snr_linear * (b - a)
