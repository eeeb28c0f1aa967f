"""Polarity-alternation statistics: PAEP counting, gradients, correlation,
and the adaptive edge weights they induce.

A PAEP is a pair of temporally consecutive events at one pixel with opposite
polarities no further apart than a gap bound; dense PAEPs mark edges that
oscillate under turbulence.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import EventStream, Frame, GradientMap, PaepMap
from .errors import BadParam, BadSpan, DegenerateVariance, GeometryMismatch, TooSmall


def count_paep(stream: EventStream, t_begin: int, t_end: int, max_gap_us: int) -> PaepMap:
    """Count opposite-polarity consecutive pairs per pixel.

    Events with t_begin <= t <= t_end take part; every consecutive pair
    counts, so a (+, -, +) triple yields 2.  Simultaneous events at one
    pixel keep the canonical stream order (negative polarity first).
    """
    if t_end <= t_begin:
        raise BadSpan(f"need t_end > t_begin, got [{t_begin}, {t_end}]")
    if max_gap_us < 0:
        raise BadParam("max_gap_us must be >= 0")
    inside = (stream.t >= t_begin) & (stream.t <= t_end)
    t = stream.t[inside]
    p = stream.p[inside]
    pix = stream.y[inside].astype(np.int64) * stream.width + stream.x[inside]
    order = np.argsort(pix, kind="stable")  # stable keeps per-pixel time order
    t, p, pix = t[order], p[order], pix[order]
    count = np.zeros(stream.height * stream.width, dtype=np.int64)
    if len(t) >= 2:
        pair = (
            (pix[1:] == pix[:-1])
            & (p[1:] != p[:-1])
            & (t[1:] - t[:-1] <= max_gap_us)
        )
        count += np.bincount(pix[:-1][pair], minlength=len(count))
    return PaepMap(count.reshape(stream.height, stream.width), t_end - t_begin)


def gradient_map(frame: Frame) -> GradientMap:
    """3x3 Sobel gradient magnitude and direction with clamped borders."""
    if frame.height < 3 or frame.width < 3:
        raise TooSmall("gradient_map needs at least a 3x3 frame")
    gx = ndimage.sobel(frame.intensity, axis=1, mode="nearest")
    gy = ndimage.sobel(frame.intensity, axis=0, mode="nearest")
    return GradientMap(np.hypot(gx, gy), np.arctan2(gy, gx))


def paep_gradient_correlation(paep: PaepMap, grad: GradientMap, border_margin: int = 2) -> float:
    """Pearson correlation between PAEP counts and gradient magnitudes over
    the interior (border_margin pixels excluded on every side)."""
    if (paep.height, paep.width) != (grad.height, grad.width):
        raise GeometryMismatch("PAEP and gradient maps differ in geometry")
    if border_margin < 0:
        raise BadParam("border_margin must be >= 0")
    m = border_margin
    a = paep.count[m:paep.height - m, m:paep.width - m].astype(np.float64).ravel()
    b = grad.magnitude[m:grad.height - m, m:grad.width - m].ravel()
    if a.size < 2:
        raise DegenerateVariance("interior smaller than 2 pixels")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0.0:
        raise DegenerateVariance("one map is constant over the interior")
    return float((da * db).sum() / denom)


def epaw_weights(paep: PaepMap, beta: float = 1.0) -> np.ndarray:
    """Linear edge-enhancement weights 1 + beta * count / max(count).

    All-ones when no pixel alternates; values lie in [1, 1 + beta]."""
    if beta < 0:
        raise BadParam("beta must be >= 0")
    peak = int(paep.count.max()) if paep.count.size else 0
    if peak == 0:
        return np.ones((paep.height, paep.width))
    return 1.0 + beta * (paep.count.astype(np.float64) / peak)
