"""Event-tube fitting: per-pixel robust linear trajectories, event
classification, and the reduction to a 2-D motion field.

A rigidly moving object traces a spatiotemporally coherent tube through the
event volume: within a short window each pixel's neighborhood events lie on
a line x(t) = base + (t - t0) * v, so the whole tube reduces to an
(h, w, 2) velocity tensor.  Turbulence-only events admit no such line at
comparable residual, which is what the RANSAC fit separates.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import EventStream, GradientMap, MotionField, TubeFitMap, TubeLabel
from .errors import BadParam, GeometryMismatch, WindowOutOfSpan

PX_PER_MS_SCALE = 1000.0  # velocity falls back to px/ms when dt is unknown


@dataclass(frozen=True)
class TubeParams:
    """Tube-fit knobs: temporal half-window (µs), spatial gather radius
    (px, Chebyshev square), RANSAC controls, and the inlier/label
    tolerance in px."""

    half_window_us: int = 20_000
    radius: int = 3
    min_support: int = 6
    residual_tol: float = 1.0
    ransac_iters: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.half_window_us <= 0:
            raise BadParam("half_window_us must be > 0")
        if self.radius < 1:
            raise BadParam("radius must be >= 1")
        if self.min_support < 3:
            raise BadParam("min_support must be >= 3")
        if self.residual_tol <= 0:
            raise BadParam("residual_tol must be > 0")
        if self.ransac_iters < 1:
            raise BadParam("ransac_iters must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise BadParam("seed must fit in 64 unsigned bits")


def fit_window(
    stream: EventStream,
    window_begin: int,
    window_end: int,
    anchor_us: int,
    params: TubeParams,
    dt_us: int | None = None,
    threads: int = 1,
) -> TubeFitMap:
    """Fit per-pixel trajectories to events in [window_begin, window_end],
    anchored (base position evaluated) at ``anchor_us``.

    ``fit_event_tubes`` wraps this with the symmetric-window contract; the
    restore pipeline uses it directly with a causal window ending at the
    reference frame.
    """
    if window_end < window_begin:
        raise BadParam("window_end must be >= window_begin")
    inside = (stream.t >= window_begin) & (stream.t <= window_end)
    et = stream.t[inside].astype(np.float64)
    ex = stream.x[inside].astype(np.float64)
    ey = stream.y[inside].astype(np.float64)
    order = np.lexsort((et, ex, ey))
    ex, ey, et = (np.ascontiguousarray(a[order]) for a in (ex, ey, et))
    pix = (ey.astype(np.int64) * stream.width + ex.astype(np.int64))
    counts = np.bincount(pix, minlength=stream.height * stream.width)
    offsets = np.zeros(stream.height * stream.width + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])

    height, width = stream.height, stream.width
    bands = _row_bands(height, threads)

    def run(band):
        return _kernels.backend.fit_tubes_kernel(
            ex, ey, et, offsets, width, height, float(anchor_us),
            params.radius, params.min_support, params.residual_tol,
            params.ransac_iters, params.seed, band[0], band[1],
        )

    if len(bands) == 1:
        parts = [run(bands[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            parts = list(pool.map(run, bands))
    base = np.concatenate([p[0] for p in parts])
    vel_us = np.concatenate([p[1] for p in parts])
    resid = np.concatenate([p[2] for p in parts])
    support = np.concatenate([p[3] for p in parts])
    label = np.concatenate([p[4] for p in parts])
    scale = float(dt_us) if dt_us is not None else PX_PER_MS_SCALE
    return TubeFitMap(
        base=base,
        velocity=vel_us * scale,
        velocity_us=vel_us,
        residual=resid,
        support=support,
        label=label,
        t0_us=anchor_us,
        residual_tol=params.residual_tol,
        min_support=params.min_support,
        time_scale_us=scale,
    )


def _row_bands(height: int, threads: int):
    threads = max(1, min(int(threads), height))
    edges = np.linspace(0, height, threads + 1, dtype=int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(threads) if edges[i] < edges[i + 1]]


def fit_event_tubes(
    stream: EventStream,
    t0_us: int,
    params: TubeParams = TubeParams(),
    dt_us: int | None = None,
    threads: int = 1,
) -> TubeFitMap:
    """Per-pixel RANSAC trajectory fits over the symmetric window
    [t0 - half_window, t0 + half_window].

    Velocities are reported in px/frame when ``dt_us`` is given, px/ms
    otherwise.  Deterministic: pixel (x, y) uses the SplitMix64 stream
    seeded with seed XOR (y * width + x).
    """
    w0 = t0_us - params.half_window_us
    w1 = t0_us + params.half_window_us
    if w0 < stream.t_begin or w1 > stream.t_end:
        raise WindowOutOfSpan(
            f"window [{w0}, {w1}] exceeds stream span [{stream.t_begin}, {stream.t_end}]"
        )
    return fit_window(stream, w0, w1, t0_us, params, dt_us=dt_us, threads=threads)


def classify_events(stream: EventStream, fits: TubeFitMap, tol: float) -> np.ndarray:
    """Label every event TUBE or TURBULENCE against the per-pixel fits.

    An event is TUBE iff its pixel's fit is TUBE and the event lies within
    ``tol`` px of that pixel's line at the event's timestamp.  Returns an
    int8 array of TubeLabel values aligned with the stream order.
    """
    if (fits.height, fits.width) != (stream.height, stream.width):
        raise GeometryMismatch("fit map geometry does not match stream")
    if tol <= 0:
        raise BadParam("tol must be > 0")
    labels = np.full(len(stream), int(TubeLabel.TURBULENCE), dtype=np.int8)
    if len(stream) == 0:
        return labels
    ys = stream.y.astype(np.int64)
    xs = stream.x.astype(np.int64)
    on_tube_pixel = fits.label[ys, xs] == TubeLabel.TUBE
    if not on_tube_pixel.any():
        return labels
    idx = np.nonzero(on_tube_pixel)[0]
    yy, xx = ys[idx], xs[idx]
    dt = stream.t[idx].astype(np.float64) - fits.t0_us
    px = fits.base[yy, xx, 0] + dt * fits.velocity_us[yy, xx, 0]
    py = fits.base[yy, xx, 1] + dt * fits.velocity_us[yy, xx, 1]
    dx = stream.x[idx] - px
    dy = stream.y[idx] - py
    near = dx * dx + dy * dy <= tol * tol
    labels[idx[near]] = int(TubeLabel.TUBE)
    return labels


def project_to_motion_field(fits: TubeFitMap) -> MotionField:
    """Copy TUBE velocities into a valid-masked (h, w, 2) field."""
    valid = fits.label == TubeLabel.TUBE
    velocity = np.zeros((fits.height, fits.width, 2), dtype=np.float32)
    velocity[valid] = fits.velocity[valid].astype(np.float32)
    return MotionField(velocity, valid)


def edge_masked_motion(field: MotionField, grad: GradientMap, grad_thresh: float) -> MotionField:
    """Keep motion only where the gradient magnitude reaches ``grad_thresh``."""
    if (field.height, field.width) != (grad.height, grad.width):
        raise GeometryMismatch("motion field and gradient map differ in geometry")
    valid = field.valid & (grad.magnitude >= grad_thresh)
    velocity = np.where(valid[..., None], field.velocity, np.float32(0.0))
    return MotionField(velocity, valid)
