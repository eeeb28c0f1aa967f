"""Event synthesis from frame sequences, and voxel-grid accumulation.

Per pixel, a reference level tracks log(I + eps); the log signal is
interpolated linearly between frames and an event fires whenever the
interpolant crosses reference +- threshold (crossing exactly at the level
counts).  Crossing times round to integer microseconds.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import EventStream, FrameSequence
from .errors import BadParam, BadSpan, TooFewFrames


@dataclass(frozen=True)
class EvsParams:
    """Ideal event-camera model: contrast threshold (log units), intensity
    floor added before the log, and per-pixel refractory gap in µs."""

    threshold: float = 0.25
    eps: float = 1.0 / 255.0
    refractory_us: int = 0

    def __post_init__(self):
        if self.threshold <= 0:
            raise BadParam(f"threshold must be > 0, got {self.threshold}")
        if self.eps <= 0:
            raise BadParam(f"eps must be > 0, got {self.eps}")
        if self.refractory_us < 0:
            raise BadParam("refractory_us must be >= 0")


class VoxelGrid:
    """Signed polarity sums per (bin, y, x) over a half-open time span."""

    def __init__(self, value: np.ndarray, t_begin: int, t_end: int):
        value = np.array(value, dtype=np.int64, copy=True)
        if value.ndim != 3:
            raise BadParam("voxel values must have shape (n_bins, height, width)")
        value.setflags(write=False)
        self.value = value
        self.t_begin = int(t_begin)
        self.t_end = int(t_end)

    @property
    def n_bins(self) -> int:
        return self.value.shape[0]

    @property
    def height(self) -> int:
        return self.value.shape[1]

    @property
    def width(self) -> int:
        return self.value.shape[2]


def _row_bands(height: int, threads: int):
    threads = max(1, min(int(threads), height))
    edges = np.linspace(0, height, threads + 1, dtype=int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(threads) if edges[i] < edges[i + 1]]


def synthesize_events(seq: FrameSequence, params: EvsParams = EvsParams(), threads: int = 1) -> EventStream:
    """Simulate the threshold model over a frame sequence.

    Deterministic; the thread count only changes internal banding, never the
    output (the final canonical sort makes emission order irrelevant).
    """
    if len(seq) < 2:
        raise TooFewFrames("event synthesis needs at least 2 frames")
    log_frames = np.ascontiguousarray(np.log(seq.stack() + params.eps))
    timestamps = seq.timestamps()
    bands = _row_bands(seq.height, threads)

    def run(band):
        return _kernels.backend.synthesize_events_kernel(
            log_frames, timestamps, params.threshold, params.refractory_us, band[0], band[1]
        )

    if len(bands) == 1:
        parts = [run(bands[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            parts = list(pool.map(run, bands))
    t = np.concatenate([p[0] for p in parts])
    x = np.concatenate([p[1] for p in parts])
    y = np.concatenate([p[2] for p in parts])
    p = np.concatenate([p[3] for p in parts])
    return EventStream.from_arrays(
        seq.width, seq.height, t, x, y, p, t_begin=seq.t0, t_end=seq.t_end
    )


def accumulate_voxels(stream: EventStream, n_bins: int, t_begin: int, t_end: int) -> VoxelGrid:
    """Sum polarities into ``n_bins`` uniform time bins over [t_begin, t_end)."""
    if t_end <= t_begin:
        raise BadSpan(f"need t_end > t_begin, got [{t_begin}, {t_end}]")
    if n_bins < 1:
        raise BadParam("n_bins must be >= 1")
    value = np.zeros((n_bins, stream.height, stream.width), dtype=np.int64)
    inside = (stream.t >= t_begin) & (stream.t < t_end)
    t = stream.t[inside].astype(np.int64)
    bins = (t - t_begin) * n_bins // (t_end - t_begin)
    np.add.at(value, (bins, stream.y[inside], stream.x[inside]), stream.p[inside])
    return VoxelGrid(value, t_begin, t_end)
