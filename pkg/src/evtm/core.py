"""Core domain types: events, frames, fields and fit maps.

Every type validates its invariants at construction and exposes its payload
as read-only numpy arrays, so instances can be shared freely between
workers.  Timestamps are integer microseconds throughout; intensities are
linear reals in [0, 1] (8-bit file inputs map to v/255 in the io module).
"""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    BadParam,
    BadPolarity,
    GeometryMismatch,
    LengthMismatch,
    OutOfBounds,
    TooFewFrames,
)

ZERO_MEAN_TOL_PX = 1e-6


def _locked(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class Event(NamedTuple):
    """One brightness-change record: time (µs), pixel, polarity (±1)."""

    t: int
    x: int
    y: int
    p: int


class EventStream:
    """Immutable, canonically ordered event collection over a sensor geometry.

    Events are stored as column arrays sorted by (t, y, x, p); ties keep a
    fixed order so every downstream pass is deterministic.  The span
    [t_begin, t_end] must cover all events; an empty stream defaults to a
    [0, 0] span.
    """

    def __init__(
        self,
        width: int,
        height: int,
        events: Iterable[tuple] | np.ndarray = (),
        t_begin: int | None = None,
        t_end: int | None = None,
    ):
        if width < 1 or height < 1:
            raise BadParam(f"sensor geometry must be positive, got {width}x{height}")
        rows = np.asarray(list(events) if not isinstance(events, np.ndarray) else events)
        if rows.size == 0:
            t = np.empty(0, np.int64)
            x = y = np.empty(0, np.int32)
            p = np.empty(0, np.int8)
        else:
            if rows.ndim != 2 or rows.shape[1] != 4:
                raise BadParam("events must be (t, x, y, p) records")
            t = rows[:, 0].astype(np.int64)
            x = rows[:, 1].astype(np.int64)
            y = rows[:, 2].astype(np.int64)
            p = rows[:, 3].astype(np.int64)
        self._init_columns(width, height, t, x, y, p, t_begin, t_end)

    @classmethod
    def from_arrays(
        cls,
        width: int,
        height: int,
        t: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        p: np.ndarray,
        t_begin: int | None = None,
        t_end: int | None = None,
    ) -> "EventStream":
        stream = cls.__new__(cls)
        stream._init_columns(
            width,
            height,
            np.asarray(t, np.int64),
            np.asarray(x, np.int64),
            np.asarray(y, np.int64),
            np.asarray(p, np.int64),
            t_begin,
            t_end,
        )
        return stream

    def _init_columns(self, width, height, t, x, y, p, t_begin, t_end):
        if width < 1 or height < 1:
            raise BadParam(f"sensor geometry must be positive, got {width}x{height}")
        if not (len(t) == len(x) == len(y) == len(p)):
            raise BadParam("event columns must share one length")
        if len(p) and not np.all((p == 1) | (p == -1)):
            bad = p[(p != 1) & (p != -1)][0]
            raise BadPolarity(f"polarity must be -1 or +1, got {bad}")
        if len(t) and t.min() < 0:
            raise BadParam("timestamps must be non-negative")
        if len(x) and (x.min() < 0 or x.max() >= width or y.min() < 0 or y.max() >= height):
            raise OutOfBounds(f"event coordinates exceed {width}x{height} geometry")
        order = np.lexsort((p, x, y, t))
        self.width = int(width)
        self.height = int(height)
        self.t = _locked(t[order].astype(np.int64))
        self.x = _locked(x[order].astype(np.int32))
        self.y = _locked(y[order].astype(np.int32))
        self.p = _locked(p[order].astype(np.int8))
        if len(t):
            lo, hi = int(self.t[0]), int(self.t[-1])
        else:
            lo = hi = 0
        self.t_begin = lo if t_begin is None else int(t_begin)
        self.t_end = hi if t_end is None else int(t_end)
        if self.t_begin > self.t_end:
            raise BadParam("t_begin must not exceed t_end")
        if len(t) and (lo < self.t_begin or hi > self.t_end):
            raise BadParam("span [t_begin, t_end] must cover all events")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.t_begin == other.t_begin
            and self.t_end == other.t_end
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def __repr__(self) -> str:
        return (
            f"EventStream({self.width}x{self.height}, {len(self)} events, "
            f"span [{self.t_begin}, {self.t_end}] us)"
        )

    def subset(self, mask: np.ndarray) -> "EventStream":
        """New stream keeping only masked events; the span is preserved."""
        return EventStream.from_arrays(
            self.width, self.height,
            self.t[mask], self.x[mask], self.y[mask], self.p[mask],
            self.t_begin, self.t_end,
        )


class Frame:
    """A single grayscale frame with intensities in [0, 1]."""

    def __init__(self, intensity: np.ndarray):
        arr = np.array(intensity, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise BadParam("frame intensity must be a non-empty 2-D grid")
        if not np.all(np.isfinite(arr)):
            raise BadParam("frame intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise BadParam("frame intensities must lie in [0, 1]")
        self.intensity = _locked(arr)

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    def __repr__(self) -> str:
        return f"Frame({self.width}x{self.height})"


class FrameSequence:
    """Uniformly timestamped frames: frame k is at t0 + k*dt microseconds."""

    def __init__(self, frames: Sequence[Frame], t0: int = 0, dt: int = 1):
        if len(frames) == 0:
            raise TooFewFrames("a sequence needs at least one frame")
        if int(dt) <= 0:
            raise BadParam(f"dt must be a positive microsecond count, got {dt}")
        if int(t0) < 0:
            raise BadParam("t0 must be non-negative")
        shape = (frames[0].height, frames[0].width)
        for f in frames[1:]:
            if (f.height, f.width) != shape:
                raise GeometryMismatch("all frames must share one geometry")
        self.frames = tuple(frames)
        self.t0 = int(t0)
        self.dt = int(dt)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def t_end(self) -> int:
        return self.t0 + (len(self.frames) - 1) * self.dt

    def __len__(self) -> int:
        return len(self.frames)

    def timestamps(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.frames), dtype=np.int64)

    def stack(self) -> np.ndarray:
        """Intensities as one (n_frames, height, width) array."""
        return np.stack([f.intensity for f in self.frames])


class TurbulenceField:
    """Per-pixel, per-frame tilt displacements with exact zero temporal mean."""

    def __init__(self, displacement: np.ndarray, max_tilt: float | None = None):
        disp = np.array(displacement, dtype=np.float64, copy=True)
        if disp.ndim != 4 or disp.shape[3] != 2 or disp.shape[0] < 1:
            raise BadParam("displacement must have shape (n_frames, height, width, 2)")
        if not np.all(np.isfinite(disp)):
            raise BadParam("displacements must be finite")
        mean = disp.mean(axis=0)
        worst = float(np.hypot(mean[..., 0], mean[..., 1]).max()) if disp.size else 0.0
        if worst > ZERO_MEAN_TOL_PX:
            raise BadParam(
                f"per-pixel temporal mean magnitude {worst:.3e} px exceeds {ZERO_MEAN_TOL_PX} px"
            )
        mag_max = float(np.hypot(disp[..., 0], disp[..., 1]).max()) if disp.size else 0.0
        self.max_tilt = mag_max if max_tilt is None else float(max_tilt)
        if mag_max > self.max_tilt:
            raise BadParam(f"displacement magnitude {mag_max:.3g} exceeds bound {self.max_tilt:.3g}")
        self.displacement = _locked(disp)

    @property
    def n_frames(self) -> int:
        return self.displacement.shape[0]

    @property
    def height(self) -> int:
        return self.displacement.shape[1]

    @property
    def width(self) -> int:
        return self.displacement.shape[2]


class MotionField:
    """Per-pixel 2-D velocity (px/frame) with a validity mask.

    Velocities are held as float32 so the on-disk MF1 form round-trips
    bit-exactly.  Invalid pixels carry exactly (0, 0).
    """

    def __init__(self, velocity: np.ndarray, valid: np.ndarray):
        vel = np.array(velocity, dtype=np.float32, copy=True)
        ok = np.array(valid, dtype=bool, copy=True)
        if vel.ndim != 3 or vel.shape[2] != 2:
            raise BadParam("velocity must have shape (height, width, 2)")
        if ok.shape != vel.shape[:2]:
            raise GeometryMismatch("valid mask and velocity grid disagree")
        if not np.all(np.isfinite(vel[ok])):
            raise BadParam("velocity must be finite wherever valid")
        if np.any(vel[~ok] != 0.0):
            raise BadParam("velocity must be (0, 0) wherever invalid")
        self.velocity = _locked(vel)
        self.valid = _locked(ok)

    @property
    def height(self) -> int:
        return self.velocity.shape[0]

    @property
    def width(self) -> int:
        return self.velocity.shape[1]


class PaepMap:
    """Per-pixel polarity-alternation pair counts over a counting window."""

    def __init__(self, count: np.ndarray, window_us: int):
        cnt = np.array(count, dtype=np.int64, copy=True)
        if cnt.ndim != 2:
            raise BadParam("count must be a 2-D grid")
        if cnt.size and cnt.min() < 0:
            raise BadParam("counts must be non-negative")
        if int(window_us) <= 0:
            raise BadParam("window duration must be positive")
        self.count = _locked(cnt)
        self.window_us = int(window_us)

    @property
    def height(self) -> int:
        return self.count.shape[0]

    @property
    def width(self) -> int:
        return self.count.shape[1]


class GradientMap:
    """Gradient magnitudes (and optionally directions) of a frame."""

    def __init__(self, magnitude: np.ndarray, direction: np.ndarray | None = None):
        mag = np.array(magnitude, dtype=np.float64, copy=True)
        if mag.ndim != 2:
            raise BadParam("magnitude must be a 2-D grid")
        if not np.all(np.isfinite(mag)) or (mag.size and mag.min() < 0):
            raise BadParam("magnitudes must be finite and non-negative")
        self.magnitude = _locked(mag)
        if direction is not None:
            direction = np.array(direction, dtype=np.float64, copy=True)
            if direction.shape != mag.shape:
                raise GeometryMismatch("direction grid must match magnitude grid")
            direction = _locked(direction)
        self.direction = direction

    @property
    def height(self) -> int:
        return self.magnitude.shape[0]

    @property
    def width(self) -> int:
        return self.magnitude.shape[1]


class TubeLabel(IntEnum):
    EMPTY = 0
    TURBULENCE = 1
    TUBE = 2


class TubeFitMap:
    """Per-pixel linear trajectory fits around one anchor time.

    ``base`` is the fitted position at ``t0_us``; ``velocity`` is the slope
    in px/frame (px/ms when the source frame interval is unknown), with the
    raw px/µs slope kept in ``velocity_us`` for event-line evaluation.
    """

    def __init__(
        self,
        base: np.ndarray,
        velocity: np.ndarray,
        velocity_us: np.ndarray,
        residual: np.ndarray,
        support: np.ndarray,
        label: np.ndarray,
        t0_us: int,
        residual_tol: float,
        min_support: int,
        time_scale_us: float,
    ):
        base = np.array(base, dtype=np.float64, copy=True)
        velocity = np.array(velocity, dtype=np.float64, copy=True)
        velocity_us = np.array(velocity_us, dtype=np.float64, copy=True)
        residual = np.array(residual, dtype=np.float64, copy=True)
        support = np.array(support, dtype=np.int64, copy=True)
        label = np.array(label, dtype=np.int8, copy=True)
        shape = residual.shape
        if base.shape != shape + (2,) or velocity.shape != shape + (2,):
            raise GeometryMismatch("base/velocity grids must match residual grid")
        if support.shape != shape or label.shape != shape:
            raise GeometryMismatch("support/label grids must match residual grid")
        empty = label == TubeLabel.EMPTY
        if not np.array_equal(empty, support == 0):
            raise BadParam("label EMPTY must hold exactly where support is 0")
        tube = label == TubeLabel.TUBE
        if np.any(residual[tube] > residual_tol) or np.any(support[tube] < min_support):
            raise BadParam("TUBE labels require residual <= tol and support >= min_support")
        self.base = _locked(base)
        self.velocity = _locked(velocity)
        self.velocity_us = _locked(velocity_us)
        self.residual = _locked(residual)
        self.support = _locked(support)
        self.label = _locked(label)
        self.t0_us = int(t0_us)
        self.residual_tol = float(residual_tol)
        self.min_support = int(min_support)
        self.time_scale_us = float(time_scale_us)

    @property
    def height(self) -> int:
        return self.residual.shape[0]

    @property
    def width(self) -> int:
        return self.residual.shape[1]


def require_same_geometry(a, b, what: str = "inputs") -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise GeometryMismatch(
            f"{what} differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def require_same_length(seq: FrameSequence, field: TurbulenceField) -> None:
    if len(seq) != field.n_frames:
        raise LengthMismatch(f"{len(seq)} frames vs {field.n_frames} field slices")
