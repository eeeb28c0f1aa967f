"""Synthetic turbulence: zero-mean tilt fields, warping, and moving objects.

The degradation model is spatially correlated Gaussian tilt plus an optional
uniform per-frame blur.  Tilts evolve as a stationary AR(1) process in time
(short coherence), are rescaled to a target RMS magnitude, and have their
per-pixel temporal mean subtracted so averaging many warped frames converges
toward the clean image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (
    Frame,
    FrameSequence,
    MotionField,
    TurbulenceField,
    require_same_geometry,
    require_same_length,
)
from .errors import BadParam, GeometryMismatch, TrajectoryOutOfBounds


@dataclass(frozen=True)
class TurbParams:
    """Tilt-field generator knobs.

    sigma_tilt: RMS tilt magnitude in px.
    corr_len:   spatial Gaussian correlation length in px.
    rho_t:      AR(1) coefficient in [0, 1); higher = longer coherence time.
    blur_sigma: per-frame Gaussian blur sigma in px (0 disables).
    seed:       64-bit seed; identical seeds give bit-identical fields.
    """

    sigma_tilt: float = 1.0
    corr_len: float = 8.0
    rho_t: float = 0.5
    blur_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_tilt < 0:
            raise BadParam(f"sigma_tilt must be >= 0, got {self.sigma_tilt}")
        if self.corr_len <= 0:
            raise BadParam(f"corr_len must be > 0, got {self.corr_len}")
        if not 0.0 <= self.rho_t < 1.0:
            raise BadParam(f"rho_t must lie in [0, 1), got {self.rho_t}")
        if self.blur_sigma < 0:
            raise BadParam(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        if not 0 <= int(self.seed) < 2**64:
            raise BadParam("seed must fit in 64 unsigned bits")


def generate_tilt_field(width: int, height: int, n_frames: int, params: TurbParams) -> TurbulenceField:
    """Draw a zero-mean, spatially and temporally correlated tilt field.

    Per frame: i.i.d. Gaussian white noise per pixel and component, smoothed
    with a Gaussian of std ``corr_len``, evolved as stationary AR(1) with
    coefficient ``rho_t``, rescaled so the global RMS tilt magnitude equals
    ``sigma_tilt``, then per-pixel temporal means are subtracted.
    """
    if n_frames < 2:
        raise BadParam(f"need at least 2 frames, got {n_frames}")
    if width < 1 or height < 1:
        raise BadParam("field geometry must be positive")
    if params.sigma_tilt == 0.0:
        return TurbulenceField(np.zeros((n_frames, height, width, 2)))
    rng = np.random.default_rng(params.seed)
    noise = rng.standard_normal((n_frames, height, width, 2))
    smooth = ndimage.gaussian_filter(
        noise, sigma=(0.0, params.corr_len, params.corr_len, 0.0), mode="reflect"
    )
    field = np.empty_like(smooth)
    field[0] = smooth[0]
    gain = np.sqrt(1.0 - params.rho_t**2)
    for k in range(1, n_frames):
        field[k] = params.rho_t * field[k - 1] + gain * smooth[k]
    rms = np.sqrt(np.mean(field[..., 0] ** 2 + field[..., 1] ** 2))
    if rms > 0:
        field *= params.sigma_tilt / rms
    field -= field.mean(axis=0, keepdims=True)
    return TurbulenceField(field)


def warp_bilinear(image: np.ndarray, dx, dy) -> np.ndarray:
    """Sample ``image`` at (x - dx, y - dy) bilinearly, clamping to the border."""
    h, w = image.shape
    xs = np.clip(np.arange(w, dtype=np.float64)[None, :] - dx, 0.0, w - 1.0)
    ys = np.clip(np.arange(h, dtype=np.float64)[:, None] - dy, 0.0, h - 1.0)
    xs, ys = np.broadcast_arrays(xs, ys)
    x0 = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    return (
        image[y0, x0] * (1.0 - fy) * (1.0 - fx)
        + image[y0, x1] * (1.0 - fy) * fx
        + image[y1, x0] * fy * (1.0 - fx)
        + image[y1, x1] * fy * fx
    )


def warp_frame(frame: Frame, tilt: np.ndarray) -> Frame:
    """Warp one frame through one (height, width, 2) tilt slice."""
    tilt = np.asarray(tilt, dtype=np.float64)
    if tilt.shape != (frame.height, frame.width, 2):
        raise GeometryMismatch(
            f"tilt slice {tilt.shape} does not match frame {frame.width}x{frame.height}"
        )
    out = warp_bilinear(frame.intensity, tilt[..., 0], tilt[..., 1])
    return Frame(np.clip(out, 0.0, 1.0))


def apply_turbulence(seq: FrameSequence, field: TurbulenceField, blur_sigma: float = 0.0) -> FrameSequence:
    """Warp each frame through its field slice, then blur (if blur_sigma > 0)."""
    require_same_geometry(seq, field, "sequence and field")
    require_same_length(seq, field)
    if blur_sigma < 0:
        raise BadParam("blur_sigma must be >= 0")
    frames = []
    for k, frame in enumerate(seq.frames):
        out = warp_frame(frame, field.displacement[k]).intensity
        if blur_sigma > 0:
            out = np.clip(ndimage.gaussian_filter(out, blur_sigma, mode="nearest"), 0.0, 1.0)
        frames.append(Frame(out))
    return FrameSequence(frames, t0=seq.t0, dt=seq.dt)


def _splat_shifted(patch: np.ndarray, fy: float, fx: float) -> np.ndarray:
    """Forward bilinear splat of ``patch`` shifted by a sub-pixel (fy, fx) in [0, 1)."""
    hs, ws = patch.shape
    out = np.zeros((hs + 1, ws + 1))
    out[:hs, :ws] += (1.0 - fy) * (1.0 - fx) * patch
    out[:hs, 1:] += (1.0 - fy) * fx * patch
    out[1:, :ws] += fy * (1.0 - fx) * patch
    out[1:, 1:] += fy * fx * patch
    return out


def inject_object(
    background: Frame,
    sprite: Frame,
    alpha: np.ndarray,
    start_pos: tuple[float, float],
    velocity: tuple[float, float],
    n_frames: int,
    dt: int,
    t0: int = 0,
):
    """Composite a moving sprite over a static background.

    The sprite (with its [0, 1] alpha mask) is placed at
    ``start_pos + k * velocity`` (x, y in px, velocity in px/frame) with
    bilinear sub-pixel splatting in frame k.

    Returns (sequence, per-frame boolean object masks, ground-truth
    MotionField valid on the union of the masks).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != sprite.intensity.shape:
        raise GeometryMismatch("alpha mask must match sprite geometry")
    if alpha.min() < 0 or alpha.max() > 1:
        raise BadParam("alpha values must lie in [0, 1]")
    if n_frames < 1:
        raise BadParam("n_frames must be >= 1")
    bg = background.intensity
    h, w = bg.shape
    hs, ws = sprite.intensity.shape
    sx, sy = float(start_pos[0]), float(start_pos[1])
    vx, vy = float(velocity[0]), float(velocity[1])
    for k in (0, n_frames - 1):  # linear trajectory: endpoints bound the path
        px, py = sx + k * vx, sy + k * vy
        if px < 0 or py < 0 or px + ws > w or py + hs > h:
            raise TrajectoryOutOfBounds(
                f"sprite at ({px:.2f}, {py:.2f}) in frame {k} leaves the {w}x{h} background"
            )
    premult = sprite.intensity * alpha
    frames = []
    masks = np.zeros((n_frames, h, w), dtype=bool)
    for k in range(n_frames):
        px, py = sx + k * vx, sy + k * vy
        bx, by = int(np.floor(px)), int(np.floor(py))
        fx, fy = px - bx, py - by
        a_sh = _splat_shifted(alpha, fy, fx)
        s_sh = _splat_shifted(premult, fy, fx)
        canvas = bg.copy()
        region = canvas[by:by + hs + 1, bx:bx + ws + 1]
        ah, aw = region.shape
        region *= 1.0 - a_sh[:ah, :aw]
        region += s_sh[:ah, :aw]
        masks[k, by:by + hs + 1, bx:bx + ws + 1] = a_sh[:ah, :aw] >= 0.5
        frames.append(Frame(np.clip(canvas, 0.0, 1.0)))
    union = masks.any(axis=0)
    vel = np.zeros((h, w, 2), dtype=np.float32)
    vel[union] = (vx, vy)
    gt = MotionField(vel, union)
    return FrameSequence(frames, t0=t0, dt=dt), masks, gt
