"""Standard synthetic fixtures for tests and the ``fixture`` CLI subcommand.

Three presets share one recipe (texture -> optional moving bar -> turbulence
-> events):

* ``static``   -- moderately textured static scene; the scene-restoration
  ensemble fixture.
* ``textured`` -- stronger fine texture; drives the PAEP-correlation and
  averaging-convergence properties.
* ``bar``      -- a bright bar sliding 1 px/frame through a smooth corridor
  between mildly textured bands, with construction-time object masks,
  ground-truth motion and per-event object labels.

Texture images are generated from preset-fixed seeds so a seed ensemble
varies only the turbulence draw, never the scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import EventStream, Frame, FrameSequence, MotionField, TurbulenceField
from .errors import BadParam
from .evsynth import EvsParams, synthesize_events
from .turbsim import TurbParams, apply_turbulence, generate_tilt_field, inject_object

PRESETS = ("static", "bar", "textured")

_TEXTURE_SEED = {"static": 101, "textured": 202, "bar": 303}
_SMOOTH_PX = {"static": 3.0, "textured": 2.5}
_SPAN = {"static": (0.15, 0.85), "textured": (0.15, 0.95)}

DEFAULT_SIZE = 128
DEFAULT_FRAMES = 8
DEFAULT_DT_US = 5000

BAR_SIZE = (8, 14)            # width, height in px
BAR_INTENSITY = 0.98          # high contrast: many threshold levels per edge
BAR_VELOCITY = (1.0, 0.0)     # px/frame; integer steps keep arrival edges sharp
CORRIDOR_LEVEL = 0.04
CORRIDOR_MARGIN = 10          # flat rows above/below the bar's sweep
CORRIDOR_RAMP = 18            # band texture fades in over this many rows
BAND_LO, BAND_HI = 0.15, 0.55
BAND_SMOOTH_PX = 2.5


def _bar_geometry(size: int, n_frames: int):
    """Bar start position and corridor rows for a square scene."""
    bw, bh = BAR_SIZE
    travel = int(BAR_VELOCITY[0] * (n_frames - 1)) + 1
    if size < bw + travel + 8 or size < bh + 2 * CORRIDOR_MARGIN:
        raise BadParam(f"scene size {size} too small for the bar preset")
    y0 = (size - bh) // 2
    x0 = (size - bw - travel) * 5 // 8
    corridor = (y0 - CORRIDOR_MARGIN, y0 + bh + CORRIDOR_MARGIN)
    return (float(x0), float(y0)), corridor


def texture_image(width: int, height: int, seed: int, smooth_px: float,
                  lo: float, hi: float) -> Frame:
    """Gaussian-smoothed white noise stretched to [lo, hi]."""
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.standard_normal((height, width)), smooth_px,
                                    mode="reflect")
    span = noise.max() - noise.min()
    if span == 0:
        return Frame(np.full((height, width), (lo + hi) / 2.0))
    return Frame(lo + (hi - lo) * (noise - noise.min()) / span)


@dataclass(frozen=True)
class SceneFixture:
    clean: Frame
    clean_seq: FrameSequence
    field: TurbulenceField
    turb_seq: FrameSequence
    stream: EventStream


@dataclass(frozen=True)
class BarFixture:
    clean_seq: FrameSequence
    field: TurbulenceField
    turb_seq: FrameSequence
    stream: EventStream
    masks: np.ndarray              # (n_frames, h, w) object support per frame
    gt_motion: MotionField
    gt_object_event: np.ndarray    # per-event bool, True = object-generated


def _turb_params(sigma_tilt: float, seed: int) -> TurbParams:
    return TurbParams(sigma_tilt=sigma_tilt, corr_len=8.0, rho_t=0.5, seed=seed)


def make_scene_fixture(
    preset: str,
    seed: int,
    sigma_tilt: float = 1.0,
    size: int = DEFAULT_SIZE,
    n_frames: int = DEFAULT_FRAMES,
    dt_us: int = DEFAULT_DT_US,
    evs: EvsParams = EvsParams(),
    threads: int = 1,
) -> SceneFixture:
    """Static scene under turbulence plus its synthesized events."""
    if preset not in ("static", "textured"):
        raise BadParam(f"scene preset must be 'static' or 'textured', got {preset!r}")
    clean = texture_image(size, size, _TEXTURE_SEED[preset], _SMOOTH_PX[preset],
                          *_SPAN[preset])
    clean_seq = FrameSequence([clean] * n_frames, t0=0, dt=dt_us)
    field = generate_tilt_field(size, size, n_frames, _turb_params(sigma_tilt, seed))
    turb_seq = apply_turbulence(clean_seq, field)
    stream = synthesize_events(turb_seq, evs, threads=threads)
    return SceneFixture(clean, clean_seq, field, turb_seq, stream)


def _bar_background(size: int, corridor: tuple[int, int]) -> Frame:
    """Textured bands blended into a dark flat corridor over a wide ramp.

    The gentle transition keeps the corridor boundary itself nearly silent
    under tilt (a hard cut next to a dark strip fires on every frame in log
    space); turbulence clutter comes from the band texture instead."""
    bands = texture_image(size, size, _TEXTURE_SEED["bar"], BAND_SMOOTH_PX,
                          BAND_LO, BAND_HI)
    rows = np.arange(size, dtype=np.float64)
    up = np.clip((corridor[0] - rows) / CORRIDOR_RAMP, 0.0, 1.0)
    down = np.clip((rows - corridor[1] + 1) / CORRIDOR_RAMP, 0.0, 1.0)
    envelope = np.maximum(up, down)  # 1 in the bands, 0 inside the corridor
    envelope = (3.0 - 2.0 * envelope) * envelope * envelope  # smoothstep
    bg = CORRIDOR_LEVEL + envelope[:, None] * (bands.intensity - CORRIDOR_LEVEL)
    return Frame(bg)


def make_bar_fixture(
    seed: int,
    sigma_tilt: float = 1.0,
    size: int = DEFAULT_SIZE,
    n_frames: int = DEFAULT_FRAMES,
    dt_us: int = DEFAULT_DT_US,
    evs: EvsParams = EvsParams(),
    threads: int = 1,
) -> BarFixture:
    """Moving-bar scene: object events plus (optionally) turbulence events."""
    bw, bh = BAR_SIZE
    sprite = Frame(np.full((bh, bw), BAR_INTENSITY))
    alpha = np.ones((bh, bw))
    start, corridor = _bar_geometry(size, n_frames)
    background = _bar_background(size, corridor)
    clean_seq, masks, gt_motion = inject_object(
        background, sprite, alpha, start, BAR_VELOCITY, n_frames, dt_us
    )
    if sigma_tilt > 0:
        field = generate_tilt_field(size, size, n_frames, _turb_params(sigma_tilt, seed))
        turb_seq = apply_turbulence(clean_seq, field)
    else:
        field = TurbulenceField(np.zeros((n_frames, size, size, 2)))
        turb_seq = clean_seq
    stream = synthesize_events(turb_seq, evs, threads=threads)
    gt_object_event = label_object_events(stream, masks, dt_us, sigma_tilt)
    return BarFixture(clean_seq, field, turb_seq, stream, masks, gt_motion, gt_object_event)


def label_object_events(stream: EventStream, masks: np.ndarray, dt_us: int,
                        sigma_tilt: float) -> np.ndarray:
    """Construction-time event labels by the swept-mask rule.

    An event is object-generated iff its pixel falls inside the object
    support of the two frames bracketing its timestamp, dilated enough to
    absorb the tilt displacement of the edges."""
    n_frames = masks.shape[0]
    pad = 1 + int(np.ceil(3.0 * sigma_tilt))
    size = 2 * pad + 1
    structure = np.ones((size, size), dtype=bool)
    swept = np.zeros((n_frames - 1,) + masks.shape[1:], dtype=bool)
    for k in range(n_frames - 1):
        swept[k] = ndimage.binary_dilation(masks[k] | masks[k + 1], structure=structure)
    k = np.clip((stream.t - stream.t_begin) // dt_us, 0, n_frames - 2).astype(np.int64)
    return swept[k, stream.y.astype(np.int64), stream.x.astype(np.int64)]
