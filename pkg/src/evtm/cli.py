"""Command-line entry point.

Subcommands: simulate, fixture, events, paep, tube, restore, eval.  Every
subcommand accepts ``--config <path>`` (plain ``key = value`` lines, ``#``
comments; explicit flags win) and prints its resolved configuration before
running.  Exit codes: 0 success, 1 usage error, 2 I/O or file-format error,
3 validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as evio
from .core import Frame, MotionField, TubeLabel
from .epaw import SceneRestoreParams
from .errors import BadParam, EvtmError, FormatError
from .evsynth import EvsParams, synthesize_events
from .ettube import TubeParams, fit_event_tubes, project_to_motion_field
from .fixtures import PRESETS, make_bar_fixture, make_scene_fixture
from .metrics import charbonnier, psnr, rmse, ssim
from .paep import count_paep, gradient_map, paep_gradient_correlation
from .restore import RestoreParams, restore_frame
from .turbsim import TurbParams, apply_turbulence, generate_tilt_field


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(message)


def _read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file {path} not found")
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    if not getattr(args, "config", None):
        return
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, val in _read_config(args.config).items():
        if not hasattr(args, key) or key in ("config", "command"):
            raise UsageError(f"unknown config key '{key}'")
        if key not in explicit:
            setattr(args, key, _coerce(val))


def _echo_config(args: argparse.Namespace) -> None:
    print(f"# evtm {args.command} configuration")
    for key in sorted(vars(args)):
        if key in ("func", "command", "config"):
            continue
        print(f"{key} = {getattr(args, key)}")


def build_parser() -> _Parser:
    parser = _Parser(prog="evtm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value config file; flags override")
        return p

    p = add("simulate", "warp a clean sequence through generated turbulence")
    p.add_argument("--clean", required=True, help="input frame directory (PGM + manifest)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sigma-tilt", type=float, default=1.0, help="RMS tilt in px")
    p.add_argument("--corr-len", type=float, default=8.0, help="spatial correlation length in px")
    p.add_argument("--rho-t", type=float, default=0.5, help="temporal AR(1) coefficient in [0,1)")
    p.add_argument("--blur", type=float, default=0.0, help="per-frame Gaussian blur sigma in px")
    p.add_argument("--frames", type=int, default=8, help="number of output frames")
    p.add_argument("--seed", type=int, default=0, help="64-bit turbulence seed")
    p.set_defaults(func=_cmd_simulate)

    p = add("fixture", "write a standard synthetic fixture tree")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", required=True, choices=PRESETS, help="fixture preset")
    p.add_argument("--seed", type=int, default=0, help="64-bit turbulence seed")
    p.add_argument("--sigma-tilt", type=float, default=1.0, help="RMS tilt in px")
    p.add_argument("--frames", type=int, default=8, help="number of frames")
    p.add_argument("--size", type=int, default=128, help="square scene size in px")
    p.add_argument("--threshold", type=float, default=0.25, help="event contrast threshold (log units)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output-invariant)")
    p.set_defaults(func=_cmd_fixture)

    p = add("events", "synthesize an EVB1 event stream from frames")
    p.add_argument("--frames", required=True, help="input frame directory (PGM + manifest)")
    p.add_argument("--out", required=True, help="output .evb file")
    p.add_argument("--threshold", type=float, default=0.25, help="contrast threshold (log units)")
    p.add_argument("--eps", type=float, default=1.0 / 255.0, help="intensity floor before log")
    p.add_argument("--refractory", type=int, default=0, help="per-pixel refractory gap in µs")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output-invariant)")
    p.set_defaults(func=_cmd_events)

    p = add("paep", "polarity-alternation map and gradient correlation")
    p.add_argument("--events", required=True, help="input .evb file")
    p.add_argument("--frame", required=True, help="reference PGM frame for gradients")
    p.add_argument("--window-us", type=int, default=0,
                   help="counting window from stream start in µs (0 = full span)")
    p.add_argument("--max-gap-us", type=int, default=10_000, help="pair gap bound in µs")
    p.add_argument("--border-margin", type=int, default=2, help="border exclusion in px")
    p.add_argument("--out", default="paep.pgm", help="output 16-bit PGM count map")
    p.set_defaults(func=_cmd_paep)

    p = add("tube", "fit per-pixel event tubes and project the motion field")
    p.add_argument("--events", required=True, help="input .evb file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--t0-us", type=int, required=True, help="anchor time in µs")
    p.add_argument("--half-window-us", type=int, default=20_000, help="temporal half-window in µs")
    p.add_argument("--radius", type=int, default=3, help="spatial gather radius in px")
    p.add_argument("--tol", type=float, default=1.0, help="inlier/label tolerance in px")
    p.add_argument("--min-support", type=int, default=6, help="minimum events/inliers per fit")
    p.add_argument("--iters", type=int, default=64, help="RANSAC iterations")
    p.add_argument("--seed", type=int, default=0, help="64-bit RANSAC seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output-invariant)")
    p.set_defaults(func=_cmd_tube)

    p = add("restore", "restore one frame from a degraded sequence plus events")
    p.add_argument("--frames", required=True, help="input frame directory (PGM + manifest)")
    p.add_argument("--events", required=True, help="input .evb file")
    p.add_argument("--out", required=True, help="output PGM frame")
    p.add_argument("--t-ref", type=int, default=-1, help="reference frame index (-1 = last)")
    p.add_argument("--half-window-us", type=int, default=20_000, help="tube half-window in µs")
    p.add_argument("--radius", type=int, default=3, help="tube gather radius in px")
    p.add_argument("--tol", type=float, default=1.0, help="tube inlier tolerance in px")
    p.add_argument("--min-support", type=int, default=20, help="tube minimum support")
    p.add_argument("--iters", type=int, default=64, help="RANSAC iterations")
    p.add_argument("--seed", type=int, default=0, help="64-bit RANSAC seed")
    p.add_argument("--classify-tol", type=float, default=3.0, help="event classification tolerance in px")
    p.add_argument("--dilate-radius", type=int, default=4, help="object mask dilation in px")
    p.add_argument("--beta", type=float, default=1.0, help="EPAW weight strength")
    p.add_argument("--lam", type=float, default=1.0, help="sharpening strength")
    p.add_argument("--unsharp-sigma", type=float, default=1.5, help="unsharp blur sigma in px")
    p.add_argument("--max-gap-us", type=int, default=0, help="PAEP gap bound in µs (0 = 2*dt)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output-invariant)")
    p.set_defaults(func=_cmd_restore)

    p = add("eval", "print psnr/ssim/charbonnier/rmse between two PGM frames")
    p.add_argument("--a", required=True, help="first PGM frame")
    p.add_argument("--b", required=True, help="second PGM frame")
    p.set_defaults(func=_cmd_eval)

    return parser


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    seq = evio.read_frames(args.clean)
    if len(seq) == 1:
        frames = [seq.frames[0]] * args.frames
        seq = type(seq)(frames, t0=seq.t0, dt=seq.dt)
    elif len(seq) >= args.frames:
        seq = type(seq)(seq.frames[: args.frames], t0=seq.t0, dt=seq.dt)
    else:
        raise BadParam(
            f"--frames {args.frames} exceeds the {len(seq)} clean frames available"
        )
    params = TurbParams(
        sigma_tilt=args.sigma_tilt, corr_len=args.corr_len, rho_t=args.rho_t,
        blur_sigma=args.blur, seed=args.seed,
    )
    field = generate_tilt_field(seq.width, seq.height, len(seq), params)
    turb = apply_turbulence(seq, field, args.blur)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evio.write_frames(out / "turb", turb)
    evio.write_turbulence_field(out / "turbulence.tf1", field)
    return 0


def _cmd_fixture(args) -> int:
    evs = EvsParams(threshold=args.threshold)
    if args.preset == "bar":
        fix = make_bar_fixture(args.seed, sigma_tilt=args.sigma_tilt, size=args.size,
                               n_frames=args.frames, evs=evs, threads=args.threads)
        clean_seq, masks, gt_motion = fix.clean_seq, fix.masks, fix.gt_motion
        object_event = fix.gt_object_event
    else:
        fix = make_scene_fixture(args.preset, args.seed, sigma_tilt=args.sigma_tilt,
                                 size=args.size, n_frames=args.frames, evs=evs,
                                 threads=args.threads)
        clean_seq = fix.clean_seq
        masks = np.zeros((args.frames, args.size, args.size), dtype=bool)
        gt_motion = MotionField(
            np.zeros((args.size, args.size, 2), dtype=np.float32),
            np.zeros((args.size, args.size), dtype=bool),
        )
        object_event = np.zeros(len(fix.stream), dtype=bool)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evio.write_frames(out / "clean", clean_seq)
    evio.write_frames(out / "turb", fix.turb_seq)
    evio.write_events(out / "events.evb", fix.stream)
    evio.write_turbulence_field(out / "turbulence.tf1", fix.field)
    masks_dir = out / "masks"
    masks_dir.mkdir(exist_ok=True)
    for k in range(masks.shape[0]):
        evio.write_pgm(masks_dir / f"{k:06d}.pgm", np.where(masks[k], 255, 0).astype(np.uint8))
    evio.write_motion_field(out / "gt_motion.mf1", gt_motion)
    (out / "gt_object.u8").write_bytes(object_event.astype(np.uint8).tobytes())
    # only generation parameters: paths and thread counts must not leak into
    # the tree, reruns have to be byte-identical
    keys = ("preset", "seed", "sigma_tilt", "frames", "size", "threshold")
    lines = [f"{k} = {getattr(args, k)}" for k in keys]
    (out / "params.txt").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_events(args) -> int:
    seq = evio.read_frames(args.frames)
    params = EvsParams(threshold=args.threshold, eps=args.eps, refractory_us=args.refractory)
    stream = synthesize_events(seq, params, threads=args.threads)
    evio.write_events(args.out, stream)
    return 0


def _cmd_paep(args) -> int:
    stream = evio.read_events(args.events)
    frame = Frame(evio.read_pgm(args.frame) / 255.0)
    t_end = stream.t_end if args.window_us <= 0 else stream.t_begin + args.window_us
    pmap = count_paep(stream, stream.t_begin, t_end, args.max_gap_us)
    grad = gradient_map(frame)
    r = paep_gradient_correlation(pmap, grad, args.border_margin)
    peak = max(int(pmap.count.max()), 1)
    scaled = (pmap.count * 65535) // peak
    evio.write_pgm16(args.out, scaled)
    print(f"r={r:.6f}")
    return 0


def _cmd_tube(args) -> int:
    stream = evio.read_events(args.events)
    params = TubeParams(
        half_window_us=args.half_window_us, radius=args.radius, min_support=args.min_support,
        residual_tol=args.tol, ransac_iters=args.iters, seed=args.seed,
    )
    fits = fit_event_tubes(stream, args.t0_us, params, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label_values = np.zeros((fits.height, fits.width), dtype=np.uint8)
    label_values[fits.label == TubeLabel.TURBULENCE] = 128
    label_values[fits.label == TubeLabel.TUBE] = 255
    evio.write_pgm(out / "labels.pgm", label_values)
    evio.write_pgm16(out / "support.pgm", np.minimum(fits.support, 0xFFFF))
    evio.write_scalar_field(out / "residual.sf1", fits.residual)
    evio.write_motion_field(out / "motion.mf1", project_to_motion_field(fits))
    return 0


def _cmd_restore(args) -> int:
    seq = evio.read_frames(args.frames)
    stream = evio.read_events(args.events)
    t_ref = len(seq) - 1 if args.t_ref < 0 else args.t_ref
    params = RestoreParams(
        tube=TubeParams(
            half_window_us=args.half_window_us, radius=args.radius,
            min_support=args.min_support, residual_tol=args.tol,
            ransac_iters=args.iters, seed=args.seed,
        ),
        scene=SceneRestoreParams(
            beta=args.beta, lam=args.lam, unsharp_sigma=args.unsharp_sigma,
            max_gap_us=args.max_gap_us if args.max_gap_us > 0 else None,
        ),
        classify_tol=args.classify_tol,
        dilate_radius=args.dilate_radius,
    )
    restored = restore_frame(seq, stream, t_ref, params, threads=args.threads)
    evio.write_pgm(args.out, evio.quantize_frame(restored))
    return 0


def _fmt(value: float) -> str:
    return "inf" if np.isinf(value) else f"{value:.6f}"


def _cmd_eval(args) -> int:
    a = evio.frame_from_u8(evio.read_pgm(args.a))
    b = evio.frame_from_u8(evio.read_pgm(args.b))
    print(
        f"psnr={_fmt(psnr(a, b))} ssim={_fmt(ssim(a, b))} "
        f"charbonnier={_fmt(charbonnier(a, b))} rmse={_fmt(rmse(a, b))}"
    )
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, argv)
        _echo_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except EvtmError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
