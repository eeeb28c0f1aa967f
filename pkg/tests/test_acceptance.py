"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and measured margins.  Every tolerance is pinned here; the fixture
presets and analysis profiles are part of the reproducibility contract.
"""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from evtm import io as evio
from evtm.cli import main as cli_main
from evtm.core import Frame, FrameSequence, TubeLabel
from evtm.epaw import SceneRestoreParams, epaw_restore_scene, temporal_average
from evtm.ettube import TubeParams, classify_events, fit_event_tubes
from evtm.evsynth import EvsParams, synthesize_events
from evtm.fixtures import make_bar_fixture, make_scene_fixture, texture_image
from evtm.metrics import charbonnier, psnr, rmse, ssim
from evtm.paep import count_paep, gradient_map, paep_gradient_correlation
from evtm.restore import RestoreParams, restore_frame
from evtm.turbsim import TurbParams, apply_turbulence, generate_tilt_field

FRAMES = 8            # few-frame contract: criteria 6 and 7 run on exactly 8 frames
DT_US = 5000
SIZE = 128

# analysis profiles, calibrated once on the presets and then frozen
TUBE_CLEAN = TubeParams(half_window_us=17_500, radius=4, min_support=15,
                        residual_tol=0.1, ransac_iters=128, seed=0)
TUBE_TURB = TubeParams(half_window_us=17_500, radius=3, min_support=20,
                       residual_tol=1.0, ransac_iters=64, seed=0)
CLASSIFY_TOL = 3.0
SCENE_EVS = EvsParams(threshold=0.1)
SCENE_PARAMS = SceneRestoreParams(beta=1.0, lam=1.0, unsharp_sigma=1.5)
PAEP_EVS = EvsParams(threshold=0.04)
PAEP_FRAMES = 32

BAR_GT_VELOCITY = np.array([1.0, 0.0])


def _report(name: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    print(line)
    assert ok, line
    assert elapsed < budget, f"{name} exceeded its runtime budget: {line}"


@pytest.fixture(scope="module")
def bar_turb_fixtures():
    return [make_bar_fixture(seed=s, sigma_tilt=1.0, n_frames=FRAMES) for s in range(5)]


def _dense_oracle_events(values, t0, dt, threshold, eps):
    """Dense 1 µs stepping of the interpolated log signal (vectorized over
    pixels); discovers crossing timestamps by scanning, never by solving."""
    n_frames, h, w = values.shape
    log_v = np.log(values + eps).reshape(n_frames, -1)
    ref = log_v[0].copy()
    out_t, out_pix, out_p = [], [], []
    t_end = t0 + (n_frames - 1) * dt
    for t in range(t0, t_end + 1):
        k = min((t - t0) // dt, n_frames - 2)
        frac = (t - (t0 + k * dt)) / dt
        s = log_v[k] * (1.0 - frac) + log_v[k + 1] * frac
        for sign in (1.0, -1.0):
            n = np.floor(sign * (s - ref) / threshold + 1e-9).astype(np.int64)
            np.maximum(n, 0, out=n)
            total = int(n.sum())
            if total:
                pix = np.repeat(np.nonzero(n)[0], n[n > 0])
                out_t.append(np.full(total, t, dtype=np.int64))
                out_pix.append(pix)
                out_p.append(np.full(total, int(sign), dtype=np.int64))
                ref = ref + sign * threshold * n
    if not out_t:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_t), np.concatenate(out_pix), np.concatenate(out_p)


def test_c01_event_synthesis_matches_dense_oracle():
    """100 random 8x8 4-frame sequences: same events as 1 µs brute force."""
    start = time.time()
    rng = np.random.default_rng(20_240_101)
    params = EvsParams(threshold=0.3, eps=1 / 255)
    dt = 250
    checked = 0
    for _ in range(100):
        values = rng.random((4, 8, 8))
        seq = FrameSequence([Frame(v) for v in values], t0=0, dt=dt)
        stream = synthesize_events(seq, params)
        ot, opix, op = _dense_oracle_events(values, 0, dt, params.threshold, params.eps)
        spix = stream.y.astype(np.int64) * 8 + stream.x
        for pix in range(64):
            got = np.nonzero(spix == pix)[0]
            want = np.nonzero(opix == pix)[0]
            assert len(got) == len(want), f"pixel {pix}: count mismatch"
            assert np.array_equal(stream.p[got], op[want]), f"pixel {pix}: polarity mismatch"
            assert np.all(np.abs(stream.t[got] - ot[want]) <= 1), f"pixel {pix}: timestamps"
            checked += len(got)
    _report("C1 event-synthesis oracle", True,
            f"100 sequences, {checked} events matched within 1 µs", time.time() - start, 10)


def test_c02_zero_mean_convergence_ladder():
    """Averaging error strictly decreases over N in {4,16,64}; 64-frame error
    is at most half the 4-frame error (mean over 10 seeds)."""
    start = time.time()
    clean = texture_image(SIZE, SIZE, seed=202, smooth_px=2.5, lo=0.15, hi=0.95)
    ladders = []
    for seed in range(10):
        field = generate_tilt_field(SIZE, SIZE, 64, TurbParams(sigma_tilt=1.0, seed=seed))
        warped = apply_turbulence(FrameSequence([clean] * 64, dt=DT_US), field)
        ladders.append([
            rmse(temporal_average(FrameSequence(warped.frames[:n], dt=DT_US)), clean)
            for n in (4, 16, 64)
        ])
    means = np.array(ladders).mean(axis=0)
    ok = means[0] > means[1] > means[2] and means[2] <= 0.5 * means[0]
    _report("C2 zero-mean convergence", ok,
            f"mean RMSE(4,16,64) = {means.round(5).tolist()}, "
            f"ratio 64/4 = {means[2] / means[0]:.3f} (<= 0.5)", time.time() - start, 60)


def test_c03_paep_gradient_correlation():
    """Pipeline correlation r >= 0.5 for every tilt level, 5 seeds each."""
    start = time.time()
    worst = 1.0
    for sigma in (0.5, 1.0, 2.0):
        for seed in range(5):
            fix = make_scene_fixture("textured", seed, sigma_tilt=sigma,
                                     n_frames=PAEP_FRAMES, evs=PAEP_EVS)
            pmap = count_paep(fix.stream, fix.stream.t_begin, fix.stream.t_end, 2 * DT_US)
            r = paep_gradient_correlation(pmap, gradient_map(fix.clean), border_margin=2)
            worst = min(worst, r)
            assert r >= 0.5, f"sigma={sigma} seed={seed}: r={r:.3f} < 0.5"
    _report("C3 PAEP correlation", True,
            f"min Pearson r = {worst:.3f} over sigma in (0.5, 1.0, 2.0) x 5 seeds",
            time.time() - start, 60)


def test_c04_tube_reducibility_clean_bar():
    """Turbulence-free bar: residual <= 0.1 px on >= 95% and velocity error
    <= 0.2 px/frame on >= 90% of TUBE pixels."""
    start = time.time()
    fix = make_bar_fixture(seed=0, sigma_tilt=0.0, n_frames=FRAMES)
    fits = fit_event_tubes(fix.stream, 17_500, TUBE_CLEAN, dt_us=DT_US)
    tube = fits.label == TubeLabel.TUBE
    n = int(tube.sum())
    resid_frac = float((fits.residual[tube] <= 0.1).mean())
    verr = np.linalg.norm(fits.velocity[tube] - BAR_GT_VELOCITY, axis=1)
    vel_frac = float((verr <= 0.2).mean())
    ok = n > 100 and resid_frac >= 0.95 and vel_frac >= 0.90
    _report("C4 tube reducibility", ok,
            f"{n} TUBE px, residual<=0.1 on {resid_frac:.1%}, "
            f"velocity err<=0.2 on {vel_frac:.1%}", time.time() - start, 30)


def test_c05_tube_turbulence_separation(bar_turb_fixtures):
    """Event classification precision and recall >= 0.9 against
    construction-time labels, 5 seeds."""
    start = time.time()
    worst_p, worst_r = 1.0, 1.0
    for seed, fix in enumerate(bar_turb_fixtures):
        fits = fit_event_tubes(fix.stream, 17_500, TUBE_TURB, dt_us=DT_US)
        pred = classify_events(fix.stream, fits, tol=CLASSIFY_TOL) == TubeLabel.TUBE
        gt = fix.gt_object_event
        tp = int((pred & gt).sum())
        prec = tp / max(int(pred.sum()), 1)
        rec = tp / max(int(gt.sum()), 1)
        worst_p, worst_r = min(worst_p, prec), min(worst_r, rec)
        assert prec >= 0.9 and rec >= 0.9, f"seed {seed}: prec={prec:.3f} rec={rec:.3f}"
    _report("C5 tube/turbulence separation", True,
            f"min precision {worst_p:.3f}, min recall {worst_r:.3f} over 5 seeds",
            time.time() - start, 60)


def test_c06_epaw_improvement():
    """Scene ensemble (10 seeds, 8 frames): EPAW restoration beats plain
    averaging on PSNR and does not worsen edge-band gradient RMSE."""
    start = time.time()
    d_psnr, g_plain, g_epaw = [], [], []
    for seed in range(10):
        fix = make_scene_fixture("static", seed, sigma_tilt=1.0, n_frames=FRAMES,
                                 evs=SCENE_EVS)
        assert len(fix.turb_seq) == FRAMES
        avg = temporal_average(fix.turb_seq)
        ep = epaw_restore_scene(fix.turb_seq, fix.stream, SCENE_PARAMS)
        d_psnr.append(psnr(ep, fix.clean) - psnr(avg, fix.clean))
        gclean = gradient_map(fix.clean).magnitude
        band = gclean >= np.percentile(gclean, 80)
        g_plain.append(float(np.sqrt(np.mean((gradient_map(avg).magnitude[band] - gclean[band]) ** 2))))
        g_epaw.append(float(np.sqrt(np.mean((gradient_map(ep).magnitude[band] - gclean[band]) ** 2))))
    mean_gain = float(np.mean(d_psnr))
    ok = mean_gain >= 0.0 and np.mean(g_epaw) <= np.mean(g_plain)
    _report("C6 EPAW improvement", ok,
            f"mean PSNR gain {mean_gain:+.3f} dB, edge-grad RMSE "
            f"{np.mean(g_plain):.4f} -> {np.mean(g_epaw):.4f}", time.time() - start, 60)


def test_c07_dynamic_object_restoration(bar_turb_fixtures):
    """Bar + turbulence, 8 frames: full restoration beats plain temporal
    averaging by >= 1 dB PSNR on every seed."""
    start = time.time()
    params = RestoreParams(tube=TUBE_TURB, scene=SceneRestoreParams(),
                           classify_tol=CLASSIFY_TOL, dilate_radius=4)
    worst = math.inf
    for seed, fix in enumerate(bar_turb_fixtures):
        assert len(fix.turb_seq) == FRAMES
        clean_ref = fix.clean_seq.frames[-1]
        gain = psnr(restore_frame(fix.turb_seq, fix.stream, params=params), clean_ref) \
            - psnr(temporal_average(fix.turb_seq), clean_ref)
        worst = min(worst, gain)
        assert gain >= 1.0, f"seed {seed}: gain {gain:.2f} dB < 1 dB"
    _report("C7 dynamic-object restoration", True,
            f"min PSNR gain {worst:+.2f} dB over 5 seeds", time.time() - start, 60)


def test_c08_few_frame_contract(bar_turb_fixtures):
    """Criteria 6 and 7 operate on exactly 8 input frames."""
    start = time.time()
    scene = make_scene_fixture("static", 0, sigma_tilt=1.0, n_frames=FRAMES, evs=SCENE_EVS)
    ok = len(scene.turb_seq) == 8 and all(len(f.turb_seq) == 8 for f in bar_turb_fixtures)
    _report("C8 few-frame contract", ok, "criteria 6-7 fixtures hold exactly 8 frames",
            time.time() - start, 5)


def test_c09_determinism_and_formats(tmp_path, capsys):
    """CLI reruns are byte-identical, --threads changes nothing, and the
    binary formats round-trip exactly."""
    start = time.time()

    def tree(root: Path) -> dict:
        return {p.relative_to(root).as_posix(): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file()}

    fix_args = ["fixture", "--preset", "bar", "--seed", "7", "--size", "64", "--frames", "4"]
    assert cli_main(fix_args + ["--out", str(tmp_path / "f1")]) == 0
    assert cli_main(fix_args + ["--out", str(tmp_path / "f2"), "--threads", "4"]) == 0
    t1, t2 = tree(tmp_path / "f1"), tree(tmp_path / "f2")
    assert t1.keys() == t2.keys() and all(t1[k] == t2[k] for k in t1)

    events = tmp_path / "f1" / "events.evb"
    ev_args = ["events", "--frames", str(tmp_path / "f1" / "turb")]
    assert cli_main(ev_args + ["--out", str(tmp_path / "a.evb")]) == 0
    assert cli_main(ev_args + ["--out", str(tmp_path / "b.evb"), "--threads", "3"]) == 0
    assert filecmp.cmp(tmp_path / "a.evb", tmp_path / "b.evb", shallow=False)

    tube_args = ["tube", "--events", str(events), "--t0-us", "7500",
                 "--half-window-us", "7500", "--seed", "3"]
    assert cli_main(tube_args + ["--out", str(tmp_path / "tube1")]) == 0
    assert cli_main(tube_args + ["--out", str(tmp_path / "tube2"), "--threads", "4"]) == 0
    u1, u2 = tree(tmp_path / "tube1"), tree(tmp_path / "tube2")
    assert u1.keys() == u2.keys() and all(u1[k] == u2[k] for k in u1)

    res_args = ["restore", "--frames", str(tmp_path / "f1" / "turb"),
                "--events", str(events)]
    assert cli_main(res_args + ["--out", str(tmp_path / "r1.pgm")]) == 0
    assert cli_main(res_args + ["--out", str(tmp_path / "r2.pgm"), "--threads", "2"]) == 0
    assert filecmp.cmp(tmp_path / "r1.pgm", tmp_path / "r2.pgm", shallow=False)

    sim_args = ["simulate", "--clean", str(tmp_path / "f1" / "clean"),
                "--frames", "4", "--seed", "5"]
    assert cli_main(sim_args + ["--out", str(tmp_path / "s1")]) == 0
    assert cli_main(sim_args + ["--out", str(tmp_path / "s2")]) == 0
    s1, s2 = tree(tmp_path / "s1"), tree(tmp_path / "s2")
    assert s1.keys() == s2.keys() and all(s1[k] == s2[k] for k in s1)

    # format round-trips are exact
    stream = evio.read_events(events)
    evio.write_events(tmp_path / "rt.evb", stream)
    assert evio.read_events(tmp_path / "rt.evb") == stream
    assert (tmp_path / "rt.evb").read_bytes() == events.read_bytes()
    arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
    evio.write_pgm(tmp_path / "rt.pgm", arr)
    assert np.array_equal(evio.read_pgm(tmp_path / "rt.pgm"), arr)
    field = evio.read_motion_field(tmp_path / "tube1" / "motion.mf1")
    evio.write_motion_field(tmp_path / "rt.mf1", field)
    back = evio.read_motion_field(tmp_path / "rt.mf1")
    assert np.array_equal(back.velocity, field.velocity)
    assert np.array_equal(back.valid, field.valid)

    _report("C9 determinism & formats", True,
            "fixture/events/tube/restore/simulate reruns byte-identical; "
            "EVB1/PGM/MF1 round-trips exact", time.time() - start, 30)


def test_c10_metric_oracles():
    """Closed-form metric examples to 1e-9 relative."""
    start = time.time()
    base = Frame(np.full((8, 8), 0.5))
    off1 = Frame(np.full((8, 8), 0.6))
    off2 = Frame(np.full((8, 8), 0.51))
    assert math.isinf(psnr(base, base))
    assert abs(psnr(base, off1) - 20.0) <= 20.0 * 1e-9
    assert abs(psnr(base, off2) - 40.0) <= 40.0 * 1e-9
    tex = texture_image(16, 16, seed=9, smooth_px=1.0, lo=0.2, hi=0.8)
    assert abs(ssim(tex, tex) - 1.0) <= 1e-9
    expected = math.sqrt(0.01 + 1e-6)
    got = charbonnier(base, off1, epsilon=1e-3)
    assert abs(got - expected) <= expected * 1e-9
    assert abs(charbonnier(base, base, epsilon=1e-3) - 1e-3) <= 1e-3 * 1e-9
    assert abs(rmse(base, off1) - 0.1) <= 0.1 * 1e-9
    _report("C10 metric oracles", True, "psnr/ssim/charbonnier/rmse closed forms at 1e-9",
            time.time() - start, 5)
