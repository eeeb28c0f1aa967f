import numpy as np
import pytest

from evtm.core import Frame, FrameSequence, MotionField
from evtm.epaw import epaw_restore_scene
from evtm.errors import BadSpan, GeometryMismatch
from evtm.ettube import TubeParams
from evtm.evsynth import synthesize_events
from evtm.fixtures import make_bar_fixture, make_scene_fixture, texture_image
from evtm.metrics import psnr
from evtm.restore import RestoreParams, motion_compensate, restore_frame
from evtm.turbsim import inject_object


class TestMotionCompensate:
    @staticmethod
    def _bar_seq(velocity=(2.0, 0.0), n=8):
        bg = Frame(np.full((48, 64), 0.2))
        sprite = Frame(np.full((8, 6), 0.9))
        return inject_object(bg, sprite, np.ones((8, 6)), (10, 20), velocity, n, dt=10)

    def test_zero_velocity_identity(self):
        seq, _, _ = self._bar_seq((0.0, 0.0))
        field = MotionField(np.zeros((48, 64, 2), np.float32), np.ones((48, 64), bool))
        out = motion_compensate(seq, field, t_ref=3)
        for a, b in zip(out.frames, seq.frames):
            assert np.array_equal(a.intensity, b.intensity)

    def test_all_invalid_identity(self):
        seq, _, _ = self._bar_seq()
        field = MotionField(np.zeros((48, 64, 2), np.float32), np.zeros((48, 64), bool))
        out = motion_compensate(seq, field, t_ref=3)
        for a, b in zip(out.frames, seq.frames):
            assert np.array_equal(a.intensity, b.intensity)

    def test_centroids_align_after_compensation(self):
        seq, masks, gt = self._bar_seq((2.0, 0.0))
        t_ref = len(seq) // 2
        out = motion_compensate(seq, gt, t_ref)
        bg = 0.2
        xs = np.arange(64)
        centroids = []
        for frame in out.frames:
            diff = np.abs(frame.intensity - bg)
            centroids.append((diff * xs).sum() / diff.sum())
        assert np.ptp(centroids) <= 0.3

    def test_geometry_mismatch(self):
        seq, _, _ = self._bar_seq()
        field = MotionField(np.zeros((10, 10, 2), np.float32), np.zeros((10, 10), bool))
        with pytest.raises(GeometryMismatch):
            motion_compensate(seq, field, 0)


class TestRestoreFrame:
    def test_static_clean_scene_round_trips(self):
        clean = texture_image(48, 48, seed=1, smooth_px=2.5, lo=0.2, hi=0.8)
        seq = FrameSequence([clean] * 8, t0=0, dt=5000)
        stream = synthesize_events(seq)
        assert len(stream) == 0
        out = restore_frame(seq, stream)
        assert np.abs(out.intensity - clean.intensity).max() <= 1e-6

    def test_no_tube_reduces_to_scene_branch(self):
        fix = make_scene_fixture("static", seed=2, size=48)
        # min_support no pixel can reach forces an all-EMPTY fit map
        params = RestoreParams(tube=TubeParams(min_support=100_000))
        out = restore_frame(fix.turb_seq, fix.stream, params=params)
        scene_only = epaw_restore_scene(fix.turb_seq, fix.stream, params.scene,
                                        np.ones((48, 48), dtype=bool))
        assert np.array_equal(out.intensity, scene_only.intensity)

    def test_span_must_cover_frames(self):
        fix = make_scene_fixture("static", seed=3, size=32)
        short = fix.stream.subset(fix.stream.t < 20_000)
        short = type(short).from_arrays(
            short.width, short.height, short.t, short.x, short.y, short.p,
            t_begin=0, t_end=20_000,
        )
        with pytest.raises(BadSpan):
            restore_frame(fix.turb_seq, short)

    def test_restores_moving_bar_better_than_averaging(self):
        from evtm.epaw import temporal_average

        fix = make_bar_fixture(seed=5, sigma_tilt=1.0)
        clean_ref = fix.clean_seq.frames[-1]
        restored = restore_frame(fix.turb_seq, fix.stream)
        averaged = temporal_average(fix.turb_seq)
        assert psnr(restored, clean_ref) > psnr(averaged, clean_ref)

    def test_deterministic_and_thread_invariant(self):
        fix = make_bar_fixture(seed=6, sigma_tilt=1.0)
        a = restore_frame(fix.turb_seq, fix.stream, threads=1)
        b = restore_frame(fix.turb_seq, fix.stream, threads=3)
        assert np.array_equal(a.intensity, b.intensity)

    def test_output_in_range(self):
        fix = make_bar_fixture(seed=7, sigma_tilt=2.0)
        out = restore_frame(fix.turb_seq, fix.stream)
        assert out.intensity.min() >= 0.0 and out.intensity.max() <= 1.0
