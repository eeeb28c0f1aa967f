import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtm import io as evio
from evtm.core import EventStream, Frame, FrameSequence, MotionField, TurbulenceField
from evtm.errors import BadMagic, BadPolarity, Corrupt, Unsorted


def _stream(events, w=6, h=5, **kw):
    return EventStream(w, h, events, **kw)


class TestEvb1:
    def test_round_trip_bit_exact(self, tmp_path):
        s = _stream([(2, 0, 0, -1), (5, 1, 2, 1), (5, 1, 2, 1)], t_begin=0, t_end=10)
        path = tmp_path / "s.evb"
        evio.write_events(path, s)
        assert evio.read_events(path) == s
        first = path.read_bytes()
        evio.write_events(path, evio.read_events(path))
        assert path.read_bytes() == first

    def test_empty_stream_is_32_bytes(self, tmp_path):
        path = tmp_path / "e.evb"
        evio.write_events(path, _stream([]))
        assert path.stat().st_size == 32

    def test_record_size_is_14_bytes(self, tmp_path):
        path = tmp_path / "r.evb"
        evio.write_events(path, _stream([(1, 2, 3, 1)]))
        assert path.stat().st_size == 32 + 14

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.evb"
        evio.write_events(path, _stream([]))
        data = bytearray(path.read_bytes())
        data[:4] = b"1BVE"
        path.write_bytes(bytes(data))
        with pytest.raises(BadMagic):
            evio.read_events(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.evb"
        evio.write_events(path, _stream([(1, 2, 3, 1)]))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(Corrupt):
            evio.read_events(path)

    def test_unsorted_timestamps_rejected(self, tmp_path):
        path = tmp_path / "u.evb"
        evio.write_events(path, _stream([(1, 2, 3, 1), (9, 0, 0, 1)]))
        data = bytearray(path.read_bytes())
        # swap the two 14-byte records in place
        data[32:46], data[46:60] = data[46:60], data[32:46]
        path.write_bytes(bytes(data))
        with pytest.raises(Unsorted):
            evio.read_events(path)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(
        st.integers(0, 10_000), st.integers(0, 5), st.integers(0, 4),
        st.sampled_from([-1, 1])), max_size=40))
    def test_round_trip_property(self, events):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "s.evb"
            s = _stream(events)
            evio.write_events(path, s)
            assert evio.read_events(path) == s


class TestEventsCsv:
    def test_round_trip(self, tmp_path):
        s = _stream([(5, 1, 2, -1), (7, 0, 0, 1)])
        path = tmp_path / "s.csv"
        evio.write_events_csv(path, s)
        assert evio.read_events_csv(path, 6, 5) == EventStream(6, 5, list(s))

    def test_known_line_parses(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("t,x,y,p\n5,1,2,-1\n")
        s = evio.read_events_csv(path, 6, 5)
        assert list(s)[0] == (5, 1, 2, -1)

    def test_zero_polarity_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x,y,p\n5,1,2,0\n")
        with pytest.raises(BadPolarity):
            evio.read_events_csv(path, 6, 5)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("5,1,2,1\n")
        with pytest.raises(Corrupt):
            evio.read_events_csv(path, 6, 5)


class TestPgm:
    def test_byte_layout_2x2(self, tmp_path):
        path = tmp_path / "t.pgm"
        evio.write_pgm(path, np.array([[0, 64], [128, 255]], dtype=np.uint8))
        data = path.read_bytes()
        header = b"P5\n2 2\n255\n"
        assert data == header + bytes([0, 64, 128, 255])
        assert len(data) == len(header) + 4

    def test_round_trip(self, tmp_path):
        arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
        path = tmp_path / "a.pgm"
        evio.write_pgm(path, arr)
        assert np.array_equal(evio.read_pgm(path), arr)

    def test_pgm16_round_trip_big_endian(self, tmp_path):
        arr = np.array([[0, 1], [256, 65535]], dtype=np.uint16)
        path = tmp_path / "a16.pgm"
        evio.write_pgm16(path, arr)
        data = path.read_bytes()
        assert data.endswith(bytes([0, 0, 0, 1, 1, 0, 255, 255]))
        assert np.array_equal(evio.read_pgm16(path), arr)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00")
        with pytest.raises(BadMagic):
            evio.read_pgm(path)

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x00")
        with pytest.raises(Corrupt):
            evio.read_pgm(path)


class TestFrameDir:
    @staticmethod
    def _seq():
        rng = np.random.default_rng(3)
        frames = [Frame(rng.random((4, 6))) for _ in range(3)]
        return FrameSequence(frames, t0=1000, dt=250)

    def test_round_trip_after_quantization(self, tmp_path):
        seq = self._seq()
        evio.write_frames(tmp_path / "d", seq)
        back = evio.read_frames(tmp_path / "d")
        assert back.t0 == seq.t0 and back.dt == seq.dt and len(back) == len(seq)
        for a, b in zip(seq.frames, back.frames):
            assert np.abs(a.intensity - b.intensity).max() <= 0.5 / 255 + 1e-12
        # a second write/read cycle is exact
        evio.write_frames(tmp_path / "d2", back)
        again = evio.read_frames(tmp_path / "d2")
        for a, b in zip(back.frames, again.frames):
            assert np.array_equal(a.intensity, b.intensity)

    def test_missing_manifest_entry(self, tmp_path):
        evio.write_frames(tmp_path / "d", self._seq())
        manifest = tmp_path / "d" / "manifest.txt"
        lines = manifest.read_text().splitlines()
        manifest.write_text("\n".join(lines[:1] + lines[2:]) + "\n")
        with pytest.raises(Corrupt):
            evio.read_frames(tmp_path / "d")

    def test_missing_frame_file(self, tmp_path):
        evio.write_frames(tmp_path / "d", self._seq())
        (tmp_path / "d" / "000001.pgm").unlink()
        with pytest.raises(Corrupt):
            evio.read_frames(tmp_path / "d")

    def test_nonuniform_timestamps(self, tmp_path):
        evio.write_frames(tmp_path / "d", self._seq())
        manifest = tmp_path / "d" / "manifest.txt"
        text = manifest.read_text().replace("1500", "1501")
        manifest.write_text(text)
        with pytest.raises(Corrupt):
            evio.read_frames(tmp_path / "d")


class TestMotionField:
    @staticmethod
    def _field():
        vel = np.zeros((3, 4, 2), dtype=np.float32)
        valid = np.zeros((3, 4), dtype=bool)
        vel[1, 2] = (0.25, -1.5)
        valid[1, 2] = True
        return MotionField(vel, valid)

    def test_round_trip_bit_exact(self, tmp_path):
        field = self._field()
        path = tmp_path / "m.mf1"
        evio.write_motion_field(path, field)
        back = evio.read_motion_field(path)
        assert np.array_equal(back.velocity, field.velocity)
        assert np.array_equal(back.valid, field.valid)

    def test_all_invalid_round_trip(self, tmp_path):
        field = MotionField(np.zeros((2, 2, 2), dtype=np.float32), np.zeros((2, 2), bool))
        path = tmp_path / "m.mf1"
        evio.write_motion_field(path, field)
        assert not evio.read_motion_field(path).valid.any()

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "m.mf1"
        evio.write_motion_field(path, self._field())
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(Corrupt):
            evio.read_motion_field(path)

    def test_missing_validity_appendix(self, tmp_path):
        path = tmp_path / "m.mf1"
        evio.write_motion_field(path, self._field())
        (tmp_path / "m.mf1.valid.pgm").unlink()
        with pytest.raises(Corrupt):
            evio.read_motion_field(path)


class TestScalarAndTurbulence:
    def test_scalar_round_trip(self, tmp_path):
        arr = np.array([[0.5, -1.25], [3.0, 0.0]])
        path = tmp_path / "s.sf1"
        evio.write_scalar_field(path, arr)
        assert np.array_equal(evio.read_scalar_field(path), arr)

    def test_turbulence_round_trip(self, tmp_path):
        disp = np.zeros((2, 2, 3, 2))
        disp[0, ..., 0] = 0.25   # float32-exact values survive the dump
        disp[1, ..., 0] = -0.25
        field = TurbulenceField(disp)
        path = tmp_path / "t.tf1"
        evio.write_turbulence_field(path, field)
        back = evio.read_turbulence_field(path)
        assert np.array_equal(back.displacement, field.displacement)
