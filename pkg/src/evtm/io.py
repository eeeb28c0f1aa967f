"""File formats: EVB1/CSV event streams, PGM frames + manifest, MF1 motion fields.

All multi-byte binary values are little-endian except 16-bit PGM samples,
which are big-endian per the Netpbm convention.  Every writer/reader pair
round-trips exactly; frames are quantized to 8 bits once at write time.

EVB1 layout: magic ``EVB1`` | u16 width | u16 height | u64 t_begin |
u64 t_end | u64 count | count * {u64 t, u16 x, u16 y, i8 p, u8 pad} with
14 bytes per record.

MF1 layout: one text line ``MF1 <width> <height>`` followed by row-major
float32 (vx, vy) pairs; the validity mask lives in a companion
``<path>.valid.pgm`` (255 = valid).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import EventStream, Frame, FrameSequence, MotionField, TurbulenceField
from .errors import BadMagic, BadParam, Corrupt, EvtmError, Unsorted

EVB1_MAGIC = b"EVB1"
_EVB1_HEADER = struct.Struct("<4sHHQQQ")
_EVB1_RECORD = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1"), ("pad", "<u1")]
)


# ---------------------------------------------------------------------------
# events: EVB1 binary
# ---------------------------------------------------------------------------


def write_events(path, stream: EventStream) -> None:
    path = Path(path)
    if stream.width > 0xFFFF or stream.height > 0xFFFF:
        raise BadParam("EVB1 stores 16-bit geometry; stream is too large")
    header = _EVB1_HEADER.pack(
        EVB1_MAGIC, stream.width, stream.height,
        stream.t_begin, stream.t_end, len(stream),
    )
    records = np.zeros(len(stream), dtype=_EVB1_RECORD)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def read_events(path) -> EventStream:
    data = Path(path).read_bytes()
    if len(data) < _EVB1_HEADER.size:
        raise Corrupt(f"{path}: truncated EVB1 header")
    magic, width, height, t_begin, t_end, count = _EVB1_HEADER.unpack_from(data)
    if magic != EVB1_MAGIC:
        raise BadMagic(f"{path}: expected EVB1 magic, got {magic!r}")
    body = data[_EVB1_HEADER.size:]
    expected = count * _EVB1_RECORD.itemsize
    if len(body) != expected:
        raise Corrupt(f"{path}: payload holds {len(body)} bytes, expected {expected}")
    records = np.frombuffer(body, dtype=_EVB1_RECORD)
    t = records["t"].astype(np.int64)
    if len(t) > 1 and np.any(np.diff(t) < 0):
        raise Unsorted(f"{path}: event timestamps decrease")
    return EventStream.from_arrays(
        width, height, t,
        records["x"].astype(np.int64), records["y"].astype(np.int64),
        records["p"].astype(np.int64),
        int(t_begin), int(t_end),
    )


# ---------------------------------------------------------------------------
# events: CSV text
# ---------------------------------------------------------------------------


def write_events_csv(path, stream: EventStream) -> None:
    lines = ["t,x,y,p"]
    for i in range(len(stream)):
        lines.append(f"{stream.t[i]},{stream.x[i]},{stream.y[i]},{stream.p[i]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_events_csv(path, width: int, height: int) -> EventStream:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "t,x,y,p":
        raise Corrupt(f"{path}: missing 't,x,y,p' header line")
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 4:
            raise Corrupt(f"{path}:{lineno}: expected 4 comma-separated fields")
        try:
            rows.append(tuple(int(v) for v in parts))
        except ValueError as exc:
            raise Corrupt(f"{path}:{lineno}: {exc}") from exc
    return EventStream(width, height, rows)


# ---------------------------------------------------------------------------
# PGM rasters
# ---------------------------------------------------------------------------


def write_pgm(path, values: np.ndarray) -> None:
    """Binary 8-bit PGM (P5, maxval 255)."""
    arr = np.asarray(values, dtype=np.uint8)
    if arr.ndim != 2:
        raise BadParam("PGM payload must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def write_pgm16(path, values: np.ndarray) -> None:
    """Binary 16-bit PGM (P5, maxval 65535, big-endian samples)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise BadParam("PGM payload must be 2-D")
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
        raise BadParam("16-bit PGM values must lie in [0, 65535]")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(arr.astype(">u2").tobytes())


def _parse_pgm(path):
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise BadMagic(f"{path}: not a binary PGM (P5) file")
    # header tokens may be separated by any whitespace; '#' starts a comment
    pos, tokens = 2, []
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise Corrupt(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(tok) for tok in tokens)
    except ValueError as exc:
        raise Corrupt(f"{path}: bad PGM header token") from exc
    return w, h, maxval, data[pos:]


def read_pgm(path) -> np.ndarray:
    w, h, maxval, body = _parse_pgm(path)
    if maxval != 255:
        raise Corrupt(f"{path}: expected maxval 255, got {maxval}")
    if len(body) != w * h:
        raise Corrupt(f"{path}: payload holds {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def read_pgm16(path) -> np.ndarray:
    w, h, maxval, body = _parse_pgm(path)
    if maxval != 65535:
        raise Corrupt(f"{path}: expected maxval 65535, got {maxval}")
    if len(body) != 2 * w * h:
        raise Corrupt(f"{path}: payload holds {len(body)} bytes, expected {2 * w * h}")
    return np.frombuffer(body, dtype=">u2").reshape(h, w).astype(np.uint16)


def quantize_frame(frame: Frame) -> np.ndarray:
    """Map [0, 1] intensities to uint8 by round-half-up on v*255."""
    return np.floor(frame.intensity * 255.0 + 0.5).astype(np.uint8)


def frame_from_u8(values: np.ndarray) -> Frame:
    return Frame(np.asarray(values, dtype=np.float64) / 255.0)


# ---------------------------------------------------------------------------
# frame sequences: PGM directory + manifest
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.txt"


def write_frames(directory, seq: FrameSequence) -> None:
    """Frames as 8-bit PGM files plus a ``manifest.txt`` of
    ``index filename timestamp_us`` lines."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ts = seq.timestamps()
    lines = []
    for i, frame in enumerate(seq.frames):
        name = f"{i:06d}.pgm"
        write_pgm(directory / name, quantize_frame(frame))
        lines.append(f"{i} {name} {ts[i]}")
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


def read_frames(directory) -> FrameSequence:
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.is_file():
        raise Corrupt(f"{manifest}: manifest missing")
    entries = []
    for lineno, ln in enumerate(manifest.read_text().splitlines(), start=1):
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise Corrupt(f"{manifest}:{lineno}: expected 'index filename timestamp_us'")
        try:
            entries.append((int(parts[0]), parts[1], int(parts[2])))
        except ValueError as exc:
            raise Corrupt(f"{manifest}:{lineno}: {exc}") from exc
    if not entries:
        raise Corrupt(f"{manifest}: no frame entries")
    entries.sort()
    if [e[0] for e in entries] != list(range(len(entries))):
        raise Corrupt(f"{manifest}: frame indices must be contiguous from 0")
    frames = []
    for _, name, _ in entries:
        fpath = directory / name
        if not fpath.is_file():
            raise Corrupt(f"{fpath}: frame file missing")
        frames.append(frame_from_u8(read_pgm(fpath)))
    ts = np.array([e[2] for e in entries], dtype=np.int64)
    if len(ts) == 1:
        dt = 1
    else:
        steps = np.diff(ts)
        if steps.min() <= 0 or steps.min() != steps.max():
            raise Corrupt(f"{manifest}: timestamps must increase uniformly")
        dt = int(steps[0])
    return FrameSequence(frames, t0=int(ts[0]), dt=dt)


# ---------------------------------------------------------------------------
# motion / scalar / turbulence rasters
# ---------------------------------------------------------------------------


def _valid_path(path) -> Path:
    return Path(str(path) + ".valid.pgm")


def write_motion_field(path, field: MotionField) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"MF1 {field.width} {field.height}\n".encode("ascii"))
        fh.write(field.velocity.astype("<f4").tobytes())
    write_pgm(_valid_path(path), np.where(field.valid, 255, 0).astype(np.uint8))


def read_motion_field(path) -> MotionField:
    path = Path(path)
    data = path.read_bytes()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"MF1 "):
        raise BadMagic(f"{path}: expected 'MF1 <width> <height>' header")
    try:
        w, h = (int(tok) for tok in data[4:nl].split())
    except ValueError as exc:
        raise Corrupt(f"{path}: bad MF1 header") from exc
    body = data[nl + 1:]
    expected = w * h * 2 * 4
    if len(body) != expected:
        raise Corrupt(f"{path}: payload holds {len(body)} bytes, expected {expected}")
    velocity = np.frombuffer(body, dtype="<f4").reshape(h, w, 2)
    vpath = _valid_path(path)
    if not vpath.is_file():
        raise Corrupt(f"{vpath}: validity PGM missing")
    valid = read_pgm(vpath) != 0
    if valid.shape != (h, w):
        raise Corrupt(f"{vpath}: validity geometry disagrees with {path}")
    try:
        return MotionField(velocity, valid)
    except EvtmError as exc:
        raise Corrupt(f"{path}: {exc}") from exc


def write_scalar_field(path, values: np.ndarray) -> None:
    """Row-major float32 raster with an ``SF1 <width> <height>`` text header."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise BadParam("scalar field must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"SF1 {w} {h}\n".encode("ascii"))
        fh.write(arr.astype("<f4").tobytes())


def read_scalar_field(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"SF1 "):
        raise BadMagic(f"{path}: expected 'SF1 <width> <height>' header")
    try:
        w, h = (int(tok) for tok in data[4:nl].split())
    except ValueError as exc:
        raise Corrupt(f"{path}: bad SF1 header") from exc
    body = data[nl + 1:]
    if len(body) != w * h * 4:
        raise Corrupt(f"{path}: payload holds {len(body)} bytes, expected {w * h * 4}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float64)


def write_turbulence_field(path, field: TurbulenceField) -> None:
    """Frame-major float32 (dx, dy) dump with a ``TF1`` text header.

    Storage is float32, so displacements round to ~1e-7 px on disk."""
    with open(path, "wb") as fh:
        fh.write(f"TF1 {field.width} {field.height} {field.n_frames}\n".encode("ascii"))
        fh.write(field.displacement.astype("<f4").tobytes())


def read_turbulence_field(path) -> TurbulenceField:
    path = Path(path)
    data = path.read_bytes()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"TF1 "):
        raise BadMagic(f"{path}: expected 'TF1 <width> <height> <n_frames>' header")
    try:
        w, h, n = (int(tok) for tok in data[4:nl].split())
    except ValueError as exc:
        raise Corrupt(f"{path}: bad TF1 header") from exc
    body = data[nl + 1:]
    expected = n * h * w * 2 * 4
    if len(body) != expected:
        raise Corrupt(f"{path}: payload holds {len(body)} bytes, expected {expected}")
    disp = np.frombuffer(body, dtype="<f4").reshape(n, h, w, 2).astype(np.float64)
    try:
        return TurbulenceField(disp)
    except EvtmError as exc:
        raise Corrupt(f"{path}: {exc}") from exc
