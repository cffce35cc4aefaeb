"""Binary persistence: frame records and model checkpoints.

Frame file (little-endian throughout):

    magic   4 bytes  b"MDSF"
    version u16      1
    elements u16     virtual element rows per frame
    bins    u16      186
    fps     f32
    count   u32      number of frames
    frames  count x [ f64 timestamp,
                      elements x bins x (f32 re, f32 im) row-major ]

Checkpoint file:

    magic   4 bytes  b"MDSM"
    version u16      1
    heads   u16      W
    receivers u16    M
    window  u16      N (bins)
    lag     u16      pair lag in frames
    attn    u16      attention dimension
    ndims   u16      number of encoder dims (input..features)
    dims    ndims x u16
    pcount  u64      total parameter count
    params  pcount x f64, in declaration order

Both formats round-trip bit-exactly; malformed files raise distinct errors
(bad magic, unsupported version, truncation, trailing data).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .frontend import N_BINS, FrameRecord
from .model import PARAM_ORDER, ModelDims, SeparatorModel

__all__ = [
    "FrameFormatError",
    "BadMagicError",
    "BadVersionError",
    "TruncatedFileError",
    "save_frames",
    "load_frames",
    "save_model",
    "load_model",
]

FRAME_MAGIC = b"MDSF"
MODEL_MAGIC = b"MDSM"
FORMAT_VERSION = 1


class FrameFormatError(ValueError):
    """Malformed frame or checkpoint file."""


class BadMagicError(FrameFormatError):
    pass


class BadVersionError(FrameFormatError):
    pass


class TruncatedFileError(FrameFormatError):
    pass


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"truncated file while reading {what}")
    return data


def save_frames(path, record: FrameRecord) -> None:
    """Write a frame record; overwrites the target file."""
    bins = np.ascontiguousarray(record.bins, dtype=np.complex64)
    count, elements, nbins = bins.shape
    if nbins != N_BINS:
        raise ValueError(f"records carry {N_BINS} bins per element")
    header = FRAME_MAGIC + struct.pack(
        "<HHHfI", FORMAT_VERSION, elements, nbins, float(record.fps), count
    )
    with open(path, "wb") as f:
        f.write(header)
        for i in range(count):
            f.write(struct.pack("<d", float(record.times[i])))
            f.write(bins[i].tobytes())


def load_frames(path) -> FrameRecord:
    """Read a frame record written by :func:`save_frames`."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != FRAME_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}")
        version, elements, nbins, fps, count = struct.unpack(
            "<HHHfI", _read_exact(f, struct.calcsize("<HHHfI"), "header")
        )
        if version != FORMAT_VERSION:
            raise BadVersionError(f"unsupported frame-file version {version}")
        if nbins != N_BINS:
            raise FrameFormatError(f"unexpected bin count {nbins}")
        frame_bytes = elements * nbins * 8
        times = np.empty(count)
        bins = np.empty((count, elements, nbins), dtype=np.complex64)
        for i in range(count):
            try:
                (times[i],) = struct.unpack("<d", _read_exact(f, 8, f"frame {i} timestamp"))
                payload = _read_exact(f, frame_bytes, f"frame {i} payload")
            except TruncatedFileError as exc:
                raise TruncatedFileError(f"truncated at frame {i}: {exc}") from None
            bins[i] = np.frombuffer(payload, dtype=np.complex64).reshape(elements, nbins)
        if f.read(1):
            raise FrameFormatError("trailing data after the last frame")
    return FrameRecord(times, bins, float(fps))


def save_model(path, model: SeparatorModel) -> None:
    """Write a model checkpoint; parameters as float64 in declaration order."""
    d = model.dims
    enc_dims = d.encoder_dims
    vec = model.param_vector().astype("<f8")
    header = MODEL_MAGIC + struct.pack(
        "<HHHHHHH",
        FORMAT_VERSION,
        d.heads,
        d.n_receivers,
        d.window_bins,
        model.lag_frames,
        d.attn_dim,
        len(enc_dims),
    )
    header += struct.pack(f"<{len(enc_dims)}H", *enc_dims)
    header += struct.pack("<Q", vec.size)
    with open(path, "wb") as f:
        f.write(header)
        f.write(vec.tobytes())


def load_model(path) -> SeparatorModel:
    """Read a checkpoint written by :func:`save_model`."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MODEL_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        version, heads, receivers, window, lag, attn, ndims = struct.unpack(
            "<HHHHHHH", _read_exact(f, 14, "header")
        )
        if version != FORMAT_VERSION:
            raise BadVersionError(f"unsupported checkpoint version {version}")
        enc_dims = struct.unpack(f"<{ndims}H", _read_exact(f, 2 * ndims, "encoder dims"))
        (pcount,) = struct.unpack("<Q", _read_exact(f, 8, "parameter count"))
        if len(enc_dims) != 4:
            raise FrameFormatError(f"expected 4 encoder dims, found {ndims}")
        dims = ModelDims(
            n_receivers=receivers,
            window_bins=window,
            heads=heads,
            attn_dim=attn,
            enc_hidden=(enc_dims[1], enc_dims[2]),
            feat_dim=enc_dims[3],
        )
        if enc_dims[0] != dims.input_dim:
            raise FrameFormatError(
                f"encoder input dim {enc_dims[0]} inconsistent with window {window}"
            )
        vec = np.frombuffer(
            _read_exact(f, 8 * pcount, "parameters"), dtype="<f8"
        ).copy()
        if f.read(1):
            raise FrameFormatError("trailing data after parameters")

    shapes = SeparatorModel.shapes(dims)
    expected = sum(int(np.prod(shapes[n])) for n in PARAM_ORDER)
    if vec.size != expected:
        raise FrameFormatError(
            f"parameter count {vec.size} does not match dims (expected {expected})"
        )
    params: dict[str, np.ndarray] = {}
    pos = 0
    for name in PARAM_ORDER:
        size = int(np.prod(shapes[name]))
        params[name] = vec[pos : pos + size].reshape(shapes[name])
        pos += size
    return SeparatorModel(dims, params, lag_frames=lag)
