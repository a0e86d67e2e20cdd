"""Bit-exact persistence: weight files, tensor dumps, PPM/PGM codecs.

Weight file (.dabw): magic "DABW", u32 version == 1, u32 record count, then
per record a u16 name length, the UTF-8 name, one dtype byte (0 = f32 LE),
one ndim byte, ndim u32 dims, and the payload floats in layout order. All
integers little-endian. The file must be consumed exactly: trailing bytes
are as much an error as missing ones.

Tensor dump (.tns): magic "TNS1", 4 u32 dims (n,c,h,w), f32 payload.

Images are binary PPM (P6, RGB) and label maps binary PGM (P5), both
maxval 255; 255 in a label map is the conventional ignore value.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import DataError, FormatError, ShapeError, TruncationError
from .net import NetworkSpec, WeightStore
from .tensor import Tensor

_DABW_MAGIC = b"DABW"
_DABW_VERSION = 1
_TNS_MAGIC = b"TNS1"


# ===========================================================================
# weight files
# ===========================================================================

def save_weights(store: WeightStore, path) -> None:
    parts = [_DABW_MAGIC, struct.pack("<II", _DABW_VERSION, len(store))]
    for name, arr in store.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"weight name too long: {name[:40]}...")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(bytes([0, arr.ndim]))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4", copy=False).tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Reader:
    """Byte cursor that reports the offset where data ran out."""

    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncationError(
                f"file truncated: needed {n} bytes at offset {self.pos}, "
                f"have {len(self.buf) - self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out


def load_weights(path, spec: NetworkSpec | None = None) -> WeightStore:
    """Parse a .dabw file; validates completeness when a spec is given."""
    with open(path, "rb") as f:
        r = _Reader(f.read())
    if r.take(4) != _DABW_MAGIC:
        raise FormatError(f"bad magic in {path}: not a weight file")
    version, count = struct.unpack("<II", r.take(8))
    if version != _DABW_VERSION:
        raise FormatError(f"unsupported weight file version {version}")
    store = WeightStore()
    for _ in range(count):
        (name_len,) = struct.unpack("<H", r.take(2))
        name = r.take(name_len).decode("utf-8")
        dtype_byte, ndim = r.take(1)[0], r.take(1)[0]
        if dtype_byte != 0:
            raise FormatError(f"entry '{name}': unsupported dtype byte {dtype_byte}")
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        elements = 1
        for d in dims:
            elements *= d
        payload = r.take(4 * elements)
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(
            np.float32, copy=True)
        if name in store:
            raise FormatError(f"duplicate weight entry '{name}'")
        store.put(name, arr)
    if r.pos != len(r.buf):
        raise FormatError(
            f"{len(r.buf) - r.pos} trailing bytes after the last record")
    if spec is not None:
        store.validate_complete(spec)
    return store


# ===========================================================================
# tensor dumps
# ===========================================================================

def save_tensor(t: Tensor, path) -> None:
    with open(path, "wb") as f:
        f.write(_TNS_MAGIC)
        f.write(struct.pack("<4I", *t.dims))
        f.write(t.data.astype("<f4", copy=False).tobytes())


def load_tensor(path) -> Tensor:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    if r.take(4) != _TNS_MAGIC:
        raise FormatError(f"bad magic in {path}: not a tensor dump")
    dims = struct.unpack("<4I", r.take(16))
    n = dims[0] * dims[1] * dims[2] * dims[3]
    data = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims)
    if r.pos != len(r.buf):
        raise FormatError(f"{len(r.buf) - r.pos} trailing bytes in tensor dump")
    return Tensor(data.astype(np.float32, copy=True))


# ===========================================================================
# netpbm codecs
# ===========================================================================

def _read_header_token(r: _Reader) -> bytes:
    # netpbm: tokens separated by whitespace; '#' starts a comment to EOL
    tok = b""
    while True:
        b = r.take(1)
        if b == b"#":
            while r.take(1) not in b"\r\n":
                pass
            continue
        if b.isspace():
            if tok:
                return tok
            continue
        tok += b


def _read_pnm(path, magic: bytes):
    with open(path, "rb") as f:
        r = _Reader(f.read())
    got = r.take(2)
    if got != magic:
        raise FormatError(
            f"unsupported netpbm type {got!r} in {path}, expected {magic!r} "
            f"(binary variant)")
    w = int(_read_header_token(r))
    h = int(_read_header_token(r))
    maxval = int(_read_header_token(r))
    if w < 1 or h < 1:
        raise FormatError(f"bad image dims {w}x{h} in {path}")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval} in {path}, must be 255")
    # the token reader consumed the single whitespace byte before the payload
    channels = 3 if magic == b"P6" else 1
    payload = r.take(w * h * channels)
    if r.pos != len(r.buf):
        raise FormatError(f"{len(r.buf) - r.pos} trailing bytes in {path}")
    return np.frombuffer(payload, dtype=np.uint8), h, w


def load_image_ppm(path) -> Tensor:
    """Binary PPM -> (1,3,H,W) float tensor in [0,1], channels R,G,B."""
    flat, h, w = _read_pnm(path, b"P6")
    rgb = flat.reshape(h, w, 3).transpose(2, 0, 1)
    return Tensor((rgb.astype(np.float32) / 255.0)[None])


def load_labels_pgm(path) -> np.ndarray:
    """Binary PGM -> (H,W) label array; byte 255 is the ignore value."""
    flat, h, w = _read_pnm(path, b"P5")
    return flat.reshape(h, w).copy()


def save_labels_pgm(labels, path) -> None:
    """Write an (H,W) or (1,1,H,W) label array as binary PGM."""
    arr = np.asarray(labels)
    if arr.ndim == 4:
        if arr.shape[0] != 1 or arr.shape[1] != 1:
            raise ShapeError(f"expected a single label map, got dims {arr.shape}")
        arr = arr[0, 0]
    if arr.ndim != 2:
        raise ShapeError(f"label map must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise DataError("label values must fit in one byte (0..255)")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(arr.astype(np.uint8).tobytes())


def save_image_ppm(image: Tensor, path) -> None:
    """Write a (1,3,H,W) tensor in [0,1] as binary PPM (values clipped)."""
    n, c, h, w = image.dims
    if n != 1 or c != 3:
        raise ShapeError(f"expected dims (1,3,H,W), got {image.dims}")
    rgb = np.clip(np.rint(image.data[0] * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(rgb.transpose(1, 2, 0).tobytes())


# ===========================================================================
# preprocessing
# ===========================================================================

def preprocess(image: Tensor, means) -> Tensor:
    """Subtract per-channel means (given on the same [0,1] scale)."""
    m = np.asarray(means, dtype=np.float32)
    if m.shape != (3,):
        raise ShapeError(f"means must be 3 values, got shape {m.shape}")
    if image.dims[1] != 3:
        raise ShapeError(f"expected a 3-channel image, got {image.dims[1]}")
    return Tensor(image.data - m[None, :, None, None])
