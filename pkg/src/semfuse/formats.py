"""Little-endian binary containers for rasters.

``SFSM`` score map and ``SFPB`` probability image::

    magic(4) | c, n, m : uint32 | c*n*m float32, class-major then row-major

``SFSP`` superpixel map and ``SFLB`` label image::

    magic(4) | n, m, K : uint32 | n*m uint32, row-major

For label images the third header field is the class count.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .semantics import LabelImage, ProbabilityImage, ScoreMap, SuperpixelMap

_HEADER = struct.Struct("<4sIII")


def _write(path: str | Path, magic: bytes, dims: tuple[int, int, int], data: np.ndarray) -> None:
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(magic, *dims))
        fh.write(np.ascontiguousarray(data).tobytes())


def _read(path: str | Path, magic: bytes, dtype: str, volume) -> tuple[tuple[int, int, int], np.ndarray]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got, a, b, c = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: expected magic {magic!r}, found {got!r}")
    count = volume(a, b, c)
    body = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    if body.size != count:
        raise FormatError(f"{path}: expected {count} values, found {body.size}")
    return (a, b, c), body


def write_score_map(path: str | Path, sm: ScoreMap) -> None:
    c, n, m = sm.scores.shape
    _write(path, b"SFSM", (c, n, m), sm.scores.astype("<f4"))


def read_score_map(path: str | Path) -> ScoreMap:
    (c, n, m), body = _read(path, b"SFSM", "<f4", lambda c, n, m: c * n * m)
    try:
        return ScoreMap(body.astype(np.float64).reshape(c, n, m))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_probability_image(path: str | Path, img: ProbabilityImage) -> None:
    c, n, m = img.probs.shape
    _write(path, b"SFPB", (c, n, m), img.probs.astype("<f4"))


def read_probability_image(path: str | Path) -> ProbabilityImage:
    (c, n, m), body = _read(path, b"SFPB", "<f4", lambda c, n, m: c * n * m)
    p = body.astype(np.float64).reshape(c, n, m)
    s = p.sum(axis=0, keepdims=True)
    if np.any(s <= 0):
        raise FormatError(f"{path}: pixel with zero probability mass")
    # float32 storage: renormalise so every pixel sums to 1 in double precision
    return ProbabilityImage(p / s)


def write_superpixel_map(path: str | Path, sp: SuperpixelMap) -> None:
    n, m = sp.shape
    _write(path, b"SFSP", (n, m, sp.count), sp.assignment.astype("<u4"))


def read_superpixel_map(path: str | Path) -> SuperpixelMap:
    (n, m, k), body = _read(path, b"SFSP", "<u4", lambda n, m, k: n * m)
    try:
        return SuperpixelMap(body.astype(np.int64).reshape(n, m), k)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_label_image(path: str | Path, lab: LabelImage) -> None:
    n, m = lab.shape
    _write(path, b"SFLB", (n, m, lab.classes), lab.labels.astype("<u4"))


def read_label_image(path: str | Path) -> LabelImage:
    (n, m, c), body = _read(path, b"SFLB", "<u4", lambda n, m, c: n * m)
    try:
        return LabelImage(body.astype(np.int64).reshape(n, m), c)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
