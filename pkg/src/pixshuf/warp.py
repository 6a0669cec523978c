"""Displacement fields and warping.

``warp(src, field)(x, y) = src(x + dx(x, y), y + dy(x, y))`` with sample
coordinates clamped to the image rectangle, so no color outside the source
ever enters the output.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, IoError
from .image import Image, lerp, resize_array

FIELD_MAGIC = b"PSF1"


class SamplingMode(enum.Enum):
    BILINEAR = "bilinear"
    NEAREST = "nearest"

    @classmethod
    def parse(cls, value) -> "SamplingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown sampling mode {value!r}; expected bilinear or nearest") from None


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Per-pixel source offsets in pixel units, ``dx``/``dy`` of shape ``(h, w)``."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        dx = np.array(self.dx, dtype=np.float64)
        dy = np.array(self.dy, dtype=np.float64)
        if dx.ndim != 2 or dx.shape != dy.shape or dx.size == 0:
            raise DimensionError(f"dx/dy must be equal non-empty 2-D arrays, got {dx.shape} and {dy.shape}")
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
            raise ValueError("displacement field contains NaN or Inf")
        dx.setflags(write=False)
        dy.setflags(write=False)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @classmethod
    def zeros(cls, width: int, height: int) -> "DisplacementField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def constant(cls, width: int, height: int, dx: float, dy: float) -> "DisplacementField":
        return cls(np.full((height, width), float(dx)), np.full((height, width), float(dy)))

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.dx, self.dy)

    def __eq__(self, other):
        if not isinstance(other, DisplacementField):
            return NotImplemented
        return np.array_equal(self.dx, other.dx) and np.array_equal(self.dy, other.dy)


def _check_dims(src: Image, field: DisplacementField):
    if (field.width, field.height) != (src.width, src.height):
        raise DimensionError(
            f"field is {field.width}x{field.height} but image is {src.width}x{src.height}"
        )


def _sample_coords(field: DisplacementField):
    h, w = field.height, field.width
    ys, xs = np.mgrid[0:h, 0:w]
    rx = xs + field.dx
    ry = ys + field.dy
    return rx, ry, np.clip(rx, 0, w - 1), np.clip(ry, 0, h - 1)


def _corners(sx, sy, w, h):
    x0 = np.minimum(np.floor(sx).astype(np.intp), w - 1)
    y0 = np.minimum(np.floor(sy).astype(np.intp), h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]
    return x0, x1, y0, y1, fx, fy


def warp(src: Image, field: DisplacementField, mode=SamplingMode.BILINEAR) -> Image:
    """Resample ``src`` at the displaced, edge-clamped coordinates."""
    _check_dims(src, field)
    mode = SamplingMode.parse(mode)
    h, w = src.height, src.width
    _, _, sx, sy = _sample_coords(field)
    s = src.data
    if mode is SamplingMode.NEAREST:
        ix = np.minimum(np.floor(sx + 0.5).astype(np.intp), w - 1)
        iy = np.minimum(np.floor(sy + 0.5).astype(np.intp), h - 1)
        return Image(s[iy, ix])
    x0, x1, y0, y1, fx, fy = _corners(sx, sy, w, h)
    top = lerp(s[y0, x0], s[y0, x1], fx)
    bottom = lerp(s[y1, x0], s[y1, x1], fx)
    return Image(lerp(top, bottom, fy))


def warp_and_gradient(src: Image, field: DisplacementField):
    """Bilinear warp of ``src.data`` plus its derivatives w.r.t. ``dx`` and ``dy``.

    Returns raw ``(h, w, c)`` arrays ``(out, d_out/d_dx, d_out/d_dy)``; this is
    the optimizer's hot path, so no :class:`Image` is built.
    """
    _check_dims(src, field)
    h, w = src.height, src.width
    rx, ry, sx, sy = _sample_coords(field)
    s = src.data
    x0, x1, y0, y1, fx, fy = _corners(sx, sy, w, h)
    s00, s01, s10, s11 = s[y0, x0], s[y0, x1], s[y1, x0], s[y1, x1]
    out = lerp(lerp(s00, s01, fx), lerp(s10, s11, fx), fy)
    gx = (1.0 - fy) * (s01 - s00) + fy * (s11 - s10)
    gy = (1.0 - fx) * (s10 - s00) + fx * (s11 - s01)
    gx[(rx < 0) | (rx > w - 1)] = 0.0
    gy[(ry < 0) | (ry > h - 1)] = 0.0
    return out, gx, gy


def warp_input_gradient(src: Image, field: DisplacementField):
    """Partial derivatives of the bilinear warp output w.r.t. ``dx`` and ``dy``.

    Returns ``(d_out/d_dx, d_out/d_dy)``, each shaped ``(h, w, channels)``. The
    derivative is zero along an axis whose coordinate was clamped.
    """
    _, gx, gy = warp_and_gradient(src, field)
    return gx, gy


def resample_field(field: DisplacementField, new_w: int, new_h: int) -> DisplacementField:
    """Bilinearly resize a field to any size, rescaling offsets to the new pixel grid."""
    if (new_w, new_h) == (field.width, field.height):
        return field
    stacked = np.stack([field.dx, field.dy], axis=-1)
    r = resize_array(stacked, new_w, new_h)
    return DisplacementField(r[..., 0] * (new_w / field.width), r[..., 1] * (new_h / field.height))


def upsample_field(field: DisplacementField, new_w: int, new_h: int) -> DisplacementField:
    """Promote a field to a finer (or equal) grid; offsets scale with the grid."""
    if new_w < field.width or new_h < field.height:
        raise DimensionError(
            f"cannot upsample {field.width}x{field.height} field to smaller {new_w}x{new_h}"
        )
    return resample_field(field, new_w, new_h)


def save_field(field: DisplacementField, path) -> None:
    """Write the little-endian ``PSF1`` binary: magic, u32 w, u32 h, f32 dx[], f32 dy[]."""
    payload = (
        FIELD_MAGIC
        + struct.pack("<II", field.width, field.height)
        + field.dx.astype("<f4").tobytes()
        + field.dy.astype("<f4").tobytes()
    )
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def load_field(path) -> DisplacementField:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if raw[:4] != FIELD_MAGIC or len(raw) < 12:
        raise FormatError(f"{path}: not a PSF1 displacement field")
    w, h = struct.unpack("<II", raw[4:12])
    n = w * h
    if n == 0 or len(raw) != 12 + 8 * n:
        raise FormatError(f"{path}: PSF1 payload size does not match {w}x{h}")
    vals = np.frombuffer(raw, dtype="<f4", offset=12).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise FormatError(f"{path}: field contains NaN or Inf")
    return DisplacementField(vals[:n].reshape(h, w), vals[n:].reshape(h, w))
