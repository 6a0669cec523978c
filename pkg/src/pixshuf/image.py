"""Float raster images: decoding, encoding, luma, resampling and pyramids.

Pixels are stored as float64 in ``[0, 1]`` with shape ``(height, width, channels)``,
``channels`` being 1 or 3. PNG goes through Pillow; binary PGM/PPM (P5/P6) are
parsed here so test fixtures need nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import DimensionError, FormatError, IoError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_PNM_SUFFIXES = {".pgm", ".ppm", ".pnm"}
_WRITABLE_SUFFIXES = {".png"} | _PNM_SUFFIXES


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable raster with intensities in [0, 1].

    ``data`` may be passed as ``(h, w)`` for grayscale; it is stored as
    ``(h, w, c)``. Values outside [0, 1] are clipped, NaN/Inf are rejected.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionError(f"expected (h, w, 1|3) pixel array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"image must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains NaN or Inf")
        np.clip(arr, 0.0, 1.0, out=arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def plane(self, c: int = 0) -> np.ndarray:
        """Return channel ``c`` as an ``(h, w)`` view."""
        return self.data[:, :, c]

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Image(width={self.width}, height={self.height}, channels={self.channels})"


# ---------------------------------------------------------------------------
# I/O


def _read_pnm(raw: bytes, path) -> np.ndarray:
    magic = raw[:2]
    pos = 2
    fields = []
    n = len(raw)
    while len(fields) < 3:
        while pos < n and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos : pos + 1] == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise FormatError(f"{path}: malformed PNM header")
        fields.append(int(token))
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not raw[pos : pos + 1].isspace():
        raise FormatError(f"{path}: malformed PNM header")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PNM maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: empty PNM raster")
    channels = 3 if magic == b"P6" else 1
    count = width * height * channels
    body = raw[pos : pos + count]
    if len(body) != count:
        raise FormatError(f"{path}: truncated PNM raster")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)


def _read_pillow(path) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise FormatError(f"{path}: unsupported pixel mode {mode} (8-bit only)")
            if mode in ("1", "L", "LA") or (mode == "P" and _palette_is_gray(im)):
                im = im.convert("L")
            elif mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, SyntaxError, ValueError, EOFError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: cannot decode image ({exc})") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _palette_is_gray(im) -> bool:
    pal = im.getpalette()
    if not pal:
        return False
    rgb = np.asarray(pal, dtype=np.int64).reshape(-1, 3)
    return bool(np.all(rgb[:, 0] == rgb[:, 1]) and np.all(rgb[:, 1] == rgb[:, 2]))


def load_image(path) -> Image:
    """Decode an 8-bit PNG / PGM / PPM into an :class:`Image` (alpha dropped)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if raw[:2] in (b"P5", b"P6"):
        arr = _read_pnm(raw, path)
    else:
        arr = _read_pillow(path)
    return Image(arr.astype(np.float64) / 255.0)


def quantize(data) -> np.ndarray:
    """Map float intensities to bytes: round half up, clamp to [0, 255]."""
    q = np.floor(np.asarray(data, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)


def save_image(img, path) -> None:
    """Write an 8-bit raster. The format follows the suffix (.png, .pgm, .ppm, .pnm).

    ``img`` may also be a raw ``(h, w[, c])`` array; out-of-range values clamp.
    """
    path = Path(path)
    data = img.data if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.ndim != 3 or data.shape[2] not in (1, 3):
        raise DimensionError(f"cannot save pixel array of shape {data.shape}")
    suffix = path.suffix.lower()
    if suffix not in _WRITABLE_SUFFIXES:
        raise FormatError(f"{path}: unsupported output format {suffix!r}")
    q = quantize(data)
    h, w, c = q.shape
    try:
        if suffix in _PNM_SUFFIXES:
            if suffix == ".pgm" and c != 1:
                raise FormatError(f"{path}: PGM requires a single-channel image")
            if suffix == ".ppm" and c != 3:
                q = np.repeat(q, 3, axis=2)
                c = 3
            header = f"{'P6' if c == 3 else 'P5'}\n{w} {h}\n255\n".encode("ascii")
            path.write_bytes(header + q.tobytes())
        else:
            PILImage.fromarray(q if c == 3 else q[:, :, 0]).save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# Pixel operations


def to_luma(img: Image) -> Image:
    """Rec. 601 luma; single-channel inputs are copied unchanged."""
    if img.channels == 1:
        return Image(img.data.copy())
    return Image(img.data @ LUMA_WEIGHTS)


def lerp(a, b, f):
    # clip keeps results inside the [a, b] interval despite rounding
    out = a + f * (b - a)
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def _axis_samples(src: int, dst: int):
    if dst > 1:
        pos = (np.arange(dst, dtype=np.float64) * (src - 1)) / (dst - 1)
    else:
        pos = np.zeros(1)
    i0 = np.clip(np.floor(pos).astype(np.intp), 0, src - 1)
    i1 = np.minimum(i0 + 1, src - 1)
    return i0, i1, pos - i0


def resize_array(arr: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Align-corners bilinear resize of an ``(h, w, ...)`` array."""
    if new_w < 1 or new_h < 1:
        raise DimensionError(f"target size must be positive, got {new_w}x{new_h}")
    h, w = arr.shape[:2]
    y0, y1, fy = _axis_samples(h, new_h)
    x0, x1, fx = _axis_samples(w, new_w)
    extra = (1,) * (arr.ndim - 2)
    fy = fy.reshape((-1, 1) + extra)
    rows = lerp(arr[y0], arr[y1], fy)
    fx = fx.reshape((1, -1) + extra)
    return lerp(rows[:, x0], rows[:, x1], fx)


def resize_bilinear(img: Image, new_w: int, new_h: int) -> Image:
    """Bilinear resample to ``new_w`` x ``new_h`` using the align-corners convention."""
    if (new_w, new_h) == (img.width, img.height):
        return Image(img.data.copy())
    return Image(resize_array(img.data, new_w, new_h))


def downsample2x(img: Image) -> Image:
    """Halve each dimension by averaging 2x2 blocks; an odd last row/column is dropped."""
    h, w = img.height, img.width
    if w < 2 or h < 2:
        raise DimensionError(f"downsample2x needs at least 2x2 pixels, got {w}x{h}")
    d = img.data[: h - h % 2, : w - w % 2]
    blocks = d.reshape(h // 2, 2, w // 2, 2, img.channels)
    return Image(blocks.mean(axis=(1, 3)))


def max_pyramid_levels(width: int, height: int, min_size: int = 8) -> int:
    """Largest level count whose coarsest image keeps both sides >= ``min_size``."""
    levels = 1
    w, h = width, height
    while w // 2 >= min_size and h // 2 >= min_size:
        w, h = w // 2, h // 2
        levels += 1
    return levels


def build_pyramid(img: Image, levels: int) -> list[Image]:
    """Return ``[finest, ..., coarsest]`` with ``levels`` entries."""
    pyr = [img]
    for _ in range(levels - 1):
        pyr.append(downsample2x(pyr[-1]))
    return pyr
