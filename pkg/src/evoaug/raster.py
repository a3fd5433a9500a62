"""Raster images, lossless PNG/PPM I/O, and the classical augmentation transform.

Images are immutable byte buffers (row-major, channel-interleaved, 8-bit).
The PNG codec covers the subset this engine emits and consumes: bit depth 8,
grayscale or RGB, no interlacing, no alpha.  Anything else is rejected rather
than silently misread.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, IoError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# Declared parameter bounds for classical sub-transforms.  Sampling configs
# must stay inside these; the transform itself rejects anything outside.
CROP_BOUNDS = (0.0, 1.0)  # exclusive of 0
TRANSLATE_BOUNDS = (-0.25, 0.25)
SCALE_BOUNDS = (0.5, 2.0)
ROTATE_BOUNDS = (-180.0, 180.0)
JITTER_BOUNDS = (0.5, 1.5)


@dataclass(frozen=True)
class RasterImage:
    """Fixed-size 8-bit image; ``data`` holds width*height*channels samples."""

    width: int
    height: int
    channels: int
    data: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        expected = self.width * self.height * self.channels
        if len(self.data) != expected:
            raise ValueError(f"data holds {len(self.data)} samples, expected {expected}")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        """Build from an (h, w) or (h, w, c) array; values are rounded and clamped."""
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr.tobytes())

    def to_array(self) -> np.ndarray:
        """Writable (h, w, c) uint8 copy of the pixel data."""
        flat = np.frombuffer(self.data, dtype=np.uint8)
        return flat.reshape(self.height, self.width, self.channels).copy()


# ---------------------------------------------------------------------------
# PNG / PPM codec
# ---------------------------------------------------------------------------


def encode_png(img: RasterImage) -> bytes:
    """Lossless PNG bytes (filter 0 on every scanline, fixed zlib level)."""
    color_type = 0 if img.channels == 1 else 2
    stride = img.width * img.channels
    raw = b"".join(
        b"\x00" + img.data[y * stride : (y + 1) * stride] for y in range(img.height)
    )
    ihdr = struct.pack(">IIBBBBB", img.width, img.height, 8, color_type, 0, 0, 0)
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, 9))
        + _chunk(b"IEND", b"")
    )


def _chunk(ctype: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + ctype
        + body
        + struct.pack(">I", zlib.crc32(ctype + body))
    )


def decode_png(blob: bytes) -> RasterImage:
    if not blob.startswith(PNG_SIGNATURE):
        raise FormatError("not a PNG stream (bad signature)")
    pos = len(PNG_SIGNATURE)
    header = None
    idat = bytearray()
    seen_end = False
    while pos + 12 <= len(blob):
        length, ctype = struct.unpack(">I4s", blob[pos : pos + 8])
        body = blob[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise FormatError("truncated PNG chunk")
        (crc,) = struct.unpack(">I", blob[pos + 8 + length : pos + 12 + length])
        if zlib.crc32(ctype + body) != crc:
            raise FormatError(f"CRC mismatch in {ctype.decode('latin1')} chunk")
        pos += 12 + length
        if ctype == b"IHDR":
            header = struct.unpack(">IIBBBBB", body)
        elif ctype == b"IDAT":
            idat.extend(body)
        elif ctype == b"IEND":
            seen_end = True
            break
        # ancillary chunks are skipped
    if header is None or not seen_end:
        raise FormatError("PNG stream missing IHDR or IEND")
    width, height, bit_depth, color_type, compression, filter_method, interlace = header
    if bit_depth != 8:
        raise FormatError(f"unsupported bit depth {bit_depth} (only 8 is supported)")
    if color_type not in (0, 2):
        raise FormatError(f"unsupported color type {color_type} (only gray and RGB)")
    if compression != 0 or filter_method != 0:
        raise FormatError("unsupported PNG compression or filter method")
    if interlace != 0:
        raise FormatError("interlaced PNG is not supported")
    channels = 1 if color_type == 0 else 3
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise FormatError(f"corrupt PNG pixel data: {exc}") from exc
    data = _unfilter(raw, width, height, channels)
    return RasterImage(width=width, height=height, channels=channels, data=data)


def _unfilter(raw: bytes, width: int, height: int, channels: int) -> bytes:
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise FormatError("PNG pixel data has the wrong length")
    out = bytearray(height * stride)
    prev = bytearray(stride)
    pos = 0
    for y in range(height):
        ftype = raw[pos]
        pos += 1
        line = bytearray(raw[pos : pos + stride])
        pos += stride
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for i in range(channels, stride):
                line[i] = (line[i] + line[i - channels]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                line[i] = (line[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = line[i - channels] if i >= channels else 0
                line[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = line[i - channels] if i >= channels else 0
                up = prev[i]
                upleft = prev[i - channels] if i >= channels else 0
                line[i] = (line[i] + _paeth(left, up, upleft)) & 0xFF
        else:
            raise FormatError(f"unknown PNG filter type {ftype}")
        out[y * stride : (y + 1) * stride] = line
        prev = line
    return bytes(out)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def decode_ppm(blob: bytes) -> RasterImage:
    """Binary PPM (P6) with maxval 255."""
    fields = []
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(blob):
            ch = blob[pos : pos + 1]
            if ch == b"#":
                while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        return blob[start:pos]

    for _ in range(4):
        fields.append(next_token())
    magic, width_s, height_s, maxval_s = fields
    if magic != b"P6":
        raise FormatError(f"unsupported PPM magic {magic!r} (only binary P6)")
    try:
        width, height, maxval = int(width_s), int(height_s), int(maxval_s)
    except ValueError as exc:
        raise FormatError("malformed PPM header") from exc
    if maxval != 255:
        raise FormatError(f"unsupported PPM maxval {maxval} (only 255)")
    pos += 1  # single whitespace byte after maxval
    data = blob[pos : pos + width * height * 3]
    if len(data) != width * height * 3:
        raise FormatError("truncated PPM pixel data")
    return RasterImage(width=width, height=height, channels=3, data=data)


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG or binary PPM (P6) file."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if blob.startswith(PNG_SIGNATURE):
        return decode_png(blob)
    if blob.startswith(b"P6"):
        return decode_ppm(blob)
    raise FormatError(f"{path}: neither PNG nor binary PPM")


def save_image(img: RasterImage, path: str | Path) -> None:
    """Write ``img`` as a lossless PNG; round-trips pixel-exactly."""
    try:
        Path(path).write_bytes(encode_png(img))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Classical transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalTransformSpec:
    """One concrete draw of the classical augmentation.

    ``None`` (or ``False`` for flips) marks an inactive sub-transform; the
    all-inactive spec is the identity.  Geometric parts are resampled back to
    the input size with bilinear interpolation and black fill, so output shape
    always equals input shape.
    """

    crop_fraction: float | None = None
    translate_xy: tuple[float, float] | None = None
    scale: float | None = None
    rotate_degrees: float | None = None
    hflip: bool = False
    vflip: bool = False
    brightness: float | None = None
    contrast: float | None = None
    saturation: float | None = None

    def __post_init__(self):
        if self.crop_fraction is not None and not (
            CROP_BOUNDS[0] < self.crop_fraction <= CROP_BOUNDS[1]
        ):
            raise ValueError(f"crop_fraction {self.crop_fraction} outside (0, 1]")
        if self.translate_xy is not None:
            for t in self.translate_xy:
                if not TRANSLATE_BOUNDS[0] <= t <= TRANSLATE_BOUNDS[1]:
                    raise ValueError(f"translation {t} outside {TRANSLATE_BOUNDS}")
        for name, value, bounds in (
            ("scale", self.scale, SCALE_BOUNDS),
            ("rotate_degrees", self.rotate_degrees, ROTATE_BOUNDS),
            ("brightness", self.brightness, JITTER_BOUNDS),
            ("contrast", self.contrast, JITTER_BOUNDS),
            ("saturation", self.saturation, JITTER_BOUNDS),
        ):
            if value is not None and not bounds[0] <= value <= bounds[1]:
                raise ValueError(f"{name} {value} outside {bounds}")

    @property
    def is_identity(self) -> bool:
        return (
            self.crop_fraction is None
            and self.translate_xy is None
            and self.scale is None
            and self.rotate_degrees is None
            and not self.hflip
            and not self.vflip
            and self.brightness is None
            and self.contrast is None
            and self.saturation is None
        )

    @property
    def has_geometric(self) -> bool:
        return (
            self.crop_fraction is not None
            or self.translate_xy is not None
            or self.scale is not None
            or self.rotate_degrees is not None
        )


def apply_transform(img: RasterImage, spec: ClassicalTransformSpec) -> RasterImage:
    """Apply ``spec`` to ``img``; dimensions and channel count never change.

    Order: geometric resample (crop zoom, translate, scale, rotate as one
    affine pass), exact horizontal/vertical flips, then color jitter in
    brightness -> contrast -> saturation order with clamping after each step.
    An inactive spec returns the input unchanged, and flips alone are exact
    index permutations, so double-flip is a bit-level identity.
    """
    if spec.is_identity:
        return img
    arr = img.to_array().astype(np.float64)
    if spec.has_geometric:
        arr = _geometric_resample(arr, spec)
    if spec.hflip:
        arr = arr[:, ::-1]
    if spec.vflip:
        arr = arr[::-1, :]
    arr = _color_jitter(arr, spec)
    return RasterImage.from_array(arr)


def _geometric_resample(arr: np.ndarray, spec: ClassicalTransformSpec) -> np.ndarray:
    h, w = arr.shape[:2]
    f = spec.crop_fraction if spec.crop_fraction is not None else 1.0
    s = spec.scale if spec.scale is not None else 1.0
    theta = math.radians(spec.rotate_degrees or 0.0)
    tx, ty = spec.translate_xy if spec.translate_xy is not None else (0.0, 0.0)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    # Forward map: zoom by s/f about the center, rotate by theta, then shift
    # by (tx*w, ty*h).  Sampling inverts it.  Positive angles rotate content
    # clockwise on screen because the y axis points down.
    dst_x, dst_y = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ux = dst_x - cx - tx * w
    uy = dst_y - cy - ty * h
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    k = f / s
    src_x = cx + k * (cos_t * ux + sin_t * uy)
    src_y = cy + k * (-sin_t * ux + cos_t * uy)
    return _bilinear_sample(arr, src_x, src_y)


def _bilinear_sample(arr: np.ndarray, src_x: np.ndarray, src_y: np.ndarray) -> np.ndarray:
    h, w, c = arr.shape
    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0
    out = np.zeros((h, w, c), dtype=np.float64)
    for dx, dy, weight in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xs = x0 + dx
        ys = y0 + dy
        inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        vals = arr[np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1)]
        vals = np.where(inside[..., None], vals, 0.0)  # black outside the frame
        out += weight[..., None] * vals
    return out


def _luma(arr: np.ndarray) -> np.ndarray:
    if arr.shape[2] == 1:
        return arr[:, :, 0]
    return 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]


def _color_jitter(arr: np.ndarray, spec: ClassicalTransformSpec) -> np.ndarray:
    if spec.brightness is not None:
        arr = np.clip(arr * spec.brightness, 0.0, 255.0)
    if spec.contrast is not None:
        mean = _luma(arr).mean()
        arr = np.clip((arr - mean) * spec.contrast + mean, 0.0, 255.0)
    if spec.saturation is not None and arr.shape[2] == 3:
        gray = _luma(arr)[:, :, None]
        arr = np.clip(gray + (arr - gray) * spec.saturation, 0.0, 255.0)
    return arr


# ---------------------------------------------------------------------------
# Spec sampling
# ---------------------------------------------------------------------------

_RangePair = tuple[float, float]


@dataclass(frozen=True)
class ClassicalAugConfig:
    """Activation probabilities and uniform ranges for classical sampling.

    Defaults mirror common augmentation practice; every range must sit inside
    the transform's declared bounds.
    """

    crop_prob: float = 0.5
    crop_range: _RangePair = (0.8, 1.0)
    translate_prob: float = 0.5
    translate_range: _RangePair = (-0.1, 0.1)
    scale_prob: float = 0.5
    scale_range: _RangePair = (0.8, 1.25)
    rotate_prob: float = 0.5
    rotate_range: _RangePair = (-30.0, 30.0)
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    brightness_prob: float = 0.5
    brightness_range: _RangePair = (0.6, 1.4)
    contrast_prob: float = 0.5
    contrast_range: _RangePair = (0.6, 1.4)
    saturation_prob: float = 0.5
    saturation_range: _RangePair = (0.6, 1.4)

    def __post_init__(self):
        for name in (
            "crop_prob",
            "translate_prob",
            "scale_prob",
            "rotate_prob",
            "hflip_prob",
            "vflip_prob",
            "brightness_prob",
            "contrast_prob",
            "saturation_prob",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        checks = (
            ("crop_range", self.crop_range, CROP_BOUNDS, True),
            ("translate_range", self.translate_range, TRANSLATE_BOUNDS, False),
            ("scale_range", self.scale_range, SCALE_BOUNDS, False),
            ("rotate_range", self.rotate_range, ROTATE_BOUNDS, False),
            ("brightness_range", self.brightness_range, JITTER_BOUNDS, False),
            ("contrast_range", self.contrast_range, JITTER_BOUNDS, False),
            ("saturation_range", self.saturation_range, JITTER_BOUNDS, False),
        )
        for name, (lo, hi), (blo, bhi), lo_exclusive in checks:
            if lo > hi:
                raise ConfigError(f"{name} is inverted: {lo} > {hi}")
            if lo < blo or hi > bhi or (lo_exclusive and lo <= blo):
                raise ConfigError(f"{name} ({lo}, {hi}) outside declared bounds ({blo}, {bhi})")

    @classmethod
    def identity(cls) -> "ClassicalAugConfig":
        """All activation probabilities zero: sampling always yields the identity."""
        return cls(
            crop_prob=0.0,
            translate_prob=0.0,
            scale_prob=0.0,
            rotate_prob=0.0,
            hflip_prob=0.0,
            vflip_prob=0.0,
            brightness_prob=0.0,
            contrast_prob=0.0,
            saturation_prob=0.0,
        )


def sample_classical_spec(
    rng: np.random.Generator, cfg: ClassicalAugConfig | None = None
) -> ClassicalTransformSpec:
    """Draw a transform spec: each sub-transform activates independently.

    Draw order is fixed (crop, translate, scale, rotate, flips, jitter) so a
    given generator state always yields the same spec.
    """
    cfg = cfg if cfg is not None else ClassicalAugConfig()

    def draw(prob: float, rng_range: _RangePair) -> float | None:
        active = rng.random() < prob
        if not active:
            return None
        return float(rng.uniform(rng_range[0], rng_range[1]))

    crop = draw(cfg.crop_prob, cfg.crop_range)
    translate = None
    if rng.random() < cfg.translate_prob:
        translate = (
            float(rng.uniform(*cfg.translate_range)),
            float(rng.uniform(*cfg.translate_range)),
        )
    scale = draw(cfg.scale_prob, cfg.scale_range)
    rotate = draw(cfg.rotate_prob, cfg.rotate_range)
    hflip = bool(rng.random() < cfg.hflip_prob)
    vflip = bool(rng.random() < cfg.vflip_prob)
    brightness = draw(cfg.brightness_prob, cfg.brightness_range)
    contrast = draw(cfg.contrast_prob, cfg.contrast_range)
    saturation = draw(cfg.saturation_prob, cfg.saturation_range)
    return ClassicalTransformSpec(
        crop_fraction=crop,
        translate_xy=translate,
        scale=scale,
        rotate_degrees=rotate,
        hflip=hflip,
        vflip=vflip,
        brightness=brightness,
        contrast=contrast,
        saturation=saturation,
    )
