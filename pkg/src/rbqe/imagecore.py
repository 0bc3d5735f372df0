"""Grayscale pixel containers, PGM/PNG I/O, codec-aware patch partition and
full-reference metrics (PSNR / SSIM / delta-PSNR).

All planes hold float64 samples in [0, 1], row-major. 8/16-bit files are
scaled by their maxval on load and re-quantized round-half-up on save.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve


class FormatError(ValueError):
    """Malformed or unsupported image file."""


class CodecKind(Enum):
    """Compression family; fixes the partition block size B."""

    JPEG = "JPEG"
    HEVC_MSP = "HEVC_MSP"

    @property
    def block_size(self) -> int:
        # JPEG blocks are 8x8; HEVC-MSP CU/TU minimum is 4x4.
        return 8 if self is CodecKind.JPEG else 4


_RANGE_SLACK = 1e-9  # convex filters may overshoot [0,1] by float rounding


@dataclass(frozen=True)
class Plane:
    """Single-channel image; ``samples`` is a (height, width) float64 array in [0, 1]."""

    samples: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.samples, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"plane must be a non-empty 2-D array, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("plane samples must be finite")
        lo, hi = a.min(), a.max()
        if lo < -_RANGE_SLACK or hi > 1.0 + _RANGE_SLACK:
            raise ValueError(f"plane samples outside [0,1]: min={lo}, max={hi}")
        if lo < 0.0 or hi > 1.0:
            a = np.clip(a, 0.0, 1.0)
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @staticmethod
    def full(height: int, width: int, value: float) -> "Plane":
        return Plane(np.full((height, width), value, dtype=np.float64))


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping BxB patches offset by (B/2, B/2) so every patch straddles
    block boundaries; partial edge patches are discarded."""

    patch_size: int
    offset: tuple[int, int]
    coords: np.ndarray = field(repr=False)  # (N, 2) top-left (row, col)
    blocks: np.ndarray = field(repr=False)  # (N, B, B) row-major over the grid

    def __len__(self) -> int:
        return self.blocks.shape[0]


# ---------------------------------------------------------------------------
# file I/O


def _parse_pgm(data: bytes) -> tuple[int, int, int, np.ndarray]:
    if not data.startswith(b"P5"):
        raise FormatError("not a binary PGM (missing P5 magic)")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise FormatError("unterminated comment in PGM header")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError as exc:
            raise FormatError(f"non-numeric PGM header field {data[start:pos]!r}") from exc
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise FormatError(f"bad PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise FormatError(f"truncated PGM raster: need {need} bytes, have {len(raster)}")
    values = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return width, height, maxval, values


def _png_to_gray(path: Path) -> tuple[np.ndarray, int]:
    from PIL import Image

    with Image.open(path) as img:
        img.load()
        mode = img.mode
        if mode in ("P", "RGBA", "LA"):
            img = img.convert("RGB") if mode in ("P", "RGBA") else img.convert("L")
            mode = img.mode
        arr = np.asarray(img)
    if mode == "L":
        return arr.astype(np.float64), 255
    if mode in ("I;16", "I"):
        if arr.max(initial=0) > 65535:
            raise FormatError(f"unsupported PNG sample depth in {path}")
        return arr.astype(np.float64), 65535
    if mode == "RGB":
        # BT.601 luma; chroma is out of scope
        r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
        return 0.299 * r + 0.587 * g + 0.114 * b, 255
    raise FormatError(f"unsupported PNG mode {mode!r} in {path}")


def load_plane(path: str | Path, fmt: str | None = None) -> Plane:
    """Load a grayscale image (binary PGM 8/16-bit, or PNG) scaled to [0, 1].

    ``fmt`` may pin one of ``pgm8``/``pgm16``/``png``; by default the file
    magic decides. RGB PNGs are converted to luma via BT.601.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    fmt = fmt.lower() if fmt else None

    if data.startswith(b"\x89PNG"):
        if fmt not in (None, "png"):
            raise FormatError(f"{path} is PNG, expected {fmt}")
        values, maxval = _png_to_gray(path)
    elif data.startswith(b"P5"):
        _, _, maxval, values = _parse_pgm(data)
        if fmt == "pgm8" and maxval > 255:
            raise FormatError(f"{path} is 16-bit PGM, expected pgm8")
        if fmt == "pgm16" and maxval <= 255:
            raise FormatError(f"{path} is 8-bit PGM, expected pgm16")
        if fmt == "png":
            raise FormatError(f"{path} is PGM, expected png")
    else:
        raise FormatError(f"{path}: unrecognized image format")
    return Plane(values.astype(np.float64) / float(maxval))


def save_plane(plane: Plane, path: str | Path, fmt: str = "pgm8") -> None:
    """Write ``plane`` as binary PGM. ``fmt`` is ``pgm8`` or ``pgm16``.

    Samples are quantized round-half-up, so a save/load round trip moves each
    sample by at most half a quantization step.
    """
    fmt = fmt.lower()
    if fmt == "pgm8":
        maxval, dtype = 255, np.dtype("u1")
    elif fmt == "pgm16":
        maxval, dtype = 65535, np.dtype(">u2")
    else:
        raise ValueError(f"unsupported save format {fmt!r} (use pgm8 or pgm16)")
    q = np.floor(plane.samples * maxval + 0.5).astype(dtype)
    header = f"P5\n{plane.width} {plane.height}\n{maxval}\n".encode("ascii")
    try:
        Path(path).write_bytes(header + q.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# partition


def partition(plane: Plane, codec: CodecKind) -> PatchGrid:
    """Split ``plane`` into non-overlapping BxB patches at offset (B/2, B/2).

    The half-block offset puts every multiple-of-B block boundary inside some
    patch, which is what the block-artifact scoring needs. Patches that would
    stick out past the right/bottom edge are dropped.
    """
    b = codec.block_size
    off = b // 2
    if plane.width < 3 * b // 2 or plane.height < 3 * b // 2:
        raise ValueError(
            f"plane {plane.width}x{plane.height} too small to partition "
            f"(need at least {3 * b // 2} in each axis for B={b})"
        )
    n_rows = (plane.height - off) // b
    n_cols = (plane.width - off) // b
    region = plane.samples[off : off + n_rows * b, off : off + n_cols * b]
    blocks = region.reshape(n_rows, b, n_cols, b).swapaxes(1, 2).reshape(-1, b, b)
    rr, cc = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    coords = np.stack([off + rr.ravel() * b, off + cc.ravel() * b], axis=1)
    return PatchGrid(patch_size=b, offset=(off, off), coords=coords, blocks=blocks)


# ---------------------------------------------------------------------------
# full-reference metrics


def _check_same_size(a: Plane, b: Plane) -> None:
    if a.samples.shape != b.samples.shape:
        raise ValueError(f"dimension mismatch: {a.samples.shape} vs {b.samples.shape}")


def psnr(a: Plane, b: Plane) -> float:
    """PSNR in dB on the [0,1] sample range; identical planes give ``inf``."""
    _check_same_size(a, b)
    mse = float(np.mean((a.samples - b.samples) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


_SSIM_SIGMA = 1.5
_SSIM_WINDOW = 11
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _ssim_kernel() -> np.ndarray:
    r = np.arange(_SSIM_WINDOW, dtype=np.float64) - (_SSIM_WINDOW - 1) / 2
    g = np.exp(-(r**2) / (2 * _SSIM_SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(a: Plane, b: Plane) -> float:
    """Mean SSIM with the standard 11x11 Gaussian window (sigma 1.5) on [0,1]."""
    _check_same_size(a, b)
    if a.height < _SSIM_WINDOW or a.width < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} for SSIM")
    x, y = a.samples, b.samples
    w = _ssim_kernel()
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    mu_x = fftconvolve(x, w, mode="valid")
    mu_y = fftconvolve(y, w, mode="valid")
    var_x = fftconvolve(x * x, w, mode="valid") - mu_x**2
    var_y = fftconvolve(y * y, w, mode="valid") - mu_y**2
    cov = fftconvolve(x * y, w, mode="valid") - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def delta_psnr(raw: Plane, compressed: Plane, enhanced: Plane) -> float:
    """Enhancement gain: psnr(enhanced, raw) - psnr(compressed, raw).

    Infinite PSNR on either side is propagated by IEEE rules (inf, -inf, or
    nan when both are infinite) and flagged with a warning.
    """
    _check_same_size(raw, compressed)
    _check_same_size(raw, enhanced)
    p_enh = psnr(enhanced, raw)
    p_cmp = psnr(compressed, raw)
    if math.isinf(p_enh) or math.isinf(p_cmp):
        warnings.warn(
            f"delta_psnr: infinite PSNR term (enhanced={p_enh}, compressed={p_cmp}); "
            "result is not a finite dB value",
            RuntimeWarning,
            stacklevel=2,
        )
        if math.isinf(p_enh) and math.isinf(p_cmp):
            return math.nan
    return p_enh - p_cmp
