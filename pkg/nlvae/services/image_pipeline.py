"""
Image I/O, resampling, the degradation operator, and pseudo-label generation.

Pixels are H x W x 3 float32 arrays in [0, 1]. Every operation clamps its result
back into that range. Resampling runs per channel on Pillow float images so no
8-bit quantization happens between pipeline steps.
"""

from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from pydantic import BaseModel, Field, validator
from skimage.transform import resize as sk_resize

from nlvae.core.exceptions import ContractError, DegenerateInputError, ImageIOError
from nlvae.core.logging import get_logger
from nlvae.models.config import DegradationSpec
from nlvae.utils.constants import CANVAS_RESIZE_SIDE, SUPPORTED_IMAGE_SUFFIXES

logger = get_logger(__name__)

_PIL_KERNELS = {
    "bicubic": PILImage.Resampling.BICUBIC,
    "bilinear": PILImage.Resampling.BILINEAR,
    "box": PILImage.Resampling.BOX,
    "nearest": PILImage.Resampling.NEAREST,
}
# Interpolation order used when anti-aliasing is disabled
_SPLINE_ORDER = {"bicubic": 3, "bilinear": 1, "box": 0, "nearest": 0}
_UNSUPPORTED_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


class Image(BaseModel):
    """An sRGB image with pixels in [0, 1]."""

    pixels: np.ndarray
    colorspace: Literal["sRGB"] = "sRGB"
    source_path: Optional[str] = None

    class Config:
        arbitrary_types_allowed = True

    @validator("pixels")
    def validate_pixels(cls, v):
        arr = np.asarray(v, dtype=np.float32)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"pixels must be H x W x 3, got {arr.shape}")
        return np.clip(arr, 0.0, 1.0)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def size(self) -> Tuple[int, int]:
        return self.height, self.width


class FakeMinibatch(BaseModel):
    """
    M pseudo pairs cut from one image.

    Attributes:
        inputs: M x c x c x 3 degraded-then-upscaled crops
        targets: M x c x c x 3 crops acting as their own HR
        transforms: (top, left, flip_h, flip_v, quarter_turns) per pair
    """

    inputs: np.ndarray
    targets: np.ndarray
    transforms: List[Tuple[int, int, int, int, int]] = Field(default_factory=list)

    class Config:
        arbitrary_types_allowed = True

    @property
    def M(self) -> int:
        return int(self.targets.shape[0])


# ---- I/O --------------------------------------------------------------------


def load_image(path: str) -> Image:
    """Decode an 8-bit image file; grayscale is replicated to three channels."""
    try:
        with PILImage.open(path) as handle:
            handle.load()
            if handle.mode in _UNSUPPORTED_MODES:
                raise ImageIOError(
                    f"Unsupported bit depth in {path}",
                    {"mode": handle.mode},
                )
            if handle.mode in ("L", "LA", "1"):
                gray = np.asarray(handle.convert("L"), dtype=np.float32)
                pixels = np.repeat(gray[:, :, None], 3, axis=2)
            else:
                pixels = np.asarray(handle.convert("RGB"), dtype=np.float32)
    except FileNotFoundError:
        raise ImageIOError(f"Image not found: {path}")
    except UnidentifiedImageError as e:
        raise ImageIOError(f"Cannot decode image: {path}", {"error": str(e)})
    except OSError as e:
        raise ImageIOError(f"Cannot read image: {path}", {"error": str(e)})
    return Image(pixels=pixels / 255.0, source_path=str(path))


def save_image(image: Image, path: str) -> Path:
    """Write an 8-bit PNG or BMP; pixels are rounded to the nearest 1/255."""
    target = Path(path)
    if target.suffix.lower() not in SUPPORTED_IMAGE_SUFFIXES:
        raise ImageIOError(
            f"Unsupported output format: {target.suffix}",
            {"supported": list(SUPPORTED_IMAGE_SUFFIXES)},
        )
    quantized = np.round(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        PILImage.fromarray(quantized).save(target)
    except OSError as e:
        raise ImageIOError(f"Cannot write image: {path}", {"error": str(e)})
    return target


def list_images(directory: str) -> List[Path]:
    root = Path(directory)
    if not root.is_dir():
        raise ImageIOError(f"Not a directory: {directory}")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in SUPPORTED_IMAGE_SUFFIXES)


# ---- resampling -------------------------------------------------------------


def resample(pixels: np.ndarray, size: Tuple[int, int], kernel: str = "bicubic", antialias: bool = True) -> np.ndarray:
    """
    Resize an H x W x 3 array to `size` = (height, width).

    With `antialias` the kernel support is widened on downscaling (Pillow);
    without it the kernel is evaluated at the target grid only (scikit-image).
    """
    height, width = size
    if height < 1 or width < 1:
        raise ContractError("resample target must be at least 1 x 1", {"size": list(size)})
    if pixels.shape[:2] == (height, width):
        return np.array(pixels, dtype=np.float32, copy=True)
    if not antialias:
        out = sk_resize(
            pixels.astype(np.float64),
            (height, width, pixels.shape[2]),
            order=_SPLINE_ORDER[kernel],
            mode="edge",
            anti_aliasing=False,
            preserve_range=True,
        )
        return np.clip(out, 0.0, 1.0).astype(np.float32)
    channels = []
    for c in range(pixels.shape[2]):
        plane = PILImage.fromarray(np.ascontiguousarray(pixels[:, :, c], dtype=np.float32))
        resized = plane.resize((width, height), resample=_PIL_KERNELS[kernel])
        channels.append(np.asarray(resized, dtype=np.float32))
    return np.clip(np.stack(channels, axis=2), 0.0, 1.0)


def resample_batch(batch: np.ndarray, side: int, kernel: str = "bicubic") -> np.ndarray:
    """Resize every image of an M x H x W x 3 batch to side x side (bicubic, like `prepare_canvas`)."""
    if batch.shape[1:3] == (side, side):
        return batch
    return np.stack([resample(img, (side, side), kernel) for img in batch], axis=0)


def degrade(hr: Image, spec: DegradationSpec) -> Image:
    """
    Apply I_x = D(I_y; scale): crop to a multiple of the scale, then downsample.

    Raises:
        DegenerateInputError: if the scale exceeds a quarter of the shorter side
    """
    s = spec.scale
    if s > min(hr.height, hr.width) / 4:
        raise DegenerateInputError(
            f"Scale {s} too large for a {hr.height}x{hr.width} image",
            {"scale": s, "height": hr.height, "width": hr.width},
        )
    height, width = hr.height - hr.height % s, hr.width - hr.width % s
    pixels = resample(hr.pixels[:height, :width], (height // s, width // s), spec.down_kernel, spec.antialias)
    return Image(pixels=pixels, source_path=hr.source_path)


def upscale_linear(lr: Image, scale: int, size: Optional[Tuple[int, int]] = None) -> Image:
    """Bilinear upscaling by `scale`, or to an explicit (height, width)."""
    if scale < 2:
        raise ContractError("upscale scale must be at least 2", {"scale": scale})
    target = size or (lr.height * scale, lr.width * scale)
    return Image(pixels=resample(lr.pixels, target, "bilinear"), source_path=lr.source_path)


def upscale_bicubic(lr: Image, scale: int, size: Optional[Tuple[int, int]] = None) -> Image:
    """Bicubic upscaling; the conventional interpolation baseline."""
    if scale < 2:
        raise ContractError("upscale scale must be at least 2", {"scale": scale})
    target = size or (lr.height * scale, lr.width * scale)
    return Image(pixels=resample(lr.pixels, target, "bicubic"), source_path=lr.source_path)


def prepare_canvas(image: Image, mode: str) -> Image:
    """`resize256` resizes to the 256 x 256 working canvas; `native` leaves the image alone."""
    if mode == "native":
        return image
    if mode != "resize256":
        raise ContractError(f"Unknown canvas mode: {mode}")
    side = CANVAS_RESIZE_SIDE
    return Image(pixels=resample(image.pixels, (side, side), "bicubic"), source_path=image.source_path)


# ---- pseudo labels ----------------------------------------------------------


def dihedral(pixels: np.ndarray, flip_h: int, flip_v: int, quarter_turns: int) -> np.ndarray:
    out = pixels
    if flip_h:
        out = out[:, ::-1]
    if flip_v:
        out = out[::-1, :]
    if quarter_turns:
        out = np.rot90(out, quarter_turns, axes=(0, 1))
    return np.ascontiguousarray(out)


def make_fake_minibatch(
    lr: Image,
    spec: DegradationSpec,
    M: int,
    crop: int,
    rng_seed: int,
    augment: bool = True,
) -> FakeMinibatch:
    """
    Build M pseudo pairs from one image.

    Each target is a random square crop of `lr` (optionally flipped/rotated);
    its input is the crop degraded by `spec` and bilinearly upscaled back to the
    crop size. The same seed always yields the same batch.
    """
    if M < 1:
        raise ContractError("fake minibatch size must be at least 1", {"M": M})
    if crop > min(lr.height, lr.width) or crop < 1:
        raise ContractError(
            "crop larger than image",
            {"crop": crop, "height": lr.height, "width": lr.width},
        )
    rng = np.random.default_rng(rng_seed)
    inputs, targets, transforms = [], [], []
    for _ in range(M):
        top = int(rng.integers(0, lr.height - crop + 1))
        left = int(rng.integers(0, lr.width - crop + 1))
        if augment:
            flip_h, flip_v, turns = int(rng.integers(0, 2)), int(rng.integers(0, 2)), int(rng.integers(0, 4))
        else:
            flip_h, flip_v, turns = 0, 0, 0
        target = dihedral(lr.pixels[top:top + crop, left:left + crop], flip_h, flip_v, turns)
        degraded = degrade(Image(pixels=target), spec)
        upscaled = upscale_linear(degraded, spec.scale, size=(crop, crop))
        inputs.append(upscaled.pixels)
        targets.append(target)
        transforms.append((top, left, flip_h, flip_v, turns))
    return FakeMinibatch(inputs=np.stack(inputs), targets=np.stack(targets), transforms=transforms)


# ---- synthetic fixtures -----------------------------------------------------


def stripe_pattern(size: int = 64, period: int = 8) -> Image:
    """Colored diagonal-modulated stripes: structured, learnable, and not constant."""
    y, x = np.mgrid[0:size, 0:size].astype(np.float32)
    phase = 2.0 * np.pi * x / period
    pixels = np.stack([
        0.5 + 0.4 * np.sin(phase),
        0.5 + 0.4 * np.sin(phase + 2.0 * np.pi / 3.0),
        0.5 + 0.3 * np.cos(2.0 * np.pi * (x + y) / (2 * period)),
    ], axis=2)
    return Image(pixels=pixels)


def smooth_gradient(size: int = 64) -> Image:
    y, x = np.mgrid[0:size, 0:size].astype(np.float32) / max(size - 1, 1)
    return Image(pixels=np.stack([x, y, 0.5 * (x + y)], axis=2))


def checkerboard(size: int = 16, cell: int = 1) -> Image:
    y, x = np.mgrid[0:size, 0:size]
    board = (((x // cell) + (y // cell)) % 2).astype(np.float32)
    return Image(pixels=board)
