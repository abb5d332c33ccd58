"""Dataset ingestion, binarization, synthetic generators, and file emission.

Two on-disk dataset formats are understood:

* IDX image files (big-endian, magic 0x00000803), optionally gzipped;
  pixel intensities are binarized stochastically before training.
* A packed-bit container: magic "GBZD", little-endian u32 N, u32 D,
  then ceil(N*D/8) bytes of row-major bits, most significant bit first.

Sample grids are emitted as binary PGM (P5).
"""

from __future__ import annotations

import gzip
import hashlib
import struct
from dataclasses import dataclass

import numpy as np

SPLITS = ("train", "valid", "test")

PACKED_MAGIC = b"GBZD"
IDX_IMAGE_MAGIC = 0x00000803


@dataclass
class Dataset:
    """Binary design matrix plus its split tag."""

    examples: np.ndarray  # (N, D) uint8 entries in {0, 1}
    split: str = "train"

    def __post_init__(self):
        self.examples = np.asarray(self.examples)
        if self.examples.ndim != 2:
            raise ValueError("examples must be a 2-d (N, D) array")
        if self.examples.size and not np.isin(self.examples, (0, 1)).all():
            raise ValueError("dataset entries must be binary")
        self.examples = self.examples.astype(np.uint8)
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")

    @property
    def num_examples(self) -> int:
        return self.examples.shape[0]

    @property
    def num_visible(self) -> int:
        return self.examples.shape[1]

    def to_float(self) -> np.ndarray:
        return self.examples.astype(np.float64)


def load_idx_images(path: str) -> np.ndarray:
    """(N, rows, cols) uint8 intensities from an IDX image file (gz ok).

    Parse failures report the byte offset at which the file went wrong.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:2] == b"\x1f\x8b":
        blob = gzip.decompress(blob)
    if len(blob) < 16:
        raise ValueError(
            f"IDX header truncated at byte offset {len(blob)} in {path!r}"
        )
    magic, n, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise ValueError(
            f"bad IDX magic 0x{magic:08X} at byte offset 0 in {path!r} "
            f"(expected 0x{IDX_IMAGE_MAGIC:08X})"
        )
    need = n * rows * cols
    have = len(blob) - 16
    if have < need:
        raise ValueError(
            f"IDX data truncated: expected {need} bytes at byte offset 16, "
            f"found {have} in {path!r}"
        )
    data = np.frombuffer(blob, dtype=np.uint8, count=need, offset=16)
    return data.reshape(n, rows, cols).copy()


def stochastic_binarize(intensities, rng, split: str = "train") -> Dataset:
    """Each pixel fires with probability intensity / 255, independently."""
    arr = np.asarray(intensities, dtype=np.float64)
    if arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 255.0:
        raise ValueError("intensities must lie in [0, 255]")
    flat = arr.reshape(arr.shape[0], -1) if arr.ndim > 2 else np.atleast_2d(arr)
    gen = rng.generator() if hasattr(rng, "generator") else rng
    bits = (gen.random(flat.shape) < flat / 255.0).astype(np.uint8)
    return Dataset(bits, split=split)


def synthetic_patterns(
    num_visible: int = 16,
    num_patterns: int = 4,
    noise: float = 0.05,
    num_examples: int = 2000,
    seed: int = 0,
    split: str = "train",
) -> Dataset:
    """Random binary prototypes, each example a prototype with bits flipped
    independently with probability `noise`. Deterministic given the seed."""
    if num_patterns < 1 or num_visible < 1 or num_examples < 0:
        raise ValueError("pattern, visible, and example counts must be positive")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    gen = np.random.default_rng(seed)
    prototypes = gen.integers(0, 2, size=(num_patterns, num_visible), dtype=np.uint8)
    which = gen.integers(0, num_patterns, size=num_examples)
    flips = (gen.random((num_examples, num_visible)) < noise).astype(np.uint8)
    return Dataset(prototypes[which] ^ flips, split=split)


# ---------------------------------------------------------------------------
# packed-bit container
# ---------------------------------------------------------------------------


def write_packed(path: str, dataset: Dataset) -> None:
    with open(path, "wb") as f:
        f.write(_packed_bytes(dataset))


def _packed_bytes(dataset: Dataset) -> bytes:
    n, d = dataset.examples.shape
    bits = np.packbits(dataset.examples.reshape(-1))  # MSB first, zero padded
    return PACKED_MAGIC + struct.pack("<II", n, d) + bits.tobytes()


def read_packed(path: str, split: str = "train") -> Dataset:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != PACKED_MAGIC:
        raise ValueError(
            f"bad magic {blob[:4]!r} at byte offset 0 in {path!r} "
            f"(expected {PACKED_MAGIC!r})"
        )
    if len(blob) < 12:
        raise ValueError(f"packed header truncated at byte offset {len(blob)}")
    n, d = struct.unpack("<II", blob[4:12])
    need = (n * d + 7) // 8
    have = len(blob) - 12
    if have < need:
        raise ValueError(
            f"packed data truncated: expected {need} bytes at byte offset 12, "
            f"found {have} in {path!r}"
        )
    raw = np.frombuffer(blob, dtype=np.uint8, count=need, offset=12)
    bits = np.unpackbits(raw, count=n * d).reshape(n, d)
    return Dataset(bits, split=split)


def load_dataset(path: str, binarize_seed: int = 0, split: str = "train") -> Dataset:
    """Sniff the format by magic: packed container, or IDX (binarized)."""
    with open(path, "rb") as f:
        head = f.read(4)
    if head == PACKED_MAGIC:
        return read_packed(path, split=split)
    images = load_idx_images(path)
    gen = np.random.default_rng(binarize_seed)
    return stochastic_binarize(images, gen, split=split)


def dataset_hash(dataset: Dataset) -> str:
    """sha256 of the packed serialization: stable content fingerprint."""
    return hashlib.sha256(_packed_bytes(dataset)).hexdigest()


# ---------------------------------------------------------------------------
# image emission
# ---------------------------------------------------------------------------


def tile_binary_images(
    samples: np.ndarray, image_shape: tuple[int, int] | None = None, pad: int = 1
) -> np.ndarray:
    """Arrange (n, D) binary samples into one grayscale grid (uint8).

    Without an explicit image shape, D is shown square when possible and
    as a single row of pixels otherwise. Cells are separated by a gray gutter.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("samples must be (n, D)")
    n, d = samples.shape
    if image_shape is None:
        side = int(round(np.sqrt(d)))
        image_shape = (side, d // side) if side * side == d else (1, d)
    h, w = image_shape
    if h * w != d:
        raise ValueError(f"image shape {image_shape} does not cover {d} pixels")
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    grid = np.full(
        (rows * h + pad * (rows + 1), cols * w + pad * (cols + 1)), 96, dtype=np.uint8
    )
    for i in range(n):
        r, c = divmod(i, cols)
        top = pad + r * (h + pad)
        left = pad + c * (w + pad)
        cell = (samples[i].reshape(h, w) * 255).astype(np.uint8)
        grid[top : top + h, left : left + w] = cell
    return grid


def write_pgm(path: str, image: np.ndarray) -> None:
    """Binary PGM (P5), maxval 255."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2-d")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.tobytes())
