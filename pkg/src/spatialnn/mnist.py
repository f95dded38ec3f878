"""MNIST IDX files: byte-exact parsing, normalization, seeded batching.

The four standard files (train/test x images/labels) are read from disk,
optionally gzip-compressed (detected by magic bytes). Parsing is
single-shot and the resulting ImageSet is immutable in spirit: nothing
here mutates it, so it can be shared across threads.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from spatialnn.errors import ConfigError, FormatError, LengthError
from spatialnn.seeding import STREAM_BATCH, substream

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
ROWS = 28
COLS = 28

# Canonical file names, keyed by (split, kind).
STANDARD_FILES = {
    ("train", "images"): "train-images-idx3-ubyte",
    ("train", "labels"): "train-labels-idx1-ubyte",
    ("test", "images"): "t10k-images-idx3-ubyte",
    ("test", "labels"): "t10k-labels-idx1-ubyte",
}


def parse_idx_images(data):
    """Parse an IDX image file: magic 0x803, then count/rows/cols (big-endian
    u32 each), then count*rows*cols unsigned bytes. Returns (count, 28, 28) uint8."""
    if len(data) < 16:
        raise LengthError("image file truncated: %d bytes is shorter than the 16-byte header" % len(data))
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGE_MAGIC:
        raise FormatError("bad image magic 0x%08x (expected 0x%08x)" % (magic, IMAGE_MAGIC))
    if (rows, cols) != (ROWS, COLS):
        raise FormatError("expected %dx%d images, file declares %dx%d" % (ROWS, COLS, rows, cols))
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise LengthError("image payload length %d does not match header (expected %d bytes total)"
                          % (len(data) - 16, expected))
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def parse_idx_labels(data):
    """Parse an IDX label file: magic 0x801, big-endian u32 count, then
    count label bytes, each in 0..9. Returns (count,) uint8."""
    if len(data) < 8:
        raise LengthError("label file truncated: %d bytes is shorter than the 8-byte header" % len(data))
    magic, count = struct.unpack(">II", data[:8])
    if magic != LABEL_MAGIC:
        raise FormatError("bad label magic 0x%08x (expected 0x%08x)" % (magic, LABEL_MAGIC))
    if len(data) != 8 + count:
        raise LengthError("label payload length %d does not match declared count %d" % (len(data) - 8, count))
    labels = np.frombuffer(data, dtype=np.uint8, offset=8)
    if labels.size and labels.max() > 9:
        raise FormatError("label byte %d out of range 0..9" % int(labels.max()))
    return labels


def serialize_idx_images(images):
    """Inverse of parse_idx_images; parse -> serialize round-trips byte-for-byte."""
    arr = np.ascontiguousarray(images, dtype=np.uint8)
    header = struct.pack(">IIII", IMAGE_MAGIC, arr.shape[0], arr.shape[1], arr.shape[2])
    return header + arr.tobytes()


def serialize_idx_labels(labels):
    arr = np.ascontiguousarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, arr.shape[0]) + arr.tobytes()


@dataclass
class ImageSet:
    """Flattened, normalized images plus labels.

    images: (count, 784) float, values in [0, 1] unless standardized;
    labels: (count,) int in 0..9.
    """

    images: np.ndarray
    labels: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError("image count %d != label count %d" % (self.images.shape[0], self.labels.shape[0]))
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise FormatError("labels outside 0..9")
        if not self.standardized and self.images.size:
            lo, hi = float(self.images.min()), float(self.images.max())
            if lo < 0.0 or hi > 1.0:
                raise FormatError("pixel values outside [0, 1]: [%g, %g]" % (lo, hi))

    @property
    def count(self):
        return self.images.shape[0]


def normalize_and_flatten(raw, standardize=False, dtype=np.float64):
    """Scale raw uint8 images to [0, 1] and flatten row-major to width 784.

    With standardize=True the set is additionally shifted/scaled to zero
    mean and unit variance (an ablation; plain /255 is the default).
    """
    flat = np.asarray(raw, dtype=dtype).reshape(raw.shape[0], -1) / 255.0
    if standardize:
        mu = flat.mean()
        sd = flat.std()
        flat = (flat - mu) / (sd if sd > 0 else 1.0)
    return flat


def _read_file(path):
    with open(path, "rb") as f:
        head = f.read(2)
        rest = f.read()
    data = head + rest
    if head == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def load_image_set(images_path, labels_path, standardize=False, dtype=np.float64, limit=0):
    """Load one split from an image file and a label file (optionally .gz)."""
    raw = parse_idx_images(_read_file(images_path))
    labels = parse_idx_labels(_read_file(labels_path)).astype(np.int64)
    if limit:
        raw = raw[:limit]
        labels = labels[:limit]
    return ImageSet(normalize_and_flatten(raw, standardize=standardize, dtype=dtype), labels,
                    standardized=standardize)


@dataclass(frozen=True)
class BatchPlan:
    """Deterministic shuffling plan: PCG64 keyed by (seed, epoch)."""

    seed: int
    batch_size: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1, got %d" % self.batch_size)


def epoch_order(count, plan, epoch):
    """Permutation of range(count) for this epoch; identical (seed, epoch)
    always produce the identical order."""
    rng = substream(plan.seed, STREAM_BATCH, epoch)
    return rng.permutation(count)


def epoch_batches(image_set, plan, epoch):
    """Yield (inputs, labels) mini-batches covering the set exactly once.

    The final partial batch is included. Deterministic per (seed, epoch).
    """
    if plan.batch_size > image_set.count:
        raise ConfigError("batch size %d exceeds dataset size %d" % (plan.batch_size, image_set.count))
    order = epoch_order(image_set.count, plan, epoch)
    for start in range(0, image_set.count, plan.batch_size):
        idx = order[start:start + plan.batch_size]
        yield image_set.images[idx], image_set.labels[idx]
