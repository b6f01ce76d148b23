"""
Image datasets: IDX codec, normalization, synthetic mini-digits and the
reduced validation split
"""

import gzip
import struct
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError, IDXParseError

logger = logging.getLogger(__name__)

IDX_LABELS_MAGIC = 0x00000801
IDX_IMAGES_MAGIC = 0x00000803
GZIP_PREFIX = b"\x1f\x8b"
MAX_PAYLOAD = 2 ** 31

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def parse_idx(data: bytes, expected: Optional[str] = None) -> np.ndarray:
    """
    Decode an IDX container holding unsigned bytes

    Args:
        data: Raw file contents, optionally gzip-compressed
        expected: "images" or "labels" to insist on one kind

    Returns:
        uint8 array shaped by the header dims ([N] for labels, [N, H, W] for images)
    """
    if data[:2] == GZIP_PREFIX:
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as e:
            raise IDXParseError(f"Corrupt gzip stream ({e})", 0)

    if len(data) < 4:
        raise IDXParseError("Truncated header", len(data))

    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_LABELS_MAGIC:
        kind, ndim = "labels", 1
    elif magic == IDX_IMAGES_MAGIC:
        kind, ndim = "images", 3
    else:
        raise IDXParseError(f"Bad magic number 0x{magic:08x}", 0)

    if expected is not None and expected != kind:
        raise IDXParseError(f"Expected an IDX {expected} file, found {kind}", 0)

    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise IDXParseError("Truncated dimension header", len(data))
    dims = struct.unpack(f">{ndim}I", data[4:header_end])

    size = 1
    for axis, dim in enumerate(dims):
        if dim == 0:
            raise IDXParseError(f"Zero-length dimension {axis} ({dims})", 4 + 4 * axis)
        size *= dim
        if size > MAX_PAYLOAD:
            raise IDXParseError(f"Dimension overflow ({dims})", 4 + 4 * axis)

    payload = len(data) - header_end
    if payload < size:
        raise IDXParseError(f"Truncated payload: expected {size} bytes, found {payload}", len(data))
    if payload > size:
        raise IDXParseError(f"Trailing bytes after {size}-byte payload", header_end + size)

    return np.frombuffer(data, dtype=np.uint8, offset=header_end).reshape(dims).copy()


def serialize_idx(array: np.ndarray) -> bytes:
    """Encode a uint8 label vector [N] or image stack [N, H, W] as IDX"""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ConfigurationError(f"IDX payload must be uint8, got {array.dtype}")
    if array.ndim == 1:
        magic = IDX_LABELS_MAGIC
    elif array.ndim == 3:
        magic = IDX_IMAGES_MAGIC
    else:
        raise ConfigurationError(f"IDX supports 1 or 3 dims, got {array.ndim}")
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def normalize_images(raw: np.ndarray) -> np.ndarray:
    """uint8 [N, H, W] -> float64 [N, 1, H, W] in [0, 1]"""
    return (np.asarray(raw, dtype=np.float64) / 255.0)[:, None, :, :]


@dataclass
class Dataset:
    """Images [N, 1, H, W] in [0, 1] with integer labels in [0, n_classes)"""
    images: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[1] != 1:
            raise ConfigurationError(f"images must be [N, 1, H, W], got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ConfigurationError(
                f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ConfigurationError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.n_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass
class ValidationSplit:
    full_validation: Dataset
    reduced_validation: Dataset


def build_validation_split(full: Dataset, size: int, rng: np.random.Generator) -> ValidationSplit:
    """Reduced set = first `size` samples of a seeded shuffle; fixed for the run"""
    if size > len(full):
        raise ConfigurationError(f"Reduced validation size {size} exceeds {len(full)} available samples")
    order = rng.permutation(len(full))
    return ValidationSplit(full_validation=full, reduced_validation=full.subset(order[:size]))


def _read_idx_file(directory: Path, stem: str, expected: str) -> np.ndarray:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            try:
                return parse_idx(candidate.read_bytes(), expected)
            except IDXParseError as e:
                raise IDXParseError(f"{candidate}: malformed {expected} file", e.offset) from e
    raise FileNotFoundError(f"Missing MNIST file {stem}[.gz] in {directory}")


def load_mnist(data_dir: Union[str, Path]) -> Tuple[Dataset, Dataset]:
    """
    Load the standard MNIST train and test splits from IDX files

    Args:
        data_dir: Directory holding the four IDX files (plain or .gz)

    Returns:
        (train, test) datasets
    """
    directory = Path(data_dir)
    train = Dataset(normalize_images(_read_idx_file(directory, MNIST_FILES["train_images"], "images")),
                    _read_idx_file(directory, MNIST_FILES["train_labels"], "labels"), 10)
    test = Dataset(normalize_images(_read_idx_file(directory, MNIST_FILES["test_images"], "images")),
                   _read_idx_file(directory, MNIST_FILES["test_labels"], "labels"), 10)
    logger.info(f"Loaded MNIST from {directory}: {len(train)} train, {len(test)} test images")
    return train, test


def make_synthetic_digits(n_samples: int, n_classes: int, image_size: int, noise: float,
                          rng: np.random.Generator, prototype_seed: int = 1234) -> Tuple[Dataset, np.ndarray]:
    """
    Mini-MNIST stand-in: each class is a fixed blob pattern plus pixel noise

    Images are quantized through uint8 so they are format-identical to
    decoded IDX data.

    Args:
        n_samples: Number of images (classes are balanced)
        n_classes: Number of classes
        image_size: Side length of the square images
        noise: Std of the Gaussian pixel noise
        rng: Random generator for sampling
        prototype_seed: Seed of the class prototypes, shared across splits

    Returns:
        (dataset, raw uint8 images [N, H, W])
    """
    if n_classes < 2 or n_samples < n_classes:
        raise ConfigurationError("Synthetic digits need >= 2 classes and at least one sample per class")

    proto_rng = np.random.default_rng(prototype_seed)
    yy, xx = np.mgrid[0:image_size, 0:image_size].astype(np.float64)
    prototypes = np.zeros((n_classes, image_size, image_size))
    for c in range(n_classes):
        for _ in range(3):
            cy, cx = proto_rng.uniform(0, image_size - 1, size=2)
            width = proto_rng.uniform(0.8, 1.8)
            prototypes[c] += np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width ** 2))
        prototypes[c] /= prototypes[c].max()

    labels = rng.permutation(np.arange(n_samples) % n_classes)
    images = prototypes[labels] + noise * rng.standard_normal((n_samples, image_size, image_size))
    raw = np.round(np.clip(images, 0.0, 1.0) * 255).astype(np.uint8)
    return Dataset(normalize_images(raw), labels, n_classes), raw


def load_datasets(config, seed: int) -> Tuple[Dataset, ValidationSplit]:
    """
    Build the training pool source and the validation split for an experiment

    Args:
        config: ExperimentConfig
        seed: Seed for synthetic sampling and the validation shuffle

    Returns:
        (training dataset, validation split)
    """
    data_cfg = config.data
    rng = np.random.default_rng([seed, 7])

    if data_cfg.dataset == "mnist":
        train, full_validation = load_mnist(data_cfg.data_dir)
    else:
        train, _ = make_synthetic_digits(data_cfg.synthetic_samples, data_cfg.synthetic_classes,
                                         data_cfg.synthetic_image_size, data_cfg.synthetic_noise, rng)
        full_validation, _ = make_synthetic_digits(data_cfg.synthetic_validation, data_cfg.synthetic_classes,
                                                   data_cfg.synthetic_image_size, data_cfg.synthetic_noise, rng)
        logger.info(f"Generated synthetic digits: {len(train)} train, {len(full_validation)} validation "
                    f"({data_cfg.synthetic_image_size}x{data_cfg.synthetic_image_size}, "
                    f"{data_cfg.synthetic_classes} classes)")

    size = min(config.env.validation_size, len(full_validation))
    return train, build_validation_split(full_validation, size, rng)
