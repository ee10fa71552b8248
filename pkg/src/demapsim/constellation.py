"""Unit-energy 8-PAM constellation with binary-reflected Gray labeling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BITS_PER_SYMBOL = 3
NUM_POINTS = 1 << BITS_PER_SYMBOL


def gray_code(n_bits: int) -> np.ndarray:
    """Binary-reflected Gray sequence: element i is i ^ (i >> 1)."""
    i = np.arange(1 << n_bits, dtype=int)
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """Equally spaced 8-PAM amplitudes with their 3-bit Gray labels.

    ``points`` are strictly increasing, ``labels[i]`` holds the bits
    (b1, b2, b3) of ``points[i]`` read MSB-first, and the scale ``d``
    normalizes the mean squared amplitude to 0.5 (unit energy for the
    QAM constellation built from two of these).
    """

    points: np.ndarray
    d: float
    labels: np.ndarray
    _label_to_index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        self.points.setflags(write=False)
        self.labels.setflags(write=False)
        lut = {tuple(lab): i for i, lab in enumerate(self.labels)}
        object.__setattr__(self, "_label_to_index", lut)

    def label_of(self, index: int) -> tuple[int, int, int]:
        b1, b2, b3 = self.labels[index]
        return (int(b1), int(b2), int(b3))

    def index_of_label(self, b1: int, b2: int, b3: int) -> int:
        return self._label_to_index[(b1, b2, b3)]


@dataclass(frozen=True)
class IndexSet:
    """Indices of constellation points whose label has bit k equal to b."""

    k: int
    b: int
    indices: tuple[int, ...]


def build_pam8() -> Constellation:
    """Construct the 8-PAM constellation.

    The amplitudes are {-7d, -5d, ..., +7d} with d = sqrt(1/42) so the
    mean squared amplitude is 21 d^2 = 0.5.  Point i carries the Gray
    label gray(i), lowest amplitude getting label 000.
    """
    d = float(np.sqrt(1.0 / 42.0))
    levels = np.arange(-(NUM_POINTS - 1), NUM_POINTS, 2, dtype=float)
    gray = gray_code(BITS_PER_SYMBOL)
    labels = [
        [(g >> (BITS_PER_SYMBOL - 1 - j)) & 1 for j in range(BITS_PER_SYMBOL)]
        for g in gray
    ]
    return Constellation(points=levels * d, d=d, labels=np.array(labels))


def map_bits(b1: int, b2: int, b3: int, c: Constellation) -> float:
    """Return the amplitude whose label equals (b1, b2, b3)."""
    for b in (b1, b2, b3):
        if b not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got ({b1}, {b2}, {b3})")
    return float(c.points[c.index_of_label(b1, b2, b3)])


def index_set(k: int, b: int, c: Constellation) -> IndexSet:
    """Indices of points whose bit k (1-indexed, MSB first) equals b."""
    if k not in (1, 2, 3):
        raise ValueError(f"bit position must be 1, 2 or 3, got {k}")
    if b not in (0, 1):
        raise ValueError(f"bit value must be 0 or 1, got {b}")
    idx = np.flatnonzero(c.labels[:, k - 1] == b)
    return IndexSet(k=k, b=b, indices=tuple(int(i) for i in idx))


def symbols_from_indices(indices: np.ndarray, c: Constellation) -> np.ndarray:
    """Amplitudes for an array of point indices."""
    return c.points[np.asarray(indices, dtype=int)]


def bits_from_indices(indices: np.ndarray, c: Constellation) -> np.ndarray:
    """Label bits, shape (..., 3), for an array of point indices."""
    return c.labels[np.asarray(indices, dtype=int)]
