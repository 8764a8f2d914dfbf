"""Masked cosine-similarity tables and L2-norm importance scores.

Similarities are computed in float64 regardless of storage dtype. Pairs
ruled out by a mask are set to -inf so they can never win a best-match
comparison, even against similarity -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TokenSequence
from .errors import DimensionMismatch

# Denominator floor: a zero-norm vector scores 0 against everything
# instead of dividing by zero.
NORM_EPSILON = 1e-12


@dataclass(frozen=True)
class ScoreTable:
    """|S| x |D| float64 cosine similarities, -inf where masked out."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def cosine(a, b) -> float:
    """Cosine similarity a.b / max(|a||b|, eps), in float64."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dims differ: {a.shape[0]} vs {b.shape[0]}")
    denom = max(float(np.linalg.norm(a)) * float(np.linalg.norm(b)), NORM_EPSILON)
    return float(np.dot(a, b) / denom)


def similarity_table(sources, destinations, mask) -> ScoreTable:
    """Pairwise cosine table between source and destination vectors.

    Entry (i, j) is cosine(sources[i], destinations[j]) where mask[i, j]
    is true and -inf elsewhere.
    """
    src = np.asarray(sources, dtype=np.float64)
    dst = np.asarray(destinations, dtype=np.float64)
    if src.ndim != 2 or dst.ndim != 2 or src.shape[1] != dst.shape[1]:
        raise DimensionMismatch(
            f"source/destination dims differ: {src.shape} vs {dst.shape}"
        )
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (src.shape[0], dst.shape[0]):
        raise DimensionMismatch(
            f"mask shape {mask.shape} != ({src.shape[0]}, {dst.shape[0]})"
        )
    dots = src @ dst.T
    denom = np.maximum(
        np.outer(np.linalg.norm(src, axis=1), np.linalg.norm(dst, axis=1)),
        NORM_EPSILON,
    )
    values = np.where(mask, dots / denom, -np.inf)
    return ScoreTable(values=values)


def l2_scores(seq: TokenSequence) -> np.ndarray:
    """Per-token L2 norm in float64; the importance score used by pruning."""
    return np.linalg.norm(seq.data.astype(np.float64), axis=1)
