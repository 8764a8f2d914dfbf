"""Shared helpers for the test suite.

Most tests build inputs from seeded gaussians so every run sees the same
bytes. The helpers return plain arrays or fresh TokenSequences; anything
method-specific lives in the individual test modules.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from seqsqueeze.core import TokenSequence

FIXTURES = Path(__file__).parent / "fixtures"


def gaussian_rows(length: int, dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((length, dim)).astype(np.float32)


def fresh_sequence(length: int, dim: int, seed: int = 0) -> TokenSequence:
    return TokenSequence.fresh(gaussian_rows(length, dim, seed))
