"""Shared data model and budget arithmetic for all compression methods.

A sequence is an L x D float32 matrix plus per-token metadata: the
1-based original position each token represents and how many original
tokens it aggregates. Fresh sequences have positions 1..L and all
counts 1; compressed sequences carry the surviving representatives.

All types here are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonFiniteInput

METHODS = ("ltbm", "global-merge", "uniavg", "global-topk", "segmentwise-topk")
WEIGHTINGS = ("paper-literal", "size-weighted")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TokenSequence:
    """Immutable token matrix with position/count metadata.

    data      -- (L, D) float32, every entry finite
    positions -- (L,) int64, strictly increasing 1-based original positions
    counts    -- (L,) int64, number of original tokens each row aggregates
    """

    data: np.ndarray
    positions: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        data = _frozen(np.asarray(self.data, dtype=np.float32))
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise EmptyInput(f"expected non-empty 2-D matrix, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise NonFiniteInput("token matrix contains NaN or Inf")
        positions = _frozen(np.asarray(self.positions, dtype=np.int64))
        counts = _frozen(np.asarray(self.counts, dtype=np.int64))
        if positions.shape != (data.shape[0],) or counts.shape != (data.shape[0],):
            raise ValueError("positions/counts must have one entry per token")
        if positions[0] < 1 or (np.diff(positions) <= 0).any():
            raise ValueError("positions must be strictly increasing and >= 1")
        if (counts < 1).any():
            raise ValueError("counts must all be >= 1")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "counts", counts)

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @staticmethod
    def fresh(data: np.ndarray) -> "TokenSequence":
        """Wrap a raw matrix as an uncompressed sequence (positions 1..L, counts 1)."""
        data = np.asarray(data)
        length = data.shape[0] if data.ndim == 2 else 0
        return TokenSequence(
            data=data,
            positions=np.arange(1, length + 1, dtype=np.int64),
            counts=np.ones(length, dtype=np.int64),
        )


@dataclass(frozen=True)
class CompressionConfig:
    """Method selector plus the knobs the methods understand.

    window is the maximum parity-index gap for ltbm; None means unbounded
    (global-merge always behaves as unbounded regardless of this field).
    """

    method: str
    keep_ratio: float
    window: int | None = 8
    weighting: str = "paper-literal"
    segments: int = 8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (0.0 < self.keep_ratio <= 1.0):
            raise ValueError(f"keep_ratio must be in (0, 1], got {self.keep_ratio}")
        if self.window is not None and (not isinstance(self.window, int) or self.window < 0):
            raise ValueError(f"window must be a non-negative integer or None, got {self.window!r}")
        if self.method == "ltbm" and self.window is None:
            raise ValueError("ltbm requires a finite window; use global-merge for unbounded matching")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}; expected one of {WEIGHTINGS}")
        if not isinstance(self.segments, int) or self.segments < 1:
            raise ValueError(f"segments must be a positive integer, got {self.segments!r}")


@dataclass(frozen=True)
class MergeRecord:
    """One source-to-destination merge, in 1-based parity indices of its pass."""

    i: int
    j: int
    score: float


@dataclass(frozen=True)
class PassRecord:
    """One merge pass: the split it saw and the merges it performed.

    source_positions / dest_positions are the representative original
    positions of the pass input tokens, in parity order. merges are listed
    in selection-rank order (best score first, ties by smaller i).
    """

    input_length: int
    source_positions: tuple[int, ...]
    dest_positions: tuple[int, ...]
    merges: tuple[MergeRecord, ...]


@dataclass(frozen=True)
class MergeTrace:
    """Every pass of one merge run, sufficient to replay it exactly.

    window is the parity-gap bound active for the run (None = unbounded);
    kept here so the window constraint is checkable from the trace alone.
    """

    window: int | None
    passes: tuple[PassRecord, ...] = ()

    def __post_init__(self):
        lengths = [p.input_length for p in self.passes]
        if any(b >= a for a, b in zip(lengths, lengths[1:])):
            raise ValueError("pass input lengths must strictly decrease")
        for rec in self.passes:
            seen = set()
            for m in rec.merges:
                if m.i in seen:
                    raise ValueError(f"source parity index {m.i} merged twice in one pass")
                seen.add(m.i)
                if self.window is not None and abs(m.i - m.j) > self.window:
                    raise ValueError(f"merge ({m.i}, {m.j}) violates window {self.window}")


EMPTY_TRACE = MergeTrace(window=None, passes=())


@dataclass(frozen=True)
class Provenance:
    """Final mapping from output tokens back to original positions.

    groups[k] is the sorted tuple of 1-based original positions composing
    output token k; groups are pairwise disjoint and ordered by their
    minimum. Positions removed outright (norm pruning) are listed in
    `dropped`; groups and dropped together partition 1..original_length.
    """

    method: str
    keep_ratio: float
    window: int | None
    weighting: str
    original_length: int
    groups: tuple[tuple[int, ...], ...]
    dropped: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.groups:
            raise ValueError("provenance must have at least one group")
        covered: set[int] = set()
        prev_min = 0
        for g in self.groups:
            if not g or list(g) != sorted(g):
                raise ValueError("each group must be a non-empty sorted tuple")
            if g[0] <= prev_min:
                raise ValueError("group minima must be strictly increasing")
            prev_min = g[0]
            if covered & set(g):
                raise ValueError("groups must be pairwise disjoint")
            covered |= set(g)
        if covered & set(self.dropped):
            raise ValueError("dropped positions overlap a group")
        covered |= set(self.dropped)
        if covered != set(range(1, self.original_length + 1)):
            raise ValueError(
                f"groups plus dropped must partition 1..{self.original_length}"
            )

    @property
    def output_length(self) -> int:
        return len(self.groups)

    @staticmethod
    def identity(config: CompressionConfig, length: int) -> "Provenance":
        return Provenance(
            method=config.method,
            keep_ratio=config.keep_ratio,
            window=config.window if config.method == "ltbm" else None,
            weighting=config.weighting,
            original_length=length,
            groups=tuple((p,) for p in range(1, length + 1)),
        )


def target_length(keep_ratio: float, length: int) -> int:
    """Compressed token budget: max(1, round(keep_ratio * length)).

    `round` is half-away-from-zero, so 4.5 -> 5; the result is clamped
    to [1, length].
    """
    if not (0.0 < keep_ratio <= 1.0):
        raise ValueError(f"keep_ratio must be in (0, 1], got {keep_ratio}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    scaled = float(keep_ratio) * length
    rounded = math.floor(scaled + 0.5)  # half away from zero for positive inputs
    return max(1, min(rounded, length))


def validate_sequence(raw) -> TokenSequence:
    """Check a raw L x D matrix and wrap it as a fresh TokenSequence.

    Raises EmptyInput when L or D is zero and NonFiniteInput when any
    entry is NaN/Inf, including values that overflow float32.
    """
    arr = np.asarray(raw)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise EmptyInput(f"expected non-empty 2-D matrix, got shape {arr.shape}")
    wide = arr.astype(np.float64, copy=False)
    if not np.isfinite(wide).all():
        raise NonFiniteInput("input matrix contains NaN or Inf")
    with np.errstate(over="ignore"):  # the cast itself is the overflow probe
        narrow = wide.astype(np.float32)
    if not np.isfinite(narrow).all():
        raise NonFiniteInput("input matrix overflows float32")
    return TokenSequence.fresh(narrow)
