"""Non-merging compression baselines: uniform pooling and norm-based top-k.

All three share the budget convention of the merge engine except UniAvg,
whose integral pooling factor only approximates the budget (and cannot
realize a 0.75 keep ratio at all).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Provenance, TokenSequence, target_length
from .errors import UnavailableRatio
from .similarity import l2_scores


def pooling_factor(keep_ratio: float) -> int:
    """Integral pooling factor for uniform averaging: round(1/ρ), at least 2."""
    k = math.floor(1.0 / keep_ratio + 0.5)
    if k < 2:
        raise UnavailableRatio(
            f"uniform pooling needs factor >= 2, keep ratio {keep_ratio} gives {k}"
        )
    return k


def compress_uniavg(seq: TokenSequence, keep_ratio: float) -> TokenSequence:
    """Mean-pool consecutive chunks of round(1/ρ) tokens.

    Output length is ceil(L/k), an approximation of the usual budget; the
    final chunk may be shorter. Means accumulate in float64 and round
    once to float32.
    """
    k = pooling_factor(keep_ratio)
    length = seq.length
    n_out = (length + k - 1) // k
    data64 = seq.data.astype(np.float64)
    rows = np.empty((n_out, seq.dim), dtype=np.float32)
    positions = np.empty(n_out, dtype=np.int64)
    counts = np.empty(n_out, dtype=np.int64)
    for m in range(n_out):
        lo, hi = m * k, min((m + 1) * k, length)
        rows[m] = (np.add.reduce(data64[lo:hi], axis=0) / (hi - lo)).astype(np.float32)
        positions[m] = seq.positions[lo]
        counts[m] = int(seq.counts[lo:hi].sum())
    return TokenSequence(data=rows, positions=positions, counts=counts)


def uniavg_groups(length: int, keep_ratio: float) -> tuple[tuple[int, ...], ...]:
    """Provenance groups for uniform pooling: contiguous 1-based row ranges."""
    k = pooling_factor(keep_ratio)
    return tuple(
        tuple(range(lo + 1, min(lo + k, length) + 1)) for lo in range(0, length, k)
    )


def _select_topk(norms: np.ndarray, rows: np.ndarray, quota: int) -> np.ndarray:
    """Row indices of the quota largest norms, ties to the earlier row.

    Returned ascending so the kept tokens stay in temporal order.
    """
    ranked = np.lexsort((rows, -norms))  # primary: norm desc, secondary: row asc
    return np.sort(rows[ranked[:quota]])


def _topk_sequence(
    seq: TokenSequence, kept_rows: np.ndarray, method: str, keep_ratio: float
) -> tuple[TokenSequence, Provenance]:
    """Slice kept rows bit-unchanged and record singleton provenance groups."""
    out = TokenSequence(
        data=seq.data[kept_rows],
        positions=seq.positions[kept_rows],
        counts=seq.counts[kept_rows],
    )
    kept_set = set(int(r) for r in kept_rows)
    provenance = Provenance(
        method=method,
        keep_ratio=keep_ratio,
        window=None,
        weighting="paper-literal",
        original_length=seq.length,
        groups=tuple((int(r) + 1,) for r in kept_rows),
        dropped=tuple(r + 1 for r in range(seq.length) if r not in kept_set),
    )
    return out, provenance


def compress_global_topk(
    seq: TokenSequence, keep_ratio: float
) -> tuple[TokenSequence, Provenance]:
    """Keep the max(1, round(ρL)) largest-L2-norm tokens in original order."""
    goal = target_length(keep_ratio, seq.length)
    norms = l2_scores(seq)
    kept = _select_topk(norms, np.arange(seq.length, dtype=np.int64), goal)
    return _topk_sequence(seq, kept, "global-topk", keep_ratio)


@dataclass(frozen=True)
class SegmentPartition:
    """Contiguous near-equal segments with per-segment keep quotas.

    bounds are half-open 0-based row ranges covering the sequence; quotas
    sum to the overall target and never exceed segment lengths.
    """

    bounds: tuple[tuple[int, int], ...]
    quotas: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.bounds or len(self.bounds) != len(self.quotas):
            raise ValueError("bounds and quotas must be non-empty and aligned")
        cursor = 0
        for (lo, hi), quota in zip(self.bounds, self.quotas):
            if lo != cursor or hi <= lo:
                raise ValueError(f"segments must be contiguous and non-empty, got {self.bounds}")
            if not 0 <= quota <= hi - lo:
                raise ValueError(f"quota {quota} outside [0, {hi - lo}]")
            cursor = hi

    @property
    def n_segments(self) -> int:
        return len(self.bounds)


def segment_partition(
    length: int, n_segments: int, keep_total: int, norms: np.ndarray
) -> SegmentPartition:
    """Split rows into min(n_segments, L) near-equal segments and apportion quotas.

    The first L mod n segments take one extra row. Quotas follow
    largest-remainder apportionment of keep_total proportional to segment
    length (remainders compared exactly in integers, ties to the earlier
    segment). If a quota ever exceeded its segment, the excess moves to
    segments with spare capacity in descending order of their best
    unkept norm; the arithmetic above never actually produces that case,
    but the guard keeps the invariant unconditional.
    """
    n = min(n_segments, length)
    base_len, extra = divmod(length, n)
    lengths = [base_len + 1] * extra + [base_len] * (n - extra)
    bounds = []
    cursor = 0
    for seg_len in lengths:
        bounds.append((cursor, cursor + seg_len))
        cursor += seg_len

    quotas = [keep_total * seg_len // length for seg_len in lengths]
    remainders = [keep_total * seg_len - q * length for seg_len, q in zip(lengths, quotas)]
    shortfall = keep_total - sum(quotas)
    for s in sorted(range(n), key=lambda s: (-remainders[s], s))[:shortfall]:
        quotas[s] += 1

    overflow = sum(max(0, q - seg_len) for q, seg_len in zip(quotas, lengths))
    quotas = [min(q, seg_len) for q, seg_len in zip(quotas, lengths)]
    while overflow > 0:
        candidates = [s for s in range(n) if quotas[s] < lengths[s]]
        best = max(
            candidates,
            key=lambda s: (
                _best_unkept_norm(norms, bounds[s], quotas[s]),
                -s,
            ),
        )
        quotas[best] += 1
        overflow -= 1

    return SegmentPartition(bounds=tuple(bounds), quotas=tuple(quotas))


def _best_unkept_norm(norms: np.ndarray, bound: tuple[int, int], quota: int) -> float:
    """Largest norm a segment would gain by raising its quota by one."""
    lo, hi = bound
    seg = np.sort(norms[lo:hi])[::-1]
    return float(seg[quota])


def compress_segmentwise_topk(
    seq: TokenSequence, keep_ratio: float, n_segments: int
) -> tuple[TokenSequence, Provenance]:
    """Top-k by L2 norm within contiguous temporal segments.

    Per-segment quotas sum to the global target, so the budget contract
    matches the global variant; with a single segment the two are
    identical.
    """
    goal = target_length(keep_ratio, seq.length)
    norms = l2_scores(seq)
    partition = segment_partition(seq.length, n_segments, goal, norms)
    kept_parts = []
    for (lo, hi), quota in zip(partition.bounds, partition.quotas):
        if quota == 0:
            continue
        rows = np.arange(lo, hi, dtype=np.int64)
        kept_parts.append(_select_topk(norms[lo:hi], rows, quota))
    kept = np.concatenate(kept_parts) if kept_parts else np.empty(0, dtype=np.int64)
    return _topk_sequence(seq, kept, "segmentwise-topk", keep_ratio)
