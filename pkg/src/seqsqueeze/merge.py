"""Windowed bipartite merge passes and the iterative compression driver.

One pass splits the current sequence by parity into sources (odd
1-based positions) and destinations (even positions), lets each source
pick its most similar destination within a parity-index window, merges
the best-scoring sources, and reorders the survivors by representative
original position. Passes repeat until the target budget is reached.
An unbounded window gives the global variant of the same engine.

Everything is deterministic: similarity ties resolve to the smallest
destination parity index, ranking ties to the smallest source parity
index, and accumulation visits sources in ascending parity order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    MergeRecord,
    MergeTrace,
    PassRecord,
    Provenance,
    TokenSequence,
    target_length,
)
from .errors import CannotReachTarget, InsufficientMergeable, TooShort
from .similarity import NORM_EPSILON, ScoreTable, similarity_table


@dataclass(frozen=True)
class ParitySplit:
    """Parity partition of the current sequence.

    source_indices / dest_indices are 0-based row indices into the
    sequence; together they enumerate every row exactly once.
    """

    sequence: TokenSequence
    source_indices: np.ndarray
    dest_indices: np.ndarray

    @property
    def n_sources(self) -> int:
        return len(self.source_indices)

    @property
    def n_dests(self) -> int:
        return len(self.dest_indices)


@dataclass(frozen=True)
class PassPlan:
    """Best destination per source and the sources chosen to merge.

    best_dest[i] is the 0-based parity index of source i's best
    destination (-1 if every candidate is masked), best_score[i] the
    similarity there (-inf if none). selected lists the chosen source
    parity indices in selection-rank order.
    """

    best_dest: np.ndarray
    best_score: np.ndarray
    selected: np.ndarray


def parity_split(seq: TokenSequence) -> ParitySplit:
    """Split into sources (odd 1-based rows) and destinations (even rows)."""
    if seq.length < 2:
        raise TooShort(f"need at least 2 tokens to split, got {seq.length}")
    return ParitySplit(
        sequence=seq,
        source_indices=np.arange(0, seq.length, 2, dtype=np.int64),
        dest_indices=np.arange(1, seq.length, 2, dtype=np.int64),
    )


def window_mask(n_sources: int, n_dests: int, window: int | None) -> np.ndarray:
    """Boolean table of pairs whose parity-index gap is within the window.

    window=None means unbounded: every pair is allowed.
    """
    if n_sources < 1 or n_dests < 1:
        raise ValueError("mask needs at least one source and one destination")
    if window is None:
        return np.ones((n_sources, n_dests), dtype=bool)
    gap = np.abs(np.arange(n_sources)[:, None] - np.arange(n_dests)[None, :])
    return gap <= window


def _pass_scores(split: ParitySplit, window: int | None) -> ScoreTable:
    """Similarity table for one pass, -inf outside the window.

    A saturated window (covering every pair) takes the same dense path
    as the unbounded one, so the two are bit-identical; narrow windows
    fill only the valid diagonals.
    """
    src = split.sequence.data[split.source_indices].astype(np.float64)
    dst = split.sequence.data[split.dest_indices].astype(np.float64)
    n_src, n_dst = split.n_sources, split.n_dests
    if window is None or window >= max(n_src - 1, n_dst - 1):
        return similarity_table(src, dst, np.ones((n_src, n_dst), dtype=bool))
    values = np.full((n_src, n_dst), -np.inf)
    src_norm = np.linalg.norm(src, axis=1)
    dst_norm = np.linalg.norm(dst, axis=1)
    for offset in range(-window, window + 1):
        lo = max(0, -offset)
        hi = min(n_src - 1, n_dst - 1 - offset)
        if hi < lo:
            continue
        rows = np.arange(lo, hi + 1)
        cols = rows + offset
        dots = np.einsum("ij,ij->i", src[lo : hi + 1], dst[lo + offset : hi + 1 + offset])
        denom = np.maximum(src_norm[rows] * dst_norm[cols], NORM_EPSILON)
        values[rows, cols] = dots / denom
    return ScoreTable(values=values)


def plan_pass(split: ParitySplit, table: ScoreTable, r: int) -> PassPlan:
    """Pick each source's best destination and select the r best sources.

    Similarity ties go to the smallest destination parity index; ranking
    ties between sources go to the smallest source parity index.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    values = table.values
    if values.shape != (split.n_sources, split.n_dests):
        raise ValueError(
            f"table shape {values.shape} does not match split "
            f"({split.n_sources}, {split.n_dests})"
        )
    best_dest = np.argmax(values, axis=1)  # first max: smallest j on ties
    best_score = values[np.arange(split.n_sources), best_dest]
    has_candidate = np.isfinite(best_score)
    best_dest = np.where(has_candidate, best_dest, -1)
    mergeable = int(np.count_nonzero(has_candidate))
    if mergeable < r:
        raise InsufficientMergeable(
            f"asked for {r} merges but only {mergeable} sources have an in-window candidate"
        )
    # Stable sort keeps ascending source index among equal scores; -inf
    # rows sort last and can never enter the first r slots.
    ranked = np.argsort(-best_score, kind="stable")
    return PassPlan(best_dest=best_dest, best_score=best_score, selected=ranked[:r])


def apply_pass(
    seq: TokenSequence, plan: PassPlan, weighting: str = "paper-literal"
) -> tuple[TokenSequence, PassRecord]:
    """Execute one planned pass and return the shorter sequence plus its record.

    Each merged destination becomes a mean over itself and its merged
    sources: unweighted under "paper-literal", constituent-count-weighted
    under "size-weighted" (which keeps every output row the exact mean of
    its original constituents). Accumulation runs in float64 and rounds
    once to float32; untouched rows pass through bit-unchanged. Survivors
    are reordered by representative (minimum) original position.
    """
    split = parity_split(seq)
    src_idx, dst_idx = split.source_indices, split.dest_indices
    n_dst = split.n_dests

    selected = np.sort(np.asarray(plan.selected, dtype=np.int64))
    dest_of = plan.best_dest[selected]
    if (dest_of < 0).any():
        raise ValueError("plan selects a source with no destination")

    src_rows64 = seq.data[src_idx[selected]].astype(np.float64)
    acc = seq.data[dst_idx].astype(np.float64)
    if weighting == "size-weighted":
        weights = seq.counts.astype(np.float64)
        src_w = weights[src_idx[selected]]
        acc *= weights[dst_idx][:, None]
        total = weights[dst_idx].copy()
        np.add.at(acc, dest_of, src_rows64 * src_w[:, None])
        np.add.at(total, dest_of, src_w)
    elif weighting == "paper-literal":
        total = np.ones(n_dst)
        np.add.at(acc, dest_of, src_rows64)
        np.add.at(total, dest_of, 1.0)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")

    touched = np.zeros(n_dst, dtype=bool)
    touched[dest_of] = True
    dst_rows = seq.data[dst_idx].copy()
    dst_rows[touched] = (acc[touched] / total[touched, None]).astype(np.float32)

    dst_pos = seq.positions[dst_idx].copy()
    dst_cnt = seq.counts[dst_idx].copy()
    np.minimum.at(dst_pos, dest_of, seq.positions[src_idx[selected]])
    np.add.at(dst_cnt, dest_of, seq.counts[src_idx[selected]])

    unmatched = np.ones(split.n_sources, dtype=bool)
    unmatched[selected] = False
    unm_rows = seq.data[src_idx[unmatched]]
    unm_pos = seq.positions[src_idx[unmatched]]
    unm_cnt = seq.counts[src_idx[unmatched]]

    out_rows = np.concatenate([dst_rows, unm_rows], axis=0)
    out_pos = np.concatenate([dst_pos, unm_pos])
    out_cnt = np.concatenate([dst_cnt, unm_cnt])
    order = np.argsort(out_pos)  # representatives are distinct

    merges = tuple(
        MergeRecord(
            i=int(i) + 1,
            j=int(plan.best_dest[i]) + 1,
            score=float(plan.best_score[i]),
        )
        for i in plan.selected
    )
    record = PassRecord(
        input_length=seq.length,
        source_positions=tuple(int(p) for p in seq.positions[src_idx]),
        dest_positions=tuple(int(p) for p in seq.positions[dst_idx]),
        merges=merges,
    )
    new_seq = TokenSequence(
        data=out_rows[order], positions=out_pos[order], counts=out_cnt[order]
    )
    return new_seq, record


def fold_groups(
    groups: list[tuple[int, ...]], merges: tuple[MergeRecord, ...]
) -> list[tuple[int, ...]]:
    """Apply one pass's merges to per-token provenance groups.

    groups is ordered like the pass input sequence; the result is ordered
    like the pass output (by group minimum).
    """
    src_groups = groups[0::2]
    dst_groups = list(groups[1::2])
    merged_sources = set()
    for rec in merges:
        dst_groups[rec.j - 1] = tuple(
            sorted(dst_groups[rec.j - 1] + src_groups[rec.i - 1])
        )
        merged_sources.add(rec.i - 1)
    survivors = dst_groups + [
        g for i, g in enumerate(src_groups) if i not in merged_sources
    ]
    survivors.sort(key=lambda g: g[0])
    return survivors


def rebuild_trace(
    original_length: int,
    window: int | None,
    merge_lists: list[tuple[MergeRecord, ...]],
) -> tuple[MergeTrace, list[tuple[int, ...]]]:
    """Reconstruct full pass records (and final groups) from bare merges.

    Pass input lengths and parity assignments are fully determined by the
    original length and the merge lists, so traces can be stored as
    merges alone and rebuilt losslessly.
    """
    groups: list[tuple[int, ...]] = [(p,) for p in range(1, original_length + 1)]
    records = []
    for merges in merge_lists:
        src_groups = groups[0::2]
        dst_groups = groups[1::2]
        records.append(
            PassRecord(
                input_length=len(groups),
                source_positions=tuple(g[0] for g in src_groups),
                dest_positions=tuple(g[0] for g in dst_groups),
                merges=tuple(merges),
            )
        )
        groups = fold_groups(groups, merges)
    return MergeTrace(window=window, passes=tuple(records)), groups


def compress_merge(
    seq: TokenSequence,
    keep_ratio: float,
    window: int | None,
    weighting: str = "paper-literal",
) -> tuple[TokenSequence, MergeTrace, Provenance]:
    """Iterate merge passes until the sequence reaches its target budget.

    window=None removes the locality constraint (the global variant).
    Per pass, the merge count is min(tokens still to remove, sources with
    an in-window candidate). Returns the compressed sequence, the pass
    trace, and provenance mapping each output token to the input rows
    (1-based) it aggregates.
    """
    original_length = seq.length
    goal = target_length(keep_ratio, original_length)
    groups: list[tuple[int, ...]] = [(k,) for k in range(1, original_length + 1)]
    current = seq
    passes: list[PassRecord] = []
    while current.length > goal:
        split = parity_split(current)
        table = _pass_scores(split, window)
        mergeable = int(np.count_nonzero(np.isfinite(table.values.max(axis=1))))
        r = min(current.length - goal, mergeable)
        if r == 0:
            raise CannotReachTarget(
                f"no source has an in-window candidate at length {current.length} "
                f"(target {goal}, window {window})"
            )
        plan = plan_pass(split, table, r)
        current, record = apply_pass(current, plan, weighting)
        groups = fold_groups(groups, record.merges)
        passes.append(record)
    trace = MergeTrace(window=window, passes=tuple(passes))
    provenance = Provenance(
        method="ltbm" if window is not None else "global-merge",
        keep_ratio=keep_ratio,
        window=window,
        weighting=weighting,
        original_length=original_length,
        groups=tuple(groups),
    )
    return current, trace, provenance
