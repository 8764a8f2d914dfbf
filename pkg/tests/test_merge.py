import numpy as np
import pytest

from seqsqueeze.core import MergeRecord, TokenSequence, target_length
from seqsqueeze.errors import InsufficientMergeable, TooShort
from seqsqueeze.merge import (
    apply_pass,
    compress_merge,
    fold_groups,
    parity_split,
    plan_pass,
    rebuild_trace,
    window_mask,
)
from seqsqueeze.similarity import ScoreTable

from conftest import fresh_sequence

NEG = -np.inf


def test_parity_split_even_length():
    split = parity_split(fresh_sequence(4, 2))
    assert list(split.source_indices) == [0, 2]
    assert list(split.dest_indices) == [1, 3]


def test_parity_split_odd_length_has_extra_source():
    split = parity_split(fresh_sequence(5, 2))
    assert split.n_sources == 3
    assert split.n_dests == 2


def test_parity_split_needs_two_tokens():
    with pytest.raises(TooShort):
        parity_split(fresh_sequence(1, 2))


def test_window_mask_zero_is_diagonal():
    mask = window_mask(3, 3, 0)
    assert (mask == np.eye(3, dtype=bool)).all()


def test_window_mask_clips_at_edges():
    mask = window_mask(4, 3, 1)
    # the fourth source reaches only the third destination
    assert list(mask[3]) == [False, False, True]
    assert list(mask[0]) == [True, True, False]


def test_window_mask_unbounded_allows_everything():
    assert window_mask(3, 5, None).all()


def test_plan_pass_picks_best_destination():
    split = parity_split(fresh_sequence(4, 2))
    table = ScoreTable(values=np.array([[0.9, NEG], [NEG, 0.2]]))
    plan = plan_pass(split, table, r=1)
    assert list(plan.selected) == [0]
    assert plan.best_dest[0] == 0
    assert plan.best_score[0] == 0.9


def test_plan_pass_score_tie_goes_to_smaller_destination():
    split = parity_split(fresh_sequence(4, 2))
    table = ScoreTable(values=np.array([[0.7, 0.7], [0.1, 0.3]]))
    plan = plan_pass(split, table, r=2)
    assert plan.best_dest[0] == 0
    assert plan.best_dest[1] == 1


def test_plan_pass_rank_tie_goes_to_smaller_source():
    split = parity_split(fresh_sequence(6, 2))
    table = ScoreTable(values=np.array([[0.5, NEG, NEG], [0.5, NEG, NEG], [0.5, NEG, NEG]]))
    plan = plan_pass(split, table, r=2)
    assert list(plan.selected) == [0, 1]


def test_plan_pass_orders_selection_by_score():
    split = parity_split(fresh_sequence(4, 2))
    table = ScoreTable(values=np.array([[0.1, NEG], [NEG, 0.9]]))
    plan = plan_pass(split, table, r=2)
    assert list(plan.selected) == [1, 0]


def test_plan_pass_requires_enough_candidates():
    split = parity_split(fresh_sequence(5, 2))
    table = ScoreTable(values=np.array([[0.9, NEG], [NEG, 0.2], [NEG, NEG]]))
    with pytest.raises(InsufficientMergeable):
        plan_pass(split, table, r=3)
    with pytest.raises(ValueError):
        plan_pass(split, table, r=0)


def test_plan_pass_checks_table_shape():
    split = parity_split(fresh_sequence(4, 2))
    with pytest.raises(ValueError):
        plan_pass(split, ScoreTable(values=np.zeros((3, 3))), r=1)


def test_apply_pass_merges_into_unweighted_mean():
    seq = TokenSequence.fresh(np.array([[2.0, 0.0], [4.0, 0.0]], dtype=np.float32))
    split = parity_split(seq)
    table = ScoreTable(values=np.array([[1.0]]))
    plan = plan_pass(split, table, r=1)
    out, record = apply_pass(seq, plan)
    assert out.length == 1
    assert list(out.data[0]) == [3.0, 0.0]
    assert list(out.positions) == [1]
    assert list(out.counts) == [2]
    assert record.merges == (MergeRecord(i=1, j=1, score=1.0),)
    assert record.input_length == 2


def test_apply_pass_size_weighted_respects_counts():
    seq = TokenSequence(
        data=np.array([[6.0], [2.0]], dtype=np.float32),
        positions=np.array([1, 4]),
        counts=np.array([3, 1]),
    )
    split = parity_split(seq)
    plan = plan_pass(split, ScoreTable(values=np.array([[1.0]])), r=1)
    out, _ = apply_pass(seq, plan, weighting="size-weighted")
    # (3*6 + 1*2) / 4, not (6 + 2) / 2
    assert out.data[0, 0] == pytest.approx(5.0)
    assert list(out.counts) == [4]


def test_apply_pass_passes_unmatched_rows_through_unchanged():
    seq = fresh_sequence(5, 3, seed=11)
    split = parity_split(seq)
    table = ScoreTable(
        values=np.array([[0.9, NEG], [NEG, NEG], [NEG, 0.4]])
    )
    plan = plan_pass(split, table, r=1)  # merges only source 0
    out, _ = apply_pass(seq, plan)
    assert out.length == 4
    # source rows 3 and 5 (positions 3, 5) survive bit-identically
    for pos in (3, 5):
        k = list(out.positions).index(pos)
        assert out.data[k].tobytes() == seq.data[pos - 1].tobytes()


def test_apply_pass_rejects_unknown_weighting():
    seq = fresh_sequence(2, 2)
    plan = plan_pass(parity_split(seq), ScoreTable(values=np.array([[1.0]])), r=1)
    with pytest.raises(ValueError):
        apply_pass(seq, plan, weighting="softmax")


def test_fold_groups_absorbs_source_into_destination():
    groups = [(1,), (2,), (3,), (4,)]
    merged = fold_groups(groups, (MergeRecord(i=1, j=1, score=1.0),))
    assert merged == [(1, 2), (3,), (4,)]


def test_compress_merge_hits_exact_budget():
    for ratio in (0.75, 0.5, 0.25):
        for length in (2, 7, 16, 33, 64):
            seq = fresh_sequence(length, 4, seed=length)
            out, trace, prov = compress_merge(seq, ratio, window=4)
            assert out.length == target_length(ratio, length)
            assert prov.output_length == out.length
            assert len({p.input_length for p in trace.passes}) == len(trace.passes)


def test_compress_merge_window_zero_pairs_neighbours():
    seq = TokenSequence.fresh(
        np.array([[1.0, 0], [3.0, 0], [10.0, 0], [30.0, 0]], dtype=np.float32)
    )
    out, trace, prov = compress_merge(seq, 0.5, window=0)
    assert list(out.data[:, 0]) == [2.0, 20.0]
    assert list(out.positions) == [1, 3]
    assert prov.groups == ((1, 2), (3, 4))
    assert len(trace.passes) == 1


def test_compress_merge_positions_strictly_increase():
    seq = fresh_sequence(41, 5, seed=3)
    out, _, _ = compress_merge(seq, 0.25, window=2)
    assert (np.diff(out.positions) > 0).all()


def test_compress_merge_groups_partition_input():
    seq = fresh_sequence(29, 4, seed=9)
    _, _, prov = compress_merge(seq, 0.5, window=1)
    seen = [p for g in prov.groups for p in g]
    assert sorted(seen) == list(range(1, 30))


def test_compress_merge_unbounded_is_global_method():
    seq = fresh_sequence(12, 4, seed=5)
    _, trace, prov = compress_merge(seq, 0.5, window=None)
    assert prov.method == "global-merge"
    assert prov.window is None
    assert trace.window is None


def test_compress_merge_identity_ratio_means_no_passes():
    seq = fresh_sequence(9, 4, seed=2)
    out, trace, prov = compress_merge(seq, 1.0, window=8)
    assert out.data.tobytes() == seq.data.tobytes()
    assert trace.passes == ()
    assert prov.groups == tuple((k,) for k in range(1, 10))


def test_saturated_window_matches_unbounded_bit_for_bit():
    for seed in range(6):
        length = 10 + 7 * seed
        seq = fresh_sequence(length, 6, seed=seed)
        wide = (length + 1) // 2  # at least the source count, covers every pair
        out_w, trace_w, prov_w = compress_merge(seq, 0.25, window=wide)
        out_g, trace_g, prov_g = compress_merge(seq, 0.25, window=None)
        assert out_w.data.tobytes() == out_g.data.tobytes()
        assert prov_w.groups == prov_g.groups
        assert len(trace_w.passes) == len(trace_g.passes)
        for pw, pg in zip(trace_w.passes, trace_g.passes):
            assert pw.merges == pg.merges


def test_banded_scores_match_masked_dense_table():
    # windows below saturation fill diagonals instead of the full
    # matmul; the numbers must agree with the dense table under a mask
    from seqsqueeze.merge import _pass_scores
    from seqsqueeze.similarity import similarity_table

    for seed in (0, 1, 2):
        seq = fresh_sequence(25, 5, seed=seed)
        split = parity_split(seq)
        window = 3
        banded = _pass_scores(split, window).values
        dense = similarity_table(
            seq.data[split.source_indices].astype(np.float64),
            seq.data[split.dest_indices].astype(np.float64),
            window_mask(split.n_sources, split.n_dests, window),
        ).values
        assert ((banded == NEG) == (dense == NEG)).all()
        inside = dense != NEG
        assert np.allclose(banded[inside], dense[inside], rtol=0, atol=1e-12)


def test_duplicate_rows_tie_break_deterministically():
    data = np.ones((6, 3), dtype=np.float32)
    seq = TokenSequence.fresh(data)
    _, trace, _ = compress_merge(seq, 0.5, window=None)
    # every source scores 1.0 against every destination: the first max
    # wins, so all three selected sources point at destination 1
    merges = trace.passes[0].merges
    assert [m.i for m in merges] == [1, 2, 3]
    assert all(m.j == 1 for m in merges)


def test_compress_merge_is_deterministic():
    seq = fresh_sequence(37, 8, seed=13)
    a = compress_merge(seq, 0.25, window=4)
    b = compress_merge(seq, 0.25, window=4)
    assert a[0].data.tobytes() == b[0].data.tobytes()
    assert a[1] == b[1]
    assert a[2] == b[2]


def test_rebuild_trace_round_trips_engine_traces():
    seq = fresh_sequence(23, 4, seed=21)
    _, trace, prov = compress_merge(seq, 0.25, window=2)
    rebuilt, groups = rebuild_trace(
        seq.length, trace.window, [p.merges for p in trace.passes]
    )
    assert rebuilt == trace
    assert tuple(groups) == prov.groups
