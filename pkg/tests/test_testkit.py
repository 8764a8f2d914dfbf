import numpy as np
import pytest

from seqsqueeze.compress import compress
from seqsqueeze.core import CompressionConfig, Provenance
from seqsqueeze.errors import SchemaViolation, SpecMismatch, UnavailableRatio
from seqsqueeze.testkit import (
    SynthSpec,
    event_retention,
    event_spans,
    generate,
    oracle_compress,
    replay_trace,
    splitmix64,
)

from conftest import fresh_sequence


# --- deterministic generator ------------------------------------------------


def test_splitmix64_reference_stream():
    # first three words of the widely published seed-0 stream
    words = splitmix64(0, 3)
    assert [int(w) for w in words] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]
    assert words.dtype == np.uint64


def test_splitmix64_is_counter_based():
    whole = splitmix64(99, 10)
    tail = splitmix64(99, 7, skip=3)
    assert (whole[3:] == tail).all()


def test_splitmix64_seeds_give_distinct_streams():
    assert (splitmix64(1, 8) != splitmix64(2, 8)).any()


def test_gaussian_stream_moments():
    from seqsqueeze.testkit import _Stream

    g = _Stream(123).gaussians(100000)
    assert abs(g.mean()) < 0.02
    assert abs(g.var() - 1.0) < 0.02
    u = _Stream(7).uniforms(100000)
    assert u.min() >= 0.0
    assert u.max() < 1.0


def test_generate_is_deterministic():
    spec = SynthSpec(length=40, dim=6, seed=11)
    assert generate(spec).data.tobytes() == generate(spec).data.tobytes()


def test_generate_iid_shape_and_dtype():
    seq = generate(SynthSpec(length=13, dim=4, seed=0))
    assert seq.length == 13
    assert seq.dim == 4
    assert seq.data.dtype == np.float32
    assert np.isfinite(seq.data).all()
    assert list(seq.counts) == [1] * 13


def test_event_spans_ordered_and_in_bounds():
    spec = SynthSpec(
        length=120, dim=4, seed=5, profile="piecewise-events", events=4, mean_span=8
    )
    spans = event_spans(spec)
    assert len(spans) == 4
    cursor = 0
    for start, end in spans:
        assert start > cursor
        assert 1 <= end - start + 1 <= 2 * spec.mean_span - 1
        cursor = end
    assert cursor <= spec.length
    assert spans == event_spans(spec)


def test_zero_noise_events_are_duplicate_rows():
    spec = SynthSpec(
        length=60, dim=5, seed=3, profile="piecewise-events",
        events=2, mean_span=6, noise_scale=0.0,
    )
    seq = generate(spec)
    for start, end in event_spans(spec):
        first = seq.data[start - 1].tobytes()
        for row in range(start, end):
            assert seq.data[row].tobytes() == first


def test_synth_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(length=0, dim=4, seed=0)
    with pytest.raises(ValueError):
        SynthSpec(length=10, dim=4, seed=0, profile="sine")
    with pytest.raises(ValueError):  # events cannot fit
        SynthSpec(length=10, dim=4, seed=0, profile="piecewise-events",
                  events=4, mean_span=8)
    with pytest.raises(ValueError):
        SynthSpec(length=100, dim=4, seed=0, profile="piecewise-events",
                  events=2, noise_scale=-1.0)


def test_synth_spec_dict_round_trip():
    spec = SynthSpec(length=30, dim=3, seed=9, profile="piecewise-events",
                     events=2, mean_span=4)
    assert SynthSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(SchemaViolation):
        SynthSpec.from_dict("not a dict")
    with pytest.raises(SchemaViolation):
        SynthSpec.from_dict({"length": 4, "dim": 2})  # seed missing
    with pytest.raises(SchemaViolation):
        SynthSpec.from_dict(dict(spec.to_dict(), flavor="salt"))
    with pytest.raises(SchemaViolation):
        SynthSpec.from_dict(dict(spec.to_dict(), length=0))


# --- oracle ------------------------------------------------------------------


def _assert_matches_engine(seq, config, tol=1e-5):
    engine = compress(seq, config)
    o_seq, o_prov, o_trace = oracle_compress(seq, config)
    assert engine.sequence.length == o_seq.length
    diff = np.abs(
        engine.sequence.data.astype(np.float64) - o_seq.data.astype(np.float64)
    )
    assert diff.max(initial=0.0) <= tol
    assert engine.provenance.groups == o_prov.groups
    assert engine.provenance.dropped == o_prov.dropped
    assert len(engine.trace.passes) == len(o_trace.passes)
    for got, want in zip(engine.trace.passes, o_trace.passes):
        assert got.input_length == want.input_length
        assert {m.i: m.j for m in got.merges} == {m.i: m.j for m in want.merges}


def test_oracle_agrees_with_engine_on_spot_checks():
    for seed in range(4):
        seq = fresh_sequence(48, 5, seed=seed)
        _assert_matches_engine(seq, CompressionConfig(method="ltbm", keep_ratio=0.25, window=2))
        _assert_matches_engine(seq, CompressionConfig(method="global-merge", keep_ratio=0.5))
        _assert_matches_engine(seq, CompressionConfig(method="uniavg", keep_ratio=0.5))
        _assert_matches_engine(seq, CompressionConfig(method="global-topk", keep_ratio=0.25))
        _assert_matches_engine(
            seq, CompressionConfig(method="segmentwise-topk", keep_ratio=0.5, segments=5)
        )


def test_oracle_identity_and_unavailable_paths():
    seq = fresh_sequence(10, 3, seed=1)
    out, prov, trace = oracle_compress(seq, CompressionConfig(method="uniavg", keep_ratio=1.0))
    assert out.data.tobytes() == seq.data.tobytes()
    assert trace.passes == ()
    with pytest.raises(UnavailableRatio):
        oracle_compress(seq, CompressionConfig(method="uniavg", keep_ratio=0.75))


def test_oracle_size_weighted_outputs_are_group_means():
    seq = fresh_sequence(32, 4, seed=6)
    config = CompressionConfig(
        method="ltbm", keep_ratio=0.25, window=4, weighting="size-weighted"
    )
    out, prov, _ = oracle_compress(seq, config)
    original = seq.data.astype(np.float64)
    for row, group in zip(out.data, prov.groups):
        want = original[[p - 1 for p in group]].mean(axis=0)
        assert np.abs(row.astype(np.float64) - want).max() <= 1e-6


# --- event retention ---------------------------------------------------------


def _event_spec():
    return SynthSpec(
        length=80, dim=6, seed=17, profile="piecewise-events",
        events=3, mean_span=6, noise_scale=0.01,
    )


def test_retention_is_full_at_identity():
    spec = _event_spec()
    seq = generate(spec)
    result = compress(seq, CompressionConfig(method="ltbm", keep_ratio=1.0))
    assert event_retention(seq, result.provenance, spec) == 1.0


def test_retention_zero_when_one_group_swallows_everything():
    spec = _event_spec()
    seq = generate(spec)
    prov = Provenance(
        method="global-merge", keep_ratio=0.01, window=None,
        weighting="paper-literal", original_length=spec.length,
        groups=(tuple(range(1, spec.length + 1)),),
    )
    assert event_retention(seq, prov, spec) == 0.0


def test_retention_counts_pure_groups():
    spec = _event_spec()
    seq = generate(spec)
    result = compress(seq, CompressionConfig(method="ltbm", keep_ratio=0.25, window=8))
    value = event_retention(seq, result.provenance, spec)
    assert 0.0 <= value <= 1.0


def test_retention_rejects_mismatched_inputs():
    spec = _event_spec()
    seq = generate(spec)
    result = compress(seq, CompressionConfig(method="ltbm", keep_ratio=0.5))
    iid = SynthSpec(length=80, dim=6, seed=17)
    with pytest.raises(SpecMismatch):
        event_retention(seq, result.provenance, iid)
    other = generate(SynthSpec(**dict(spec.to_dict(), seed=18)))
    with pytest.raises(SpecMismatch):
        event_retention(other, result.provenance, spec)


# --- trace replay ------------------------------------------------------------


def test_replay_reproduces_engine_output():
    for seed in (0, 1, 2):
        seq = fresh_sequence(50, 6, seed=seed)
        result = compress(seq, CompressionConfig(method="ltbm", keep_ratio=0.25, window=8))
        replayed = replay_trace(seq, result.trace)
        diff = np.abs(replayed - result.sequence.data.astype(np.float64))
        assert diff.max() <= 1e-6


def test_replay_rejects_wrong_input_length():
    seq = fresh_sequence(20, 4, seed=4)
    result = compress(seq, CompressionConfig(method="ltbm", keep_ratio=0.5, window=8))
    with pytest.raises(ValueError):
        replay_trace(fresh_sequence(10, 4, seed=4), result.trace)
