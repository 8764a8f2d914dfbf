"""Single entry point dispatching a CompressionConfig to its method.

Normalizes the bookkeeping the individual methods do not share: the
keep_ratio=1 identity short-circuit (which precedes even UniAvg's
availability check), the window field (recorded only for ltbm), and the
weighting field copied from the config into provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .baselines import (
    compress_global_topk,
    compress_segmentwise_topk,
    compress_uniavg,
    uniavg_groups,
)
from .core import CompressionConfig, MergeTrace, Provenance, TokenSequence
from .merge import compress_merge


@dataclass(frozen=True)
class CompressionResult:
    sequence: TokenSequence
    provenance: Provenance
    trace: MergeTrace


def compress(seq: TokenSequence, config: CompressionConfig) -> CompressionResult:
    """Compress seq per config; deterministic, input left untouched."""
    if config.keep_ratio == 1.0:
        return CompressionResult(
            sequence=seq,
            provenance=Provenance.identity(config, seq.length),
            trace=MergeTrace(
                window=config.window if config.method == "ltbm" else None
            ),
        )

    if config.method == "ltbm":
        out, trace, prov = compress_merge(
            seq, config.keep_ratio, config.window, config.weighting
        )
        return CompressionResult(sequence=out, provenance=prov, trace=trace)

    if config.method == "global-merge":
        out, trace, prov = compress_merge(
            seq, config.keep_ratio, None, config.weighting
        )
        return CompressionResult(sequence=out, provenance=prov, trace=trace)

    if config.method == "uniavg":
        out = compress_uniavg(seq, config.keep_ratio)
        prov = Provenance(
            method="uniavg",
            keep_ratio=config.keep_ratio,
            window=None,
            weighting=config.weighting,
            original_length=seq.length,
            groups=uniavg_groups(seq.length, config.keep_ratio),
        )
        return CompressionResult(
            sequence=out, provenance=prov, trace=MergeTrace(window=None)
        )

    if config.method == "global-topk":
        out, prov = compress_global_topk(seq, config.keep_ratio)
    else:  # segmentwise-topk; config validation rejects anything else
        out, prov = compress_segmentwise_topk(
            seq, config.keep_ratio, config.segments
        )
    prov = replace(prov, weighting=config.weighting)
    return CompressionResult(
        sequence=out, provenance=prov, trace=MergeTrace(window=None)
    )
