"""Synthetic sequences and slow reference implementations for verification.

The generator is built on a counter-based split-mix PRNG pinned by its
update constants, so any implementation in any language reproduces the
exact same streams. The oracles recompute every compression method with
naive scalar loops in float64, sharing only the data model (never code)
with the engine; engine/oracle agreement is the core verification story.

Stream layout (one stream per generate call, word = one 64-bit draw):
iid-gaussian consumes 2·L·D words (two per normal deviate, row-major).
piecewise-events consumes, in order: one word per event for its span,
2·E·D words for event centroids, then 2·L·D words of per-row noise for
every row whether inside an event or not.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    MergeRecord,
    MergeTrace,
    PassRecord,
    Provenance,
    TokenSequence,
)
from .errors import (
    CannotReachTarget,
    SchemaViolation,
    SpecMismatch,
    UnavailableRatio,
)

# Split-mix constants; the full generator is pinned by these plus the
# shift triple (30, 27, 31) and the counter scheme mix(seed + n*GAMMA).
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

PROFILES = ("iid-gaussian", "piecewise-events")

_TWO_PI = 2.0 * math.pi
_U53 = 2.0**-53


def splitmix64(seed: int, count: int, skip: int = 0) -> np.ndarray:
    """Words skip+1 .. skip+count of the split-mix stream for this seed."""
    idx = np.arange(skip + 1, skip + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        return z ^ (z >> np.uint64(31))


class _Stream:
    """Sequential view over one split-mix stream."""

    def __init__(self, seed: int):
        self.seed = seed
        self.consumed = 0

    def words(self, count: int) -> np.ndarray:
        out = splitmix64(self.seed, count, skip=self.consumed)
        self.consumed += count
        return out

    def uniforms(self, count: int) -> np.ndarray:
        """Uniform [0, 1) doubles, one word each (top 53 bits)."""
        return (self.words(count) >> np.uint64(11)).astype(np.float64) * _U53

    def gaussians(self, count: int) -> np.ndarray:
        """Standard normals, two words each: r·cos(θ) with
        r = sqrt(−2·ln(1−u₁)), θ = 2π·u₂."""
        u = self.uniforms(2 * count)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        return r * np.cos(_TWO_PI * u[1::2])


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic sequence.

    piecewise-events plants `events` runs of near-duplicate vectors (a
    centroid scaled by separation_scale plus noise_scale jitter) inside
    otherwise-unstructured rows; spans are drawn uniformly from
    [1, 2·mean_span−1], so events*(2·mean_span−1) must fit in length.
    """

    length: int
    dim: int
    seed: int
    profile: str = "iid-gaussian"
    events: int = 4
    mean_span: int = 8
    noise_scale: float = 0.05
    separation_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.length < 1 or self.dim < 1:
            raise ValueError(f"length and dim must be >= 1, got {self.length}x{self.dim}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")
        if self.profile == "piecewise-events":
            if self.events < 1 or self.mean_span < 1:
                raise ValueError("piecewise-events needs events >= 1 and mean_span >= 1")
            if not (math.isfinite(self.noise_scale) and self.noise_scale >= 0):
                raise ValueError(f"noise_scale must be finite and >= 0, got {self.noise_scale}")
            if not (math.isfinite(self.separation_scale) and self.separation_scale >= 0):
                raise ValueError(
                    f"separation_scale must be finite and >= 0, got {self.separation_scale}"
                )
            worst = self.events * (2 * self.mean_span - 1)
            if worst > self.length:
                raise ValueError(
                    f"events may span up to {worst} tokens, more than length {self.length}"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: object) -> "SynthSpec":
        if not isinstance(doc, dict):
            raise SchemaViolation("synth spec must be an object")
        allowed = {f for f in SynthSpec.__dataclass_fields__}
        if not set(doc) <= allowed:
            raise SchemaViolation(f"unknown synth spec keys {sorted(set(doc) - allowed)}")
        for key in ("length", "dim", "seed"):
            if key not in doc:
                raise SchemaViolation(f"synth spec missing {key}")
        try:
            return SynthSpec(**doc)
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(f"invalid synth spec: {exc}") from exc


def event_spans(spec: SynthSpec) -> tuple[tuple[int, int], ...]:
    """Inclusive 1-based (start, end) rows of each event, in order.

    Deterministic in spec.seed; consumes the same leading stream words
    generate consumes, so the two always agree on placement.
    """
    stream = _Stream(spec.seed)
    widths = [
        1 + int(u * (2 * spec.mean_span - 1)) for u in stream.uniforms(spec.events)
    ]
    slack = spec.length - sum(widths)
    base_gap, extra = divmod(slack, spec.events + 1)
    spans = []
    cursor = 0
    for e, width in enumerate(widths):
        cursor += base_gap + (1 if e < extra else 0)
        spans.append((cursor + 1, cursor + width))
        cursor += width
    return tuple(spans)


def generate(spec: SynthSpec) -> TokenSequence:
    """Deterministically synthesize a fresh sequence for this spec."""
    stream = _Stream(spec.seed)
    if spec.profile == "iid-gaussian":
        rows = stream.gaussians(spec.length * spec.dim).reshape(spec.length, spec.dim)
        return TokenSequence.fresh(rows.astype(np.float32))

    spans = event_spans(spec)
    stream.words(spec.events)  # skip the words event_spans already consumed
    centroids = (
        stream.gaussians(spec.events * spec.dim).reshape(spec.events, spec.dim)
        * spec.separation_scale
    )
    noise = stream.gaussians(spec.length * spec.dim).reshape(spec.length, spec.dim)
    rows = noise * spec.separation_scale
    for e, (start, end) in enumerate(spans):
        rows[start - 1 : end] = centroids[e] + noise[start - 1 : end] * spec.noise_scale
    return TokenSequence.fresh(rows.astype(np.float32))


# --- scalar float64 oracles -------------------------------------------------
#
# Everything below recomputes the engine's contracts with plain Python
# loops. Deliberately slow and deliberately independent: no imports from
# the similarity/merge/baselines modules, float64 end to end, one
# rounding to float32 at the very end.


def _o_target(keep_ratio: float, length: int) -> int:
    return max(1, min(length, math.floor(keep_ratio * length + 0.5)))


def _o_cosine(a: list[float], b: list[float]) -> float:
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    return dot / max(math.sqrt(na) * math.sqrt(nb), 1e-12)


def _o_norm(row: list[float]) -> float:
    total = 0.0
    for x in row:
        total += x * x
    return math.sqrt(total)


def _finish(
    rows: list[list[float]],
    positions: list[int],
    counts: list[int],
    groups: list[tuple[int, ...]],
    config,
    window: int | None,
    passes: list[PassRecord],
    dropped: tuple[int, ...] = (),
) -> tuple[TokenSequence, Provenance, MergeTrace]:
    seq = TokenSequence(
        data=np.array(rows, dtype=np.float32).reshape(len(rows), -1),
        positions=np.array(positions, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64),
    )
    prov = Provenance(
        method=config.method,
        keep_ratio=config.keep_ratio,
        window=window,
        weighting=config.weighting,
        # grouped plus dropped positions account for every original row
        original_length=len(dropped) + sum(len(g) for g in groups),
        groups=tuple(groups),
        dropped=dropped,
    )
    return seq, prov, MergeTrace(window=window, passes=tuple(passes))


def oracle_compress(
    seq: TokenSequence, config
) -> tuple[TokenSequence, Provenance, MergeTrace]:
    """Reference compression for any config; scalar loops, float64 only.

    Mirrors the engine's documented behavior exactly (budget, tie-breaks,
    accumulation order, identity at keep_ratio 1) but never rounds
    intermediates to float32, so outputs agree with the engine to within
    float32 representation error, not bit-for-bit.
    """
    length = seq.length
    rows = [[float(x) for x in row] for row in seq.data]
    positions = [int(p) for p in seq.positions]
    counts = [int(c) for c in seq.counts]
    window = config.window if config.method == "ltbm" else None

    if config.keep_ratio == 1.0:
        groups = [(k,) for k in range(1, length + 1)]
        return _finish(rows, positions, counts, groups, config, window, [])

    if config.method in ("ltbm", "global-merge"):
        return _oracle_merge(rows, positions, counts, config, window)
    if config.method == "uniavg":
        return _oracle_uniavg(rows, positions, counts, config)
    if config.method == "global-topk":
        return _oracle_topk(rows, positions, counts, config, segments=1)
    return _oracle_topk(rows, positions, counts, config, segments=config.segments)


def _oracle_merge(rows, positions, counts, config, window):
    length = len(rows)
    goal = _o_target(config.keep_ratio, length)
    groups: list[tuple[int, ...]] = [(k,) for k in range(1, length + 1)]
    size_weighted = config.weighting == "size-weighted"
    passes: list[PassRecord] = []

    while len(rows) > goal:
        n = len(rows)
        src = list(range(0, n, 2))
        dst = list(range(1, n, 2))
        best_j = [-1] * len(src)
        best_s = [-math.inf] * len(src)
        for si in range(len(src)):
            for dj in range(len(dst)):
                if window is not None and abs(si - dj) > window:
                    continue
                s = _o_cosine(rows[src[si]], rows[dst[dj]])
                if s > best_s[si]:
                    best_s[si] = s
                    best_j[si] = dj
        candidates = [si for si in range(len(src)) if best_j[si] >= 0]
        r = min(len(rows) - goal, len(candidates))
        if r == 0:
            raise CannotReachTarget(
                f"no in-window candidate at length {n} (target {goal}, window {window})"
            )
        ranked = sorted(candidates, key=lambda si: (-best_s[si], si))[:r]
        merges = tuple(
            MergeRecord(i=si + 1, j=best_j[si] + 1, score=best_s[si]) for si in ranked
        )
        passes.append(
            PassRecord(
                input_length=n,
                source_positions=tuple(positions[k] for k in src),
                dest_positions=tuple(positions[k] for k in dst),
                merges=merges,
            )
        )

        selected = sorted(ranked)
        new_rows, new_pos, new_cnt, new_groups = [], [], [], []
        for dj in range(len(dst)):
            members = [si for si in selected if best_j[si] == dj]
            d = dst[dj]
            vec = list(rows[d])
            pos = positions[d]
            cnt = counts[d]
            grp = groups[d]
            if members:
                if size_weighted:
                    acc = [x * counts[d] for x in vec]
                    total = float(counts[d])
                    for si in members:
                        s = src[si]
                        for c in range(len(acc)):
                            acc[c] += rows[s][c] * counts[s]
                        total += counts[s]
                    vec = [x / total for x in acc]
                else:
                    acc = list(vec)
                    for si in members:
                        s = src[si]
                        for c in range(len(acc)):
                            acc[c] += rows[s][c]
                    vec = [x / (1 + len(members)) for x in acc]
                for si in members:
                    s = src[si]
                    pos = min(pos, positions[s])
                    cnt += counts[s]
                    grp = tuple(sorted(grp + groups[s]))
            new_rows.append(vec)
            new_pos.append(pos)
            new_cnt.append(cnt)
            new_groups.append(grp)
        chosen = set(selected)
        for si in range(len(src)):
            if si not in chosen:
                s = src[si]
                new_rows.append(list(rows[s]))
                new_pos.append(positions[s])
                new_cnt.append(counts[s])
                new_groups.append(groups[s])
        order = sorted(range(len(new_pos)), key=lambda k: new_pos[k])
        rows = [new_rows[k] for k in order]
        positions = [new_pos[k] for k in order]
        counts = [new_cnt[k] for k in order]
        groups = [new_groups[k] for k in order]

    return _finish(rows, positions, counts, groups, config, window, passes)


def _oracle_uniavg(rows, positions, counts, config):
    k = math.floor(1.0 / config.keep_ratio + 0.5)
    if k < 2:
        raise UnavailableRatio(
            f"uniform pooling needs factor >= 2, keep ratio {config.keep_ratio} gives {k}"
        )
    length = len(rows)
    dim = len(rows[0])
    out_rows, out_pos, out_cnt, groups = [], [], [], []
    for lo in range(0, length, k):
        hi = min(lo + k, length)
        acc = [0.0] * dim
        for ell in range(lo, hi):
            for c in range(dim):
                acc[c] += rows[ell][c]
        out_rows.append([x / (hi - lo) for x in acc])
        out_pos.append(positions[lo])
        out_cnt.append(sum(counts[lo:hi]))
        groups.append(tuple(range(lo + 1, hi + 1)))
    return _finish(out_rows, out_pos, out_cnt, groups, config, None, [])


def _oracle_topk(rows, positions, counts, config, segments: int):
    length = len(rows)
    goal = _o_target(config.keep_ratio, length)
    norms = [_o_norm(row) for row in rows]

    n = min(segments, length)
    base_len, extra = divmod(length, n)
    seg_lengths = [base_len + 1] * extra + [base_len] * (n - extra)
    bounds = []
    cursor = 0
    for seg_len in seg_lengths:
        bounds.append((cursor, cursor + seg_len))
        cursor += seg_len

    quotas = [goal * seg_len // length for seg_len in seg_lengths]
    rems = [goal * seg_len - q * length for seg_len, q in zip(seg_lengths, quotas)]
    for s in sorted(range(n), key=lambda s: (-rems[s], s))[: goal - sum(quotas)]:
        quotas[s] += 1
    spill = sum(max(0, q - seg_len) for q, seg_len in zip(quotas, seg_lengths))
    quotas = [min(q, seg_len) for q, seg_len in zip(quotas, seg_lengths)]
    while spill > 0:  # unreachable for this apportionment; keeps the invariant total
        open_segs = [s for s in range(n) if quotas[s] < seg_lengths[s]]
        best = max(
            open_segs,
            key=lambda s: (
                sorted((norms[r] for r in range(*bounds[s])), reverse=True)[quotas[s]],
                -s,
            ),
        )
        quotas[best] += 1
        spill -= 1

    kept: list[int] = []
    for (lo, hi), quota in zip(bounds, quotas):
        chosen = sorted(range(lo, hi), key=lambda r: (-norms[r], r))[:quota]
        kept.extend(sorted(chosen))

    dropped = tuple(r + 1 for r in range(length) if r not in set(kept))
    out_rows = [list(rows[r]) for r in kept]
    out_pos = [positions[r] for r in kept]
    out_cnt = [counts[r] for r in kept]
    groups = [(r + 1,) for r in kept]
    return _finish(out_rows, out_pos, out_cnt, groups, config, None, [], dropped)


def event_retention(
    original: TokenSequence, prov: Provenance, spec: SynthSpec
) -> float:
    """Fraction of planted events surviving into at least one pure group.

    A group is pure for an event when every position in it falls inside
    that event's span. The original sequence must be exactly what the
    spec generates.
    """
    if spec.profile != "piecewise-events":
        raise SpecMismatch(f"retention needs piecewise-events, spec is {spec.profile!r}")
    if prov.original_length != spec.length or original.length != spec.length:
        raise SpecMismatch(
            f"lengths disagree: spec {spec.length}, sequence {original.length}, "
            f"provenance {prov.original_length}"
        )
    if generate(spec).data.tobytes() != original.data.tobytes():
        raise SpecMismatch("sequence bytes do not match what the spec generates")

    spans = event_spans(spec)
    retained = 0
    for start, end in spans:
        for g in prov.groups:
            if g[0] >= start and g[-1] <= end:
                retained += 1
                break
    return retained / len(spans)


def replay_trace(seq: TokenSequence, trace: MergeTrace) -> np.ndarray:
    """Replay a merge trace on its original input, float64 end to end.

    Applies the per-pass unweighted-mean update (the paper-literal mode)
    to the recorded merges and restores representative-position order, so
    the result matches the engine's output up to float32 rounding drift.
    """
    rows = [row.astype(np.float64) for row in seq.data]
    positions = [int(p) for p in seq.positions]
    for record in trace.passes:
        if record.input_length != len(rows):
            raise ValueError(
                f"trace expects length {record.input_length}, sequence has {len(rows)}"
            )
        src = list(range(0, len(rows), 2))
        dst = list(range(1, len(rows), 2))
        absorbed: dict[int, list[int]] = {}
        for m in sorted(record.merges, key=lambda m: m.i):
            absorbed.setdefault(m.j - 1, []).append(m.i - 1)
        merged_sources = {si for group in absorbed.values() for si in group}
        new_rows, new_pos = [], []
        for dj in range(len(dst)):
            vec = rows[dst[dj]]
            pos = positions[dst[dj]]
            members = absorbed.get(dj, [])
            if members:
                vec = vec.copy()
                for si in members:
                    vec += rows[src[si]]
                    pos = min(pos, positions[src[si]])
                vec /= 1 + len(members)
            new_rows.append(vec)
            new_pos.append(pos)
        for si in range(len(src)):
            if si not in merged_sources:
                new_rows.append(rows[src[si]])
                new_pos.append(positions[src[si]])
        order = sorted(range(len(new_pos)), key=lambda k: new_pos[k])
        rows = [new_rows[k] for k in order]
        positions = [new_pos[k] for k in order]
    return np.stack(rows) if rows else np.empty((0, seq.dim))
