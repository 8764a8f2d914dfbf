"""Bit-exact array files plus provenance/trace and manifest serialization.

Token matrices travel in the ubiquitous ".npy" version 1.0 container so
tensors dumped from encoder pipelines load directly, but only its
little-endian float32, rank-2, row-major subset is accepted; anything
else is a hard error, never a best-effort conversion. Error mapping for
malformed files: unreadable framing (magic, version, preamble, header
dict) -> BadMagic; wrong element type or byte order, or column-major
layout -> UnsupportedDtype; shape not a clean 2-tuple -> UnsupportedRank;
declared and actual byte counts disagreeing (header or payload, short or
long) -> TruncatedPayload; a header demanding more than the allocation
cap -> OversizeArray; OS-level failures -> IoFailure.

Provenance and traces share one JSON document (schema in
write_provenance); run manifests are a separate small JSON schema (see
read_manifest). All writers go through a temp file plus atomic rename.
"""

from __future__ import annotations

import ast
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .core import (
    METHODS,
    WEIGHTINGS,
    CompressionConfig,
    MergeRecord,
    MergeTrace,
    Provenance,
)
from .errors import (
    BadMagic,
    IoFailure,
    NonFiniteInput,
    OversizeArray,
    SchemaViolation,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedRank,
)
from .merge import rebuild_trace

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
DEFAULT_MAX_BYTES = 1 << 30  # refuse to allocate more than 1 GiB from a header
_HEADER_BLOCK = 64  # total header block padded to this multiple, newline-terminated


def read_array(path: str | os.PathLike, max_bytes: int = DEFAULT_MAX_BYTES) -> np.ndarray:
    """Parse the accepted container subset into a fresh L x D float32 matrix."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(raw) < 8 or raw[:6] != MAGIC:
        raise BadMagic(f"{path}: not an array container (bad magic)")
    if raw[6:8] != VERSION:
        raise BadMagic(
            f"{path}: unsupported container version {raw[6]}.{raw[7]}, only 1.0 accepted"
        )
    if len(raw) < 10:
        raise BadMagic(f"{path}: truncated before header length")
    (header_len,) = struct.unpack("<H", raw[8:10])
    header_end = 10 + header_len
    if len(raw) < header_end:
        raise TruncatedPayload(
            f"{path}: header declares {header_len} bytes, file holds {len(raw) - 10}"
        )
    shape = _parse_header(raw[10:header_end], path)

    n_bytes = 4 * shape[0] * shape[1]
    if n_bytes > max_bytes:
        raise OversizeArray(
            f"{path}: shape {shape} needs {n_bytes} bytes, cap is {max_bytes}"
        )
    payload = raw[header_end:]
    if len(payload) != n_bytes:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, shape {shape} needs {n_bytes}"
        )
    flat = np.frombuffer(payload, dtype="<f4", count=shape[0] * shape[1])
    return flat.astype(np.float32).reshape(shape)


def _parse_header(header: bytes, path: str | os.PathLike) -> tuple[int, int]:
    """Decode the ASCII header dict; returns the declared 2-D shape."""
    try:
        text = header.decode("ascii")
    except UnicodeDecodeError as exc:
        raise BadMagic(f"{path}: header is not ASCII") from exc
    if not text.endswith("\n"):
        raise BadMagic(f"{path}: header not newline-terminated")
    try:
        fields = ast.literal_eval(text.strip())
    except (ValueError, SyntaxError) as exc:
        raise BadMagic(f"{path}: malformed header dict") from exc
    if not isinstance(fields, dict) or set(fields) != {"descr", "fortran_order", "shape"}:
        raise BadMagic(f"{path}: header must hold exactly descr/fortran_order/shape")

    if fields["descr"] != "<f4":
        raise UnsupportedDtype(
            f"{path}: dtype {fields['descr']!r} not accepted, need little-endian float32 '<f4'"
        )
    if fields["fortran_order"] is not False:
        raise UnsupportedDtype(f"{path}: only row-major (fortran_order: False) accepted")

    shape = fields["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) != 2
        or not all(type(d) is int and d >= 0 for d in shape)
    ):
        raise UnsupportedRank(f"{path}: shape must be a 2-tuple of sizes, got {shape!r}")
    return (shape[0], shape[1])


def write_array(matrix: np.ndarray, path: str | os.PathLike) -> None:
    """Write the matrix so read_array returns it bit-identically."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise UnsupportedRank(f"can only write rank-2 matrices, got rank {arr.ndim}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if arr.size and not np.isfinite(arr).all():
        raise NonFiniteInput("refusing to write non-finite values")

    header = (
        "{'descr': '<f4', 'fortran_order': False, "
        f"'shape': ({arr.shape[0]}, {arr.shape[1]}), }}"
    )
    unpadded = len(MAGIC) + len(VERSION) + 2 + len(header) + 1  # +1 for newline
    pad = (-unpadded) % _HEADER_BLOCK
    header_bytes = header.encode("ascii") + b" " * pad + b"\n"
    blob = MAGIC + VERSION + struct.pack("<H", len(header_bytes)) + header_bytes + arr.tobytes()
    atomic_write(path, blob)


def atomic_write(path: str | os.PathLike, blob: bytes) -> None:
    """Write via temp file + rename so readers never see partial content."""
    directory = os.path.dirname(os.fspath(path)) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".seqsqueeze-", suffix=".tmp")
    except OSError as exc:
        raise IoFailure(f"cannot create temp file near {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_provenance(
    prov: Provenance, trace: MergeTrace, path: str | os.PathLike
) -> None:
    """Serialize provenance plus trace as one JSON document.

    Schema (all keys required on write): method, keep_ratio,
    window (int or null), weighting, original_length, output_length,
    groups (arrays of ascending 1-based positions), dropped (positions
    removed outright), passes (one array per pass of {i, j, score}
    records in selection order, parity-indexed 1-based). Scores carry 9
    significant digits. Pass parity assignments and input lengths are
    derivable from original_length plus the merge lists, so they are not
    stored.
    """
    doc = {
        "method": prov.method,
        "keep_ratio": prov.keep_ratio,
        "window": prov.window,
        "weighting": prov.weighting,
        "original_length": prov.original_length,
        "output_length": prov.output_length,
        "groups": [list(g) for g in prov.groups],
        "dropped": list(prov.dropped),
        "passes": [
            [
                {"i": m.i, "j": m.j, "score": float(f"{m.score:.9g}")}
                for m in record.merges
            ]
            for record in trace.passes
        ],
    }
    atomic_write(path, (json.dumps(doc, indent=2) + "\n").encode("ascii"))


_PROVENANCE_KEYS = {
    "method",
    "keep_ratio",
    "window",
    "weighting",
    "original_length",
    "output_length",
    "groups",
    "dropped",
    "passes",
}


def read_provenance(path: str | os.PathLike) -> tuple[Provenance, MergeTrace]:
    """Load and validate a provenance document written by write_provenance."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path}: top level must be an object")
    missing = (_PROVENANCE_KEYS - {"dropped"}) - set(doc)
    unknown = set(doc) - _PROVENANCE_KEYS
    if missing or unknown:
        raise SchemaViolation(
            f"{path}: missing keys {sorted(missing)}, unknown keys {sorted(unknown)}"
        )

    method = doc["method"]
    if method not in METHODS:
        raise SchemaViolation(f"{path}: unknown method {method!r}")
    if doc["weighting"] not in WEIGHTINGS:
        raise SchemaViolation(f"{path}: unknown weighting {doc['weighting']!r}")
    keep_ratio = doc["keep_ratio"]
    if not isinstance(keep_ratio, (int, float)) or isinstance(keep_ratio, bool):
        raise SchemaViolation(f"{path}: keep_ratio must be a number")
    window = doc["window"]
    if window is not None and (type(window) is not int or window < 0):
        raise SchemaViolation(f"{path}: window must be null or a non-negative integer")
    original_length = doc["original_length"]
    if type(original_length) is not int or original_length < 1:
        raise SchemaViolation(f"{path}: original_length must be a positive integer")

    groups = _int_lists(doc["groups"], f"{path}: groups")
    dropped = _int_list(doc.get("dropped", []), f"{path}: dropped")
    merge_lists = _parse_passes(doc["passes"], path)

    try:
        prov = Provenance(
            method=method,
            keep_ratio=float(keep_ratio),
            window=window,
            weighting=doc["weighting"],
            original_length=original_length,
            groups=groups,
            dropped=dropped,
        )
    except ValueError as exc:
        raise SchemaViolation(f"{path}: {exc}") from exc
    if doc["output_length"] != prov.output_length:
        raise SchemaViolation(
            f"{path}: output_length {doc['output_length']} != {prov.output_length} groups"
        )

    if not merge_lists:
        return prov, MergeTrace(window=window)
    if dropped:
        raise SchemaViolation(f"{path}: merge passes cannot coexist with dropped positions")
    try:
        trace, folded = rebuild_trace(original_length, window, merge_lists)
    except (ValueError, IndexError) as exc:
        raise SchemaViolation(f"{path}: invalid passes: {exc}") from exc
    if tuple(folded) != prov.groups:
        raise SchemaViolation(f"{path}: groups do not match the replayed passes")
    return prov, trace


def _int_list(value: object, what: str) -> tuple[int, ...]:
    if not isinstance(value, list) or any(type(v) is not int for v in value):
        raise SchemaViolation(f"{what} must be an array of integers")
    return tuple(value)


def _int_lists(value: object, what: str) -> tuple[tuple[int, ...], ...]:
    if not isinstance(value, list):
        raise SchemaViolation(f"{what} must be an array of arrays")
    return tuple(_int_list(v, what) for v in value)


def _parse_passes(value: object, path: str | os.PathLike) -> list[tuple[MergeRecord, ...]]:
    if not isinstance(value, list):
        raise SchemaViolation(f"{path}: passes must be an array")
    out = []
    for p, rec_list in enumerate(value):
        if not isinstance(rec_list, list):
            raise SchemaViolation(f"{path}: pass {p} must be an array")
        merges = []
        for rec in rec_list:
            if not isinstance(rec, dict) or set(rec) != {"i", "j", "score"}:
                raise SchemaViolation(f"{path}: pass {p} records need exactly i/j/score")
            if type(rec["i"]) is not int or type(rec["j"]) is not int:
                raise SchemaViolation(f"{path}: pass {p} indices must be integers")
            score = rec["score"]
            if not isinstance(score, (int, float)) or isinstance(score, bool):
                raise SchemaViolation(f"{path}: pass {p} scores must be numbers")
            if rec["i"] < 1 or rec["j"] < 1:
                raise SchemaViolation(f"{path}: pass {p} indices are 1-based")
            merges.append(MergeRecord(i=rec["i"], j=rec["j"], score=float(score)))
        out.append(tuple(merges))
    return out


@dataclass(frozen=True)
class ManifestJob:
    """One compression job from a run manifest."""

    input: str
    output: str
    provenance: str | None
    config: CompressionConfig


_JOB_KEYS = {
    "input",
    "output",
    "provenance",
    "method",
    "keep_ratio",
    "window",
    "weighting",
    "segments",
}


def read_manifest(path: str | os.PathLike) -> tuple[ManifestJob, ...]:
    """Load a run manifest: {"jobs": [...], "defaults": {...}?}.

    Each job holds input/output (and optional provenance) paths plus the
    config fields of a compress invocation; "defaults" supplies shared
    values that individual jobs may override. Paths must be non-empty,
    distinct within a job, and no two jobs may write the same file.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not set(doc) <= {"jobs", "defaults"}:
        raise SchemaViolation(f"{path}: top level must hold only jobs/defaults")
    defaults = doc.get("defaults", {})
    if not isinstance(defaults, dict) or not set(defaults) <= _JOB_KEYS - {"input", "output"}:
        raise SchemaViolation(f"{path}: defaults may hold only shared job keys")
    jobs_raw = doc.get("jobs")
    if not isinstance(jobs_raw, list) or not jobs_raw:
        raise SchemaViolation(f"{path}: jobs must be a non-empty array")

    jobs = []
    write_targets: set[str] = set()
    for n, entry in enumerate(jobs_raw):
        if not isinstance(entry, dict) or not set(entry) <= _JOB_KEYS:
            raise SchemaViolation(f"{path}: job {n} holds unknown keys")
        merged = {**defaults, **entry}
        for key in ("input", "output", "method", "keep_ratio"):
            if key not in merged:
                raise SchemaViolation(f"{path}: job {n} missing {key}")
        paths = [merged["input"], merged["output"], merged.get("provenance")]
        named = [p for p in paths if p is not None]
        if any(not isinstance(p, str) or not p for p in named):
            raise SchemaViolation(f"{path}: job {n} paths must be non-empty strings")
        if len(set(named)) != len(named):
            raise SchemaViolation(f"{path}: job {n} paths must be distinct")
        for target in named[1:]:
            if target in write_targets:
                raise SchemaViolation(f"{path}: {target} written by more than one job")
            write_targets.add(target)
        ratio = merged["keep_ratio"]
        if not isinstance(ratio, (int, float)) or isinstance(ratio, bool):
            raise SchemaViolation(f"{path}: job {n} keep_ratio must be a number")
        win = merged.get("window", 8)
        if win is not None and type(win) is not int:
            raise SchemaViolation(f"{path}: job {n} window must be null or an integer")
        try:
            config = CompressionConfig(
                method=merged["method"],
                keep_ratio=float(ratio),
                window=win,
                weighting=merged.get("weighting", "paper-literal"),
                segments=merged.get("segments", 8),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(f"{path}: job {n}: {exc}") from exc
        jobs.append(
            ManifestJob(
                input=merged["input"],
                output=merged["output"],
                provenance=merged.get("provenance"),
                config=config,
            )
        )
    return tuple(jobs)
