"""Command-line front end: compress, gen, verify, bench, compare.

Output contract: every summary or report line on stdout is a sequence of
space-separated key=value tokens (values never contain spaces; file keys
carry basenames, so corpora with spaces in file names are not supported).
Errors go to stderr as "error: <Name>: <message>".

Exit codes: 0 success; 1 verify mismatch; 2 bad arguments; 3 I/O or
format problems (missing files, malformed containers or schemas,
non-finite or empty inputs); 4 a requested compression that cannot be
realized (UnavailableRatio, CannotReachTarget).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .compress import CompressionResult, compress
from .core import (
    METHODS,
    WEIGHTINGS,
    CompressionConfig,
    Provenance,
    TokenSequence,
    validate_sequence,
)
from .errors import (
    CannotReachTarget,
    IoFailure,
    SchemaViolation,
    SeqSqueezeError,
    UnavailableRatio,
)
from .tensor_io import (
    ManifestJob,
    read_array,
    read_manifest,
    write_array,
    write_provenance,
    atomic_write,
)
from .testkit import PROFILES, SynthSpec, event_retention, generate, oracle_compress

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_UNREACHABLE = 4

JOBS_ENV = "SEQSQUEEZE_JOBS"


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnavailableRatio, CannotReachTarget) as exc:
        _fail(exc)
        return EXIT_UNREACHABLE
    except SeqSqueezeError as exc:
        _fail(exc)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: InvalidArgument: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _fail(exc: Exception) -> None:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqsqueeze",
        description="Training-free token-sequence compression toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress one array file or a manifest of jobs")
    p.add_argument("--input", help="input array file (single mode)")
    p.add_argument("--output", help="output array file (single mode)")
    p.add_argument("--provenance", help="optional provenance JSON to write")
    p.add_argument("--manifest", help="run manifest JSON (batch mode)")
    p.add_argument("--jobs", type=int, default=None,
                   help=f"parallel manifest jobs (default ${JOBS_ENV} or 1)")
    _add_config_flags(p, required=False)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("gen", help="generate a synthetic array file plus spec sidecar")
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=PROFILES, default="iid-gaussian")
    p.add_argument("--events", type=int, default=4)
    p.add_argument("--mean-span", type=int, default=8)
    p.add_argument("--noise-scale", type=float, default=0.05)
    p.add_argument("--separation-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="compare the engine against the scalar oracle")
    p.add_argument("--input", required=True)
    p.add_argument("--oracle-tolerance", type=float, default=1e-5)
    _add_config_flags(p, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time the compression kernel alone")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--keep-ratio", type=float, required=True)
    p.add_argument("--methods", default=",".join(METHODS),
                   help="comma-separated method list (default: all)")
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--weighting", choices=WEIGHTINGS, default="paper-literal")
    p.add_argument("--segments", type=int, default=8)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="run two configs over a corpus and report")
    p.add_argument("--input", required=True,
                   help="directory of .npy files or a run manifest JSON")
    p.add_argument("--keep-ratio", type=float, required=True)
    for side in ("a", "b"):
        p.add_argument(f"--method-{side}", choices=METHODS, required=True)
        p.add_argument(f"--window-{side}", type=int, default=8)
        p.add_argument(f"--weighting-{side}", choices=WEIGHTINGS, default="paper-literal")
        p.add_argument(f"--segments-{side}", type=int, default=8)
    p.set_defaults(func=cmd_compare)

    return parser


def _add_config_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--method", choices=METHODS, required=required)
    p.add_argument("--keep-ratio", type=float, required=required)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--weighting", choices=WEIGHTINGS, default="paper-literal")
    p.add_argument("--segments", type=int, default=8)


def _config_from_args(args: argparse.Namespace) -> CompressionConfig:
    return CompressionConfig(
        method=args.method,
        keep_ratio=args.keep_ratio,
        window=args.window,
        weighting=args.weighting,
        segments=args.segments,
    )


def _summary_line(config: CompressionConfig, result: CompressionResult,
                  elapsed_s: float, job: int | None = None) -> str:
    fields = [("status", "ok")]
    if job is not None:
        fields.append(("job", job))
    fields += [
        ("method", config.method),
        ("keep_ratio", f"{config.keep_ratio:g}"),
        ("window", result.provenance.window if result.provenance.window is not None else "none"),
        ("weighting", config.weighting),
        ("input_length", result.provenance.original_length),
        ("output_length", result.sequence.length),
        ("passes", len(result.trace.passes)),
        ("elapsed_ms", f"{elapsed_s * 1e3:.3f}"),
    ]
    return " ".join(f"{k}={v}" for k, v in fields)


def _run_job(job: ManifestJob) -> tuple[CompressionConfig, CompressionResult, float]:
    seq = validate_sequence(read_array(job.input))
    t0 = time.perf_counter()
    result = compress(seq, job.config)
    elapsed = time.perf_counter() - t0
    write_array(result.sequence.data, job.output)
    if job.provenance:
        write_provenance(result.provenance, result.trace, job.provenance)
    return job.config, result, elapsed


def cmd_compress(args: argparse.Namespace) -> int:
    if args.manifest:
        if args.input or args.output:
            raise ValueError("--manifest and --input/--output are mutually exclusive")
        return _compress_manifest(args)
    if not args.input or not args.output or not args.method or args.keep_ratio is None:
        raise ValueError("single mode needs --input, --output, --method and --keep-ratio")
    config = _config_from_args(args)
    job = ManifestJob(input=args.input, output=args.output,
                      provenance=args.provenance, config=config)
    config, result, elapsed = _run_job(job)
    print(_summary_line(config, result, elapsed))
    return EXIT_OK


def _resolve_jobs(flag: int | None) -> int:
    if flag is None:
        env = os.environ.get(JOBS_ENV)
        if env is None:
            return 1
        try:
            flag = int(env)
        except ValueError:
            raise ValueError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    if flag < 1:
        raise ValueError(f"--jobs must be >= 1, got {flag}")
    return flag


def _compress_manifest(args: argparse.Namespace) -> int:
    jobs = read_manifest(args.manifest)
    workers = _resolve_jobs(args.jobs)

    def run(indexed: tuple[int, ManifestJob]):
        idx, job = indexed
        try:
            config, result, elapsed = _run_job(job)
            return _summary_line(config, result, elapsed, job=idx), EXIT_OK, None
        except (UnavailableRatio, CannotReachTarget) as exc:
            return _job_error_line(idx, exc), EXIT_UNREACHABLE, exc
        except SeqSqueezeError as exc:
            return _job_error_line(idx, exc), EXIT_IO, exc

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run, enumerate(jobs)))

    exit_code = EXIT_OK
    for line, code, exc in outcomes:  # manifest order regardless of completion order
        print(line)
        if exc is not None:
            _fail(exc)
        if code != EXIT_OK and exit_code == EXIT_OK:
            exit_code = code
    return exit_code


def _job_error_line(idx: int, exc: Exception) -> str:
    return f"status=error job={idx} error={type(exc).__name__}"


def cmd_gen(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        length=args.length,
        dim=args.dim,
        seed=args.seed,
        profile=args.profile,
        events=args.events,
        mean_span=args.mean_span,
        noise_scale=args.noise_scale,
        separation_scale=args.separation_scale,
    )
    seq = generate(spec)
    write_array(seq.data, args.out)
    sidecar = args.out + ".synthspec.json"
    atomic_write(sidecar, (json.dumps(spec.to_dict(), indent=2) + "\n").encode("ascii"))
    print(
        f"status=ok length={spec.length} dim={spec.dim} seed={spec.seed} "
        f"profile={spec.profile}"
    )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    tol = args.oracle_tolerance
    seq = validate_sequence(read_array(args.input))
    engine = compress(seq, config)
    o_seq, o_prov, o_trace = oracle_compress(seq, config)

    failures = 0
    failures += _report("length", _check_length(engine.sequence, o_seq))
    failures += _report("components", _check_components(engine.sequence, o_seq, tol))
    failures += _report("groups", _check_groups(engine.provenance, o_prov))
    failures += _report("trace", _check_trace(engine.trace, o_trace, tol))

    if failures:
        print(f"status=mismatch checks_failed={failures}")
        return EXIT_MISMATCH
    print("status=ok checks=4")
    return EXIT_OK


def _report(name: str, problem: str | None) -> int:
    if problem is None:
        print(f"check={name} status=pass")
        return 0
    print(f"check={name} status=fail {problem}")
    return 1


def _check_length(a: TokenSequence, b: TokenSequence) -> str | None:
    if a.length != b.length:
        return f"engine={a.length} oracle={b.length}"
    return None


def _check_components(a: TokenSequence, b: TokenSequence, tol: float) -> str | None:
    if a.length != b.length:
        return "lengths differ"
    diff = np.abs(a.data.astype(np.float64) - b.data.astype(np.float64))
    worst = float(diff.max()) if diff.size else 0.0
    if worst > tol:
        token, comp = np.unravel_index(int(np.argmax(diff)), diff.shape)
        return (
            f"token={token + 1} component={comp} engine={a.data[token, comp]!r} "
            f"oracle={b.data[token, comp]!r} abs_diff={worst:.3e}"
        )
    return None


def _check_groups(a: Provenance, b: Provenance) -> str | None:
    if a.groups != b.groups:
        for k, (ga, gb) in enumerate(zip(a.groups, b.groups)):
            if ga != gb:
                return f"group={k + 1} engine={list(ga)} oracle={list(gb)}"
        return f"engine_groups={len(a.groups)} oracle_groups={len(b.groups)}"
    if a.dropped != b.dropped:
        return "dropped positions differ"
    return None


def _check_trace(a, b, tol: float) -> str | None:
    if len(a.passes) != len(b.passes):
        return f"engine_passes={len(a.passes)} oracle_passes={len(b.passes)}"
    for p, (ra, rb) in enumerate(zip(a.passes, b.passes)):
        if ra.input_length != rb.input_length:
            return f"pass={p} input_length engine={ra.input_length} oracle={rb.input_length}"
        if ra.source_positions != rb.source_positions or ra.dest_positions != rb.dest_positions:
            return f"pass={p} parity assignment differs"
        # rank order may legally differ at float ties; compare per source
        ma = {m.i: m for m in ra.merges}
        mb = {m.i: m for m in rb.merges}
        if set(ma) != set(mb):
            return f"pass={p} merged sources engine={sorted(ma)} oracle={sorted(mb)}"
        for i in sorted(ma):
            if ma[i].j != mb[i].j:
                return f"pass={p} source={i} dest engine={ma[i].j} oracle={mb[i].j}"
            if abs(ma[i].score - mb[i].score) > tol:
                return (
                    f"pass={p} source={i} score engine={ma[i].score:.9g} "
                    f"oracle={mb[i].score:.9g}"
                )
    return None


def cmd_bench(args: argparse.Namespace) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    if args.repeats < 1 or args.warmup < 0:
        raise ValueError("--repeats must be >= 1 and --warmup >= 0")

    seq = generate(SynthSpec(length=args.length, dim=args.dim, seed=args.seed))
    for method in methods:
        config = CompressionConfig(
            method=method,
            keep_ratio=args.keep_ratio,
            window=args.window,
            weighting=args.weighting,
            segments=args.segments,
        )
        try:
            for _ in range(args.warmup):
                compress(seq, config)
            times_us = []
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                compress(seq, config)
                times_us.append((time.perf_counter() - t0) * 1e6)
        except (UnavailableRatio, CannotReachTarget) as exc:
            print(
                f"status=error method={method} L={args.length} D={args.dim} "
                f"keep_ratio={args.keep_ratio:g} error={type(exc).__name__}"
            )
            _fail(exc)
            continue
        times_us.sort()
        p90 = times_us[max(0, math.ceil(0.9 * len(times_us)) - 1)]
        print(
            f"status=ok method={method} L={args.length} D={args.dim} "
            f"keep_ratio={args.keep_ratio:g} median_us={statistics.median(times_us):.1f} "
            f"p90_us={p90:.1f} repeats={args.repeats} warmup={args.warmup}"
        )
    return EXIT_OK


def _corpus_files(path: str) -> list[str]:
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".npy"))
        return [os.path.join(path, n) for n in names]
    return [job.input for job in read_manifest(path)]


def _size_histogram(prov: Provenance) -> str:
    sizes: dict[int, int] = {}
    for g in prov.groups:
        sizes[len(g)] = sizes.get(len(g), 0) + 1
    return ",".join(f"{size}:{sizes[size]}" for size in sorted(sizes))


def cmd_compare(args: argparse.Namespace) -> int:
    config_a = CompressionConfig(
        method=args.method_a, keep_ratio=args.keep_ratio, window=args.window_a,
        weighting=args.weighting_a, segments=args.segments_a,
    )
    config_b = CompressionConfig(
        method=args.method_b, keep_ratio=args.keep_ratio, window=args.window_b,
        weighting=args.weighting_b, segments=args.segments_b,
    )
    files = _corpus_files(args.input)
    if not files:
        raise ValueError(f"no .npy files under {args.input}")

    distances, lengths_a, lengths_b = [], [], []
    for path in files:
        seq = validate_sequence(read_array(path))
        ra = compress(seq, config_a)
        rb = compress(seq, config_b)
        if ra.sequence.length == rb.sequence.length:
            gap = np.abs(
                ra.sequence.data.astype(np.float64) - rb.sequence.data.astype(np.float64)
            )
            distance = float(gap.max()) if gap.size else 0.0
        else:
            distance = math.inf
        distances.append(distance)
        lengths_a.append(ra.sequence.length)
        lengths_b.append(rb.sequence.length)

        fields = [
            ("file", os.path.basename(path)),
            ("input_length", seq.length),
            ("output_length_a", ra.sequence.length),
            ("output_length_b", rb.sequence.length),
            ("distance", f"{distance:.9g}"),
            ("hist_a", _size_histogram(ra.provenance)),
            ("hist_b", _size_histogram(rb.provenance)),
        ]
        sidecar = path + ".synthspec.json"
        if os.path.exists(sidecar):
            spec = _load_sidecar(sidecar)
            if spec.profile == "piecewise-events":
                fields.append(("retention_a", f"{event_retention(seq, ra.provenance, spec):.6f}"))
                fields.append(("retention_b", f"{event_retention(seq, rb.provenance, spec):.6f}"))
        print(" ".join(f"{k}={v}" for k, v in fields))

    print(
        f"files={len(files)} mean_output_length_a={statistics.mean(lengths_a):g} "
        f"mean_output_length_b={statistics.mean(lengths_b):g} "
        f"mean_distance={statistics.mean(distances):.9g} "
        f"max_distance={max(distances):.9g} "
        f"identical_files={sum(1 for d in distances if d == 0.0)}"
    )
    return EXIT_OK


def _load_sidecar(path: str) -> SynthSpec:
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc
    return SynthSpec.from_dict(doc)
