"""Command line entry point: ``ppir <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

from .audit import AuditConfig, audit_privacy
from .capacity import ProblemConfig, capacity_report
from .dataset import Dataset, build_dataset, parse_sizes
from .errors import PpirError, RegimeUnsupported
from .experiment import ExperimentSpec, emit_table, fmt_value, retrieve, run_experiment
from .gf import DEFAULT_MODULUS
from .net import TcpDatabaseServer, TcpEndpoint, parse_address


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _write(args, data: bytes) -> None:
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _spec_from_args(args) -> ExperimentSpec:
    if args.spec:
        return ExperimentSpec.from_dict(json.loads(Path(args.spec).read_text()))
    if args.sizes is None or args.omega is None:
        raise SystemExit("--sizes and --omega (or --spec) are required")
    omega = _ints(args.omega)
    scheme = args.scheme or ("single_server" if args.n == 1 else "ppir" if len(omega) == 1 and args.lam == 1 else "mppir")
    return ExperimentSpec(
        scheme=scheme,
        n=args.n,
        sizes=parse_sizes(args.sizes),
        omega=omega,
        length=args.length,
        lam=args.lam,
        seed=args.seed,
        transport=args.transport,
        repetitions=args.repetitions,
        p=args.p,
        shuffle=args.shuffle,
        s=args.s,
    )


def cmd_dataset_gen(args) -> int:
    ds = build_dataset(parse_sizes(args.sizes), args.length, args.p, args.seed)
    _write(args, ds.dumps().encode())
    return 0


def cmd_serve(args) -> int:
    ds = Dataset.load(args.dataset)
    address = parse_address(args.listen) if args.listen else None
    server = TcpDatabaseServer(ds, address)
    host, port = server.address
    print(f"serving {args.dataset} on {host}:{port}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._server.server_close()
    return 0


def cmd_retrieve(args) -> int:
    if args.endpoints:
        # databases run elsewhere; the dataset file is only the simulator's oracle
        if not args.dataset:
            raise SystemExit("--endpoints needs --dataset for delta and ground truth")
        ds = Dataset.load(args.dataset)
        endpoints = [TcpEndpoint(*parse_address(a)) for a in args.endpoints.split(",")]
        omega = _ints(args.omega)
        rng = random.Random(args.seed)
        s, messages, transcripts = retrieve(ds, len(endpoints), omega, args.lam, endpoints, rng, args.s, args.shuffle)
        download = sum(t.download_symbols for t in transcripts)
        out = {
            "s": s,
            "download_symbols": download,
            "measured_rate": fmt_value(Fraction(args.lam * len(omega) * ds.length, download)),
            "messages": {str(c): [list(m) for m in v] for c, v in messages.items()},
        }
        _write(args, (json.dumps(out) + "\n").encode())
        return 0
    spec = _spec_from_args(args)
    dataset = Dataset.load(args.dataset) if args.dataset else None
    try:
        result = run_experiment(spec, dataset=dataset)
    except RegimeUnsupported as exc:
        print(f"regime unsupported: {exc}", file=sys.stderr)
        if exc.capacity is not None:
            _write(args, emit_table([exc.capacity], args.format))
        return 2
    if args.format == "json":
        _write(args, (json.dumps(result.as_dict(), indent=2) + "\n").encode())
    else:
        _write(args, emit_table([result], args.format))
    return 0 if result.verdict == "PASS" else 1


def cmd_audit(args) -> int:
    cfg = AuditConfig(
        scheme=args.scheme or ("ppir" if args.eta == 1 and args.lam == 1 else "mppir"),
        n=args.n,
        gamma_total=args.classes,
        eta=args.eta,
        lam=args.lam,
        p=args.p,
        shuffle=args.shuffle,
        quotient=args.quotient,
        budget=args.budget,
    )
    report = audit_privacy(cfg)
    _write(args, (report.to_json() + "\n").encode())
    return 0 if report.verdict == "PASS" else 1


def cmd_capacity(args) -> int:
    etas = [args.eta] if args.eta else range(1, args.classes + 1)
    reports = [capacity_report(ProblemConfig(args.n, args.classes, eta, args.lam)) for eta in etas]
    _write(args, emit_table(reports, args.format))
    return 0


def cmd_bench(args) -> int:
    """Every desired set of size η, each repeated ``--repetitions`` times."""
    sizes = parse_sizes(args.sizes)
    results = []
    for omega in combinations(range(1, len(sizes) + 1), args.eta):
        scheme = "single_server" if args.n == 1 else "ppir" if args.eta == 1 and args.lam == 1 else "mppir"
        spec = ExperimentSpec(
            scheme, args.n, sizes, omega, args.length, args.lam, args.seed, args.transport, args.repetitions, args.p
        )
        try:
            results.extend(run_experiment(spec, r) for r in range(args.repetitions))
        except RegimeUnsupported as exc:
            print(f"regime unsupported for omega={omega}: {exc}", file=sys.stderr)
            results.append(exc.capacity)
            break
    _write(args, emit_table(results, args.format))
    return 0 if all(getattr(r, "verdict", "PASS") == "PASS" for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=2, help="number of replicated databases")
    common.add_argument("--lambda", dest="lam", type=int, default=1, help="messages per desired class")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--p", type=int, default=DEFAULT_MODULUS, help="prime field modulus")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json", "markdown"), default="markdown")
    common.add_argument("-v", "--verbose", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--sizes", help="class sizes, e.g. 4,6,10")
    run.add_argument("--L", "--length", dest="length", type=int, help="symbols per message")
    run.add_argument("--omega", help="desired classes, e.g. 1,3 (a single class for PPIR)")
    run.add_argument("--eta", type=int, default=1)
    run.add_argument("--scheme", choices=("ppir", "mppir", "single_server"))
    run.add_argument("--transport", choices=("inproc", "tcp"), default="inproc")
    run.add_argument("--repetitions", type=int, default=1)
    run.add_argument("--s", type=int, help="fix the shared random number instead of drawing it")
    run.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=True)
    run.add_argument("--spec", help="JSON experiment spec file")

    parser = argparse.ArgumentParser(prog="ppir", description="Pliable private information retrieval toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="dataset utilities")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)
    gen = ds_sub.add_parser("gen", parents=[common], help="generate a random dataset file")
    gen.add_argument("--sizes", required=True)
    gen.add_argument("--L", "--length", dest="length", type=int, required=True)
    gen.set_defaults(func=cmd_dataset_gen)

    serve = sub.add_parser("serve", parents=[common], help="serve one database over TCP")
    serve.add_argument("--dataset", required=True)
    serve.add_argument("--listen", help="host:port (default: $PPIR_LISTEN or 127.0.0.1:0)")
    serve.set_defaults(func=cmd_serve)

    ret = sub.add_parser("retrieve", parents=[common, run], help="run one retrieval end to end")
    ret.add_argument("--dataset", help="dataset file (generated from --sizes/--L otherwise)")
    ret.add_argument("--endpoints", help="comma-separated host:port list of running databases")
    ret.set_defaults(func=cmd_retrieve)

    aud = sub.add_parser("audit", parents=[common], help="exact privacy audit")
    aud.add_argument("--classes", type=int, required=True, help="number of classes Γ")
    aud.add_argument("--eta", type=int, default=1)
    aud.add_argument("--scheme", choices=("ppir", "mppir"))
    aud.add_argument("--quotient", action="store_true", help="enumerate orbits instead of raw permutations")
    aud.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=True)
    aud.add_argument("--budget", type=int, default=10**7)
    aud.set_defaults(func=cmd_audit)

    cap = sub.add_parser("capacity", parents=[common], help="capacity bounds table")
    cap.add_argument("--classes", type=int, required=True, help="number of classes Γ")
    cap.add_argument("--eta", type=int, help="desired classes (default: all η)")
    cap.set_defaults(func=cmd_capacity)

    bench = sub.add_parser("bench", parents=[common, run], help="run every desired set and tabulate")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "retrieve" and args.dataset and not args.endpoints:
        ds = Dataset.load(args.dataset)
        args.sizes = args.sizes or ",".join(map(str, ds.classification.sizes))
        args.length = args.length or ds.length
    try:
        return args.func(args)
    except PpirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
