# cltpc/cli.py
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bench.harness import BenchConfig, format_table, run_suite, write_report
from .config import (
    APP_VERSION, DEFAULT_ALPHA, DEFAULT_JOBS, DEFAULT_MASK_P, DEFAULT_PRECISION,
    DEFAULT_ROOT, DEFAULT_RUNS, DEFAULT_SEED,
)
from .data.bitmatrix import BitMatrix, MaskSpec, MaskedBatch, gen_mask
from .errors import DataError, ModelError
from .inference.engine import QueryKind, pc_conditional_sample, pc_evi, pc_mar, pc_mpe
from .io.datatable import load_binary_csv, load_manifest, save_binary_csv, verify_entry
from .io.documents import read_document
from .models.circuit import Circuit, circuit_from_document, save_circuit
from .models.clt import Clt, clt_evi, clt_mar, clt_mpe, fit_clt, save_clt
from .models.compile import compile_clt

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4


# ---------- helpers ----------

def _load_model(path: str) -> Clt | Circuit:
    if not os.path.exists(path):
        raise ModelError(f"{path}: model file not found")
    meta = read_document(path)
    kind = meta.get("kind")
    if kind == "clt":
        return Clt.from_document(meta)
    if kind == "circuit":
        return circuit_from_document(meta)
    raise ModelError(f"{path}: unknown model kind {kind!r}")


def _mask_for(data: BitMatrix, p: float, seed: int) -> MaskedBatch:
    return gen_mask(data, MaskSpec(p, seed))


def _print_elapsed(seconds: float) -> None:
    print(f"elapsed_s\t{seconds:.6f}")


# ---------- commands ----------

def cmd_fit_clt(args) -> int:
    data = load_binary_csv(args.data)
    t0 = time.perf_counter()
    model = fit_clt(data, args.alpha, args.root, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    save_clt(args.out, model)
    print(f"var_count\t{model.var_count}")
    _print_elapsed(elapsed)
    return EXIT_OK


def cmd_compile(args) -> int:
    model = _load_model(args.model)
    if not isinstance(model, Clt):
        raise ModelError(f"{args.model}: compile expects a Chow-Liu tree model")
    t0 = time.perf_counter()
    circuit = compile_clt(model)
    elapsed = time.perf_counter() - t0
    save_circuit(args.out, circuit)
    sums, products, leaves = circuit.counts()
    print(f"sums\t{sums}\nproducts\t{products}\nleaves\t{leaves}")
    _print_elapsed(elapsed)
    return EXIT_OK


def cmd_query(args) -> int:
    model = _load_model(args.model)
    data = load_binary_csv(args.data)
    kind = QueryKind(args.kind)
    q = dict(jobs=args.jobs, precision=args.precision)
    mask = None if kind is QueryKind.EVI else _mask_for(data, args.mask_p, args.seed)

    t0 = time.perf_counter()
    if isinstance(model, Clt):
        if kind is QueryKind.EVI:
            values = clt_evi(model, data, **q)
        elif kind is QueryKind.MAR:
            values = clt_mar(model, mask, **q)
        else:
            values = clt_mpe(model, mask, **q).log_value
    else:
        if kind is QueryKind.EVI:
            values = pc_evi(model, data, **q)
        elif kind is QueryKind.MAR:
            values = pc_mar(model, mask, **q)
        else:
            values = pc_mpe(model, mask, **q).log_value
    elapsed = time.perf_counter() - t0

    print(f"mean_ll\t{float(np.mean(values, dtype=np.float64)):.6f}")
    _print_elapsed(elapsed)
    return EXIT_OK


def cmd_sample(args) -> int:
    model = _load_model(args.model)
    if isinstance(model, Clt):
        model = compile_clt(model)
    data = load_binary_csv(args.data)
    mask = _mask_for(data, args.mask_p, args.seed)
    t0 = time.perf_counter()
    result = pc_conditional_sample(model, mask, args.seed, jobs=args.jobs, precision=args.precision)
    elapsed = time.perf_counter() - t0
    save_binary_csv(args.out, result.completions)
    print(f"mean_ll\t{float(np.mean(result.log_value, dtype=np.float64)):.6f}")
    _print_elapsed(elapsed)
    return EXIT_OK


def _bench_datasets(args) -> List[Tuple[str, BitMatrix]]:
    datasets: List[Tuple[str, BitMatrix]] = []
    for path in args.data or []:
        name = os.path.basename(path).split(".")[0] or path
        datasets.append((name, load_binary_csv(path)))
    if args.manifest:
        wanted = set(args.dataset or [])
        entries = load_manifest(args.manifest)
        unknown = wanted - {e.name for e in entries}
        if unknown:
            raise DataError(f"{args.manifest}: no dataset named {', '.join(sorted(unknown))}")
        for entry in entries:
            if not wanted or entry.name in wanted:
                datasets.append((entry.name, verify_entry(entry)))
    if not datasets:
        raise DataError("bench needs --data PATH or --manifest PATH")
    return datasets


def cmd_bench(args) -> int:
    config = BenchConfig(runs=args.runs, jobs=args.jobs, precision=args.precision,
                         mask_p=args.mask_p, seed=args.seed, alpha=args.alpha, root=args.root)
    reports = run_suite(_bench_datasets(args), config)
    if args.report:
        write_report(args.report, reports)
    print(format_table(reports))
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = _load_model(args.model)
    if isinstance(model, Clt):
        print(f"kind\tclt\nvar_count\t{model.var_count}\nroot\t{model.root}")
        for a, b in model.edges():
            print(f"edge\t{a}\t{b}")
        return EXIT_OK
    rep = model.report
    print(f"kind\tcircuit\nvar_count\t{model.var_count}")
    print(f"sums\t{rep.sums}\nproducts\t{rep.products}\nleaves\t{rep.leaves}")
    det = "unknown" if rep.deterministic is None else str(rep.deterministic).lower()
    print(f"smooth\t{str(rep.smooth).lower()}\ndecomposable\t{str(rep.decomposable).lower()}")
    print(f"deterministic\t{det}")
    for prop, node in rep.violations:
        print(f"violation\t{prop}\t{node}")
    return EXIT_OK


def cmd_datasets_verify(args) -> int:
    for entry in load_manifest(args.manifest):
        if not os.path.exists(entry.path):
            logger.warning("dataset %s is absent (%s)", entry.name, entry.path)
            print(f"{entry.name}\tabsent")
            continue
        data = verify_entry(entry)
        print(f"{entry.name}\tok\tN={data.rows}\tV={data.cols}")
    return EXIT_OK


# ---------- parser ----------

def _add_query_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mask-p", type=float, default=DEFAULT_MASK_P)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    p.add_argument("--precision", type=int, choices=(32, 64), default=DEFAULT_PRECISION)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cltpc",
        description="Chow-Liu trees compiled to probabilistic circuits: fit, compile, query, benchmark.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-clt", help="learn a Chow-Liu tree from a 0/1 CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--root", type=int, default=DEFAULT_ROOT)
    p.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_clt)

    p = sub.add_parser("compile", help="compile a Chow-Liu tree file into a circuit file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("query", help="mean log-likelihood of EVI / MAR / MPE queries")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=("evi", "mar", "mpe"), required=True)
    _add_query_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("sample", help="conditional samples for randomly marginalized data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_query_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", help="run the timing protocol and write a TSV report")
    p.add_argument("--data", action="append", help="0/1 CSV; may be repeated")
    p.add_argument("--manifest")
    p.add_argument("--dataset", action="append", help="manifest entry name; may be repeated")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--root", type=int, default=DEFAULT_ROOT)
    p.add_argument("--report")
    _add_query_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print the structure of a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("datasets", help="dataset manifest management")
    dsub = p.add_subparsers(dest="action", required=True)
    v = dsub.add_parser("verify", help="check every manifest entry's checksum, N and V")
    v.add_argument("--manifest", required=True)
    v.set_defaults(func=cmd_datasets_verify)

    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="cltpc %(levelname)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except ValueError as e:
        if isinstance(e, ModelError):
            print(f"cltpc: model error: {e}", file=sys.stderr)
            return EXIT_MODEL
        if isinstance(e, DataError):
            print(f"cltpc: data error: {e}", file=sys.stderr)
            return EXIT_DATA
        print(f"cltpc: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        where = f" ({e.filename})" if getattr(e, "filename", None) else ""
        print(f"cltpc: file error{where}: {e.strerror or e}", file=sys.stderr)
        return EXIT_DATA
