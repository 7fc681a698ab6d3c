"""Command-line harness.

    polyargmax <task> (--input PATH | --gen SPEC) [--n N] [--count K]
                      [--grid CELLS] [--seed N] [--out PATH] [--format csv|json]

Tasks: argmax-sweep, he-bench, nucleus-violation, converge-trace,
grad-check, synth. Exit codes: 0 ok, 2 input/format error, 3 reproduction
gate failed (nucleus-violation with a non-zero beta-cut rate).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys

import numpy as np

from . import experiments as ex
from .errors import BadSpec, FormatError, InvalidParams, NonFiniteError
from .io import ingest, write_jsonl, write_lgt1
from .sampling import SamplerConfig
from .synth import fixture, synthesize

EXIT_OK, EXIT_FORMAT, EXIT_GATE = 0, 2, 3

TASKS = ("argmax-sweep", "he-bench", "nucleus-violation", "converge-trace", "grad-check", "synth")

DEFAULT_GRIDS = {
    "argmax-sweep": "4:13:15,5:9:15",
    "he-bench": "4:16/4/4/6:5/3/3/3",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyargmax", description="Polynomial argmax and sampling experiments")
    ap.add_argument("task", choices=TASKS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--input", help="LGT1 or JSON-lines logits file")
    src.add_argument("--gen", help="generator spec, e.g. peaked:3,2 or normal:170,10")
    src.add_argument("--fixture", choices=("recovery", "nucleus", "he"), help="built-in fixture set")
    ap.add_argument("--n", type=int, default=4096, help="vector length for --gen")
    ap.add_argument("--count", type=int, default=100, help="number of vectors for --gen")
    ap.add_argument("--grid", help="T:p:c cells, comma separated; ranges a-b/step, schedules 16/4/4/6")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="output path (default stdout)")
    ap.add_argument("--format", choices=("csv", "json", "lgt1", "jsonl"), default=None)
    ap.add_argument("--alpha-bits", type=int, default=11, help="approximation preset for he-bench")
    ap.add_argument("--slots", type=int, default=None, help="slot count for he-bench")
    ap.add_argument("--nucleus-mass", type=float, default=0.9)
    ap.add_argument("--tail-mass", type=float, default=None)
    ap.add_argument("--draws", type=int, default=1000)
    ap.add_argument("--no-gate", action="store_true", help="never exit 3 in nucleus-violation")
    return ap


def _load(args) -> list[np.ndarray]:
    if args.input:
        return ingest(args.input)
    if args.fixture:
        return list(fixture(args.fixture))
    spec = args.gen or "normal:0,1"
    return list(synthesize(spec, args.n, args.count, args.seed))


def _to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v)
                         for k, v in r.items()})
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    vectors = _load(args)
    fmt = args.format
    if args.task == "synth":
        if not args.out:
            raise BadSpec("synth needs --out")
        if (fmt or "lgt1") == "lgt1":
            write_lgt1(args.out, np.stack(vectors))
        elif fmt == "jsonl":
            write_jsonl(args.out, vectors)
        else:
            raise BadSpec("synth writes lgt1 or jsonl")
        return EXIT_OK
    if fmt in ("lgt1", "jsonl"):
        raise BadSpec(f"--format {fmt} only applies to synth")
    n = len(vectors[0])
    grid_text = args.grid if args.grid is not None else DEFAULT_GRIDS.get(args.task)
    grid = ex.parse_grid(grid_text) if grid_text is not None else [ex.default_cell(n)]
    status = EXIT_OK
    if args.task == "argmax-sweep":
        rows = ex.argmax_sweep(vectors, grid)
        payload = {"rows": rows, "best": ex.best_per_T(rows)}
    elif args.task == "he-bench":
        rows = ex.he_bench(vectors, grid[0], alpha_bits=args.alpha_bits, slots=args.slots)
        payload = {"rows": rows}
        fmt = fmt or "json"
    elif args.task == "nucleus-violation":
        cfg = SamplerConfig(args.nucleus_mass, args.tail_mass, args.seed)
        rows, summary = ex.nucleus_violation(vectors, cfg, args.draws)
        payload = {"rows": rows, "summary": summary}
        if summary["betaCutRate"]["mean"] > 0 and not args.no_gate:
            status = EXIT_GATE
        if (fmt or "csv") == "csv":
            r = summary
            sys.stderr.write(f"gumbel {100 * r['gumbelRate']['mean']:.2f}% +- {100 * r['gumbelRate']['std']:.2f}%  "
                             f"beta-cut {100 * r['betaCutRate']['mean']:.2f}% +- "
                             f"{100 * r['betaCutRate']['std']:.2f}%\n")
    elif args.task == "converge-trace":
        rows = ex.converge_trace(vectors, grid[0])
        payload = {"rows": rows}
    else:
        rows = ex.grad_check(vectors, grid[0], seed=args.seed)
        payload = {"rows": rows}
    fmt = fmt or "csv"
    _emit(_to_csv(rows) if fmt == "csv" else json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return status


def main(argv=None) -> int:
    try:
        return run(argv)
    except (FormatError, NonFiniteError, BadSpec, InvalidParams, OSError) as exc:
        sys.stderr.write(f"polyargmax: {exc}\n")
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
