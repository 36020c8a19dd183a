"""Command-line surface: generate datasets, run queries, run experiments.

Exit codes: 0 on success, 2 when the oracle budget is exhausted, 3 on any
file or configuration parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from .core import run_query
from .errors import BudgetExhausted, ConfigError, DatasetFormatError, SelectionError
from .formats import load_experiment_file, load_query_file, read_dataset_csv, write_dataset_csv
from .harness import expand_experiment, run_trials, summarize_arm
from .synth import BetaSpec, gen_beta

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_PARSE = 3


def _cmd_generate(args) -> int:
    spec = BetaSpec(
        alpha=args.alpha,
        beta=args.beta,
        size=args.size,
        noise_sd=args.noise_sd,
        seed=args.seed,
    )
    dataset = gen_beta(spec)
    write_dataset_csv(dataset, args.out)
    print(f"wrote {len(dataset)} records to {args.out}")
    print(f"positives: {dataset.n_positive}")
    return EXIT_OK


def _cmd_query(args) -> int:
    dataset = read_dataset_csv(args.data)
    spec, config = load_query_file(args.query)
    result = run_query(dataset, spec, config=config)
    summary = {
        "tau": None if math.isinf(result.tau) else result.tau,
        "empty_threshold_set": bool(math.isinf(result.tau)),
        "oracle_calls": result.oracle_calls,
        "result_size": len(result),
    }
    summary.update(
        {
            k: result.diagnostics[k]
            for k in ("r1_size", "r2_size", "stage3_calls", "draws", "gamma_prime")
            if k in result.diagnostics
        }
    )
    print(json.dumps(summary, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            for rid in result.ids:
                fh.write(f"{int(rid)}\n")
    return EXIT_OK


def _report_rows(reports):
    for r in reports:
        yield [
            r.arm,
            r.seed,
            repr(r.tau),
            r.oracle_calls,
            r.result_size,
            repr(r.achieved_precision),
            repr(r.achieved_recall),
            int(r.valid),
            r.error,
        ]


def _cmd_experiment(args) -> int:
    config = load_experiment_file(args.config)
    reports = run_trials(config, parallel=args.parallel)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "arm",
                "seed",
                "tau",
                "oracle_calls",
                "result_size",
                "achieved_precision",
                "achieved_recall",
                "valid",
                "error",
            ]
        )
        writer.writerows(_report_rows(reports))
    summaries = [summarize_arm(arm, reports) for _, arm in expand_experiment(config)]
    with open(args.summary, "w", encoding="utf-8", newline="") as fh:
        json.dump(summaries, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(reports)} trial rows to {args.out}")
    print(f"wrote {len(summaries)} arm summaries to {args.summary}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxyselect",
        description="Budget-limited selection with probabilistic precision/recall guarantees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic dataset CSV")
    gen.add_argument("--alpha", type=float, required=True)
    gen.add_argument("--beta", type=float, required=True)
    gen.add_argument("--size", type=int, required=True)
    gen.add_argument("--noise-sd", type=float, default=0.0, dest="noise_sd")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_generate)

    qry = sub.add_parser("query", help="run one selection query")
    qry.add_argument("--data", required=True, help="dataset CSV path")
    qry.add_argument("--query", required=True, help="query JSON path")
    qry.add_argument("--out", help="write selected record ids here, one per line")
    qry.set_defaults(func=_cmd_query)

    exp = sub.add_parser("experiment", help="run a repeated-trial experiment")
    exp.add_argument("--config", required=True, help="experiment JSON path")
    exp.add_argument("--out", default="reports.csv", help="per-trial CSV output")
    exp.add_argument("--summary", default="summary.json", help="per-arm JSON summary output")
    exp.add_argument("--parallel", type=int, default=1, metavar="N")
    exp.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
