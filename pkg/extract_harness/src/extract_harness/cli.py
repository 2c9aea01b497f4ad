"""extract-harness command line: run extraction jobs and self-checks."""

from __future__ import annotations

import argparse
import sys

from .harness import ExtractionJob, extract, selfcheck


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract-harness",
        description="Produce trace and feature files from an open model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ext = sub.add_parser("extract")
    ext.add_argument("--model", required=True,
                     help="model path or identifier for transformers")
    ext.add_argument("--questions", required=True,
                     help="JSON Lines file with question_id, prompt, gold")
    ext.add_argument("--n-max", type=int, required=True)
    ext.add_argument("--top-k", type=int, default=20)
    ext.add_argument("--top-p", type=float, default=0.95)
    ext.add_argument("--temperature", type=float, default=0.6)
    ext.add_argument("--seed", type=int, default=0)
    ext.add_argument("--max-new-tokens", type=int, default=32)
    ext.add_argument("--out-traces", required=True)
    ext.add_argument("--out-features", required=True)
    ext.add_argument("--answer-rule", default="boxed",
                     help="boxed, mc-letter, or regex:<pattern>")
    ext.add_argument("--skip-labels", action="store_true",
                     help="do not invoke the analyzer CLI for labels")

    chk = sub.add_parser("selfcheck")
    chk.add_argument("--traces", required=True)
    chk.add_argument("--features", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "extract":
        job = ExtractionJob(
            model=args.model,
            questions_path=args.questions,
            n_max=args.n_max,
            out_traces=args.out_traces,
            out_features=args.out_features,
            answer_rule=args.answer_rule,
            top_k=args.top_k,
            top_p=args.top_p,
            temperature=args.temperature,
            seed=args.seed,
            max_new_tokens=args.max_new_tokens,
            label_with_primary=not args.skip_labels,
        )
        try:
            report = extract(job)
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            sys.stderr.write(f"extract failed: {exc}\n")
            return 1
        print(f"extracted {report.questions} questions x {job.n_max} paths "
              f"({report.unparseable_paths} unparseable); "
              f"labels: {'yes' if report.labeled else 'no'}")
        print(f"traces:   {report.trace_path}")
        print(f"features: {report.feature_path}")
        return 0
    report = selfcheck(args.traces, args.features)
    if report.ok:
        print("selfcheck: ok")
        return 0
    for error in report.errors:
        print(f"selfcheck: {error}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
