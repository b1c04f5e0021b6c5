"""Command line entry point.

usage: seqfusion {extract,eval-re,transform,edit-qa,eval-qa,pipeline} [options]

Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from seqfusion import pipeline
from seqfusion.errors import BackendError, DataError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="training (or full) dataset, JSON or JSON-lines")
    p.add_argument("--kind", required=True, choices=["DCE", "MEE", "dce", "mee"])
    p.add_argument("--test-dataset", help="separate test file; disables the seeded split")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument(
        "--backend",
        default="mock:oracle",
        help="live | replay | mock:oracle | mock:refuse | mock:script=PATH",
    )
    p.add_argument("--model", default="gpt-4", help="model for extraction")
    p.add_argument("--qa-model", help="model answering edit prompts (default: --model)")
    p.add_argument("--endpoint", default="https://api.openai.com/v1")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY", help="env var holding the credential")
    p.add_argument("--cache", help="JSON-lines response cache")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--style", default="CoT", choices=["CoT", "FewShot", "cot", "fewshot"])
    p.add_argument("--demos", type=int, default=8, help="demonstrations per prompt")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--templates", help="directory of prompt/fact/question template overrides")
    p.add_argument("--adjudication", help="JSON-lines of {sample_id, D, note} human verdicts")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures in reports/")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqfusion", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("extract", help="run relation extraction over the test split"))
    p = sub.add_parser("eval-re", help="score predictions (exact/partial x positive/any F1)")
    _common(p)
    p.add_argument("--predictions", help="default: OUT/predictions.jsonl")
    p = sub.add_parser("transform", help="verbalize predicted relations as facts")
    _common(p)
    p.add_argument("--predictions", help="default: OUT/predictions.jsonl")
    p = sub.add_parser("edit-qa", help="answer edit prompts built from facts")
    _common(p)
    p.add_argument("--facts", help="default: OUT/facts.jsonl")
    p = sub.add_parser("eval-qa", help="score answers and tabulate error types")
    _common(p)
    p.add_argument("--answers", help="default: OUT/answers.jsonl")
    _common(sub.add_parser("pipeline", help="all stages in sequence"))
    return parser


def config_from_args(args: argparse.Namespace) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        dataset=args.dataset,
        kind=args.kind.upper(),
        test_dataset=args.test_dataset,
        test_fraction=args.test_fraction,
        backend=args.backend,
        model=args.model,
        qa_model=args.qa_model,
        endpoint=args.endpoint,
        api_key_env=args.api_key_env,
        cache=args.cache,
        style="FewShot" if args.style.lower() == "fewshot" else "CoT",
        templates=args.templates,
        seed=args.seed,
        demos=args.demos,
        concurrency=args.concurrency,
        adjudication=args.adjudication,
        figures=not args.no_figures,
        out=args.out,
    )


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    out = Path(config.out)
    if args.command == "extract":
        print(pipeline.stage_extract(config))
    elif args.command == "eval-re":
        table = pipeline.stage_eval_re(config, args.predictions or out / pipeline.PREDICTIONS)
        print(table.to_text(), end="")
    elif args.command == "transform":
        print(pipeline.stage_transform(config, args.predictions or out / pipeline.PREDICTIONS))
    elif args.command == "edit-qa":
        print(pipeline.stage_edit_qa(config, args.facts or out / pipeline.FACTS))
    elif args.command == "eval-qa":
        result = pipeline.stage_eval_qa(config, args.answers or out / pipeline.ANSWERS)
        print(result.accuracy.to_text(), end="")
    elif args.command == "pipeline":
        results = pipeline.run_pipeline(config)
        print(results["re"].to_text(), end="")
        print(f"QA accuracy {results['qa'].accuracy.percent:.1f}%")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
