"""Command-line interface: the full pipeline plus one subcommand per stage.

Exit codes: 0 success, 1 stage failure, 2 lint errors, 3 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from e2egen import __version__, crawl, gateway, metrics, pipeline, robot
from e2egen.config import ConfigError, load_config
from e2egen.dom import parse_html
from e2egen.model import slugify
from e2egen.xpath import UnsupportedXPath, describe_matches, evaluate, parse_xpath

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_LINT_ERRORS = 2
EXIT_CONFIG_ERROR = 3

log = logging.getLogger("e2egen")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="artifact directory")
    parser.add_argument(
        "--snapshot-dir", type=Path, default=Path("snapshots"), help="page snapshot store"
    )
    parser.add_argument(
        "--transcript-dir", type=Path, default=Path("transcripts"), help="transcript files"
    )
    parser.add_argument(
        "--provider",
        choices=(gateway.MODE_LIVE, gateway.MODE_RECORD, gateway.MODE_REPLAY),
        default=gateway.MODE_REPLAY,
        help="live calls, record to transcripts, or replay from them (default)",
    )
    parser.add_argument(
        "--offline", action="store_true", help="never fetch pages; use stored snapshots only"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="e2egen",
        description="Generate Robot Framework E2E scripts from natural-language scenarios.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline on scenario files")
    p.add_argument("scenarios", nargs="+", type=Path, help="scenario text files")
    p.add_argument("--baseline-modularizer", action="store_true",
                   help="use the deterministic splitter instead of the LLM for Level 1")
    p.add_argument("--jobs", type=int, default=1, help="concurrent scenario runs")
    _add_common(p)

    p = sub.add_parser("modularize", help="Level 1 only: scenario -> page-module spec")
    p.add_argument("scenario", type=Path)
    p.add_argument("--baseline-modularizer", action="store_true")
    _add_common(p)

    p = sub.add_parser("crawl", help="snapshot every module page of a spec")
    p.add_argument("spec", type=Path)
    _add_common(p)

    p = sub.add_parser("extract", help="Level 2a: fill extracted_data from snapshots")
    p.add_argument("spec", type=Path)
    _add_common(p)

    p = sub.add_parser("refine", help="Level 2b: refine elements and classify selectors")
    p.add_argument("spec", type=Path)
    _add_common(p)

    p = sub.add_parser("emit", help="Level 3: generate the Robot Framework script")
    p.add_argument("spec", type=Path)
    _add_common(p)

    p = sub.add_parser("lint", help="lint a Robot Framework script")
    p.add_argument("script", type=Path)
    p.add_argument("--spec", type=Path, default=None, help="spec for title cross-checks")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None, help="write findings JSON here")

    p = sub.add_parser("xpath-eval", help="evaluate an XPath against an HTML file")
    p.add_argument("file", type=Path)
    p.add_argument("expr")

    p = sub.add_parser("evaluate", help="compute the metrics report from a counts CSV")
    p.add_argument("--counts", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("md", "csv"), default="md")

    return parser


def _context(args: argparse.Namespace) -> pipeline.PipelineContext:
    config = load_config(args.config)
    return pipeline.PipelineContext.create(
        config=config,
        out_dir=args.out,
        snapshot_dir=args.snapshot_dir,
        transcript_dir=args.transcript_dir,
        mode=args.provider,
        offline=args.offline,
        baseline_modularizer=getattr(args, "baseline_modularizer", False),
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG_ERROR
    except gateway.TemplateError as exc:
        log.error("templates: %s", exc)
        return EXIT_CONFIG_ERROR
    except pipeline.StageFailure as exc:
        log.error("%s", exc)
        return EXIT_STAGE_FAILURE


def _dispatch(args: argparse.Namespace) -> int:
    command = args.command
    if command == "run":
        return _cmd_run(args)
    if command == "modularize":
        ctx = _context(args)
        scenario = pipeline.load_scenario_file(args.scenario)
        pipeline.stage_modularize(ctx, scenario)
        case_id = slugify(scenario.title)
        print(ctx.case_dir(case_id) / f"{case_id}.spec.json")
        return EXIT_OK
    if command == "crawl":
        ctx = _context(args)
        spec = pipeline.load_spec_file(args.spec)
        for snapshot in pipeline.acquire_snapshots(ctx, spec):
            print(crawl.snapshot_path(ctx.snapshot_dir, snapshot.url))
        return EXIT_OK
    if command == "extract":
        ctx = _context(args)
        spec = pipeline.load_spec_file(args.spec)
        snapshots = pipeline.acquire_snapshots(ctx, spec)
        pipeline.stage_extract(ctx, spec, snapshots)
        return EXIT_OK
    if command == "refine":
        ctx = _context(args)
        spec = pipeline.load_spec_file(args.spec)
        snapshots = pipeline.acquire_snapshots(ctx, spec)
        pipeline.stage_refine(ctx, spec, snapshots)
        return EXIT_OK
    if command == "emit":
        ctx = _context(args)
        spec = pipeline.load_spec_file(args.spec)
        pipeline.stage_generate(ctx, spec)
        return EXIT_OK
    if command == "lint":
        return _cmd_lint(args)
    if command == "xpath-eval":
        return _cmd_xpath_eval(args)
    if command == "evaluate":
        return _cmd_evaluate(args)
    raise AssertionError(f"unhandled command {command}")


def _cmd_run(args: argparse.Namespace) -> int:
    ctx = _context(args)
    results = pipeline.run_many(ctx, args.scenarios, jobs=args.jobs)
    worst = EXIT_OK
    for path, result in results:
        if isinstance(result, pipeline.StageFailure):
            print(f"{path}: FAILED {result}", file=sys.stderr)
            worst = max(worst, EXIT_STAGE_FAILURE)
            continue
        errors = result.lint_errors
        status = "ok" if errors == 0 else f"{errors} lint error(s)"
        print(f"{path}: {result.case_id}: {status}")
        if errors:
            worst = max(worst, EXIT_LINT_ERRORS)
    return worst


def _cmd_lint(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    try:
        script = robot.parse_robot(args.script.read_text(encoding="utf-8"))
    except (OSError, robot.ParseError) as exc:
        log.error("lint: %s", exc)
        return EXIT_STAGE_FAILURE
    spec = pipeline.load_spec_file(args.spec) if args.spec else None
    findings = robot.lint(script, spec, robot.load_whitelist(config.whitelist_path))
    output = robot.findings_to_json(findings)
    if args.out:
        args.out.write_text(output, encoding="utf-8")
    print(output, end="")
    return EXIT_LINT_ERRORS if robot.has_errors(findings) else EXIT_OK


def _cmd_xpath_eval(args: argparse.Namespace) -> int:
    try:
        expr = parse_xpath(args.expr)
    except UnsupportedXPath as exc:
        log.error("xpath-eval: %s", exc)
        return EXIT_STAGE_FAILURE
    dom = parse_html(args.file.read_text(encoding="utf-8"))
    matches = evaluate(expr, dom)
    print(f"{len(matches)} match(es)")
    for html in describe_matches(expr, dom):
        print(html)
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    fmt = "markdown" if args.format == "md" else "csv"
    try:
        report = pipeline.evaluate_counts(args.counts, fmt)
    except metrics.MetricsError as exc:
        log.error("evaluate: %s", exc)
        return EXIT_STAGE_FAILURE
    if args.out:
        args.out.write_text(report, encoding="utf-8")
    print(report, end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
