"""Case orchestration: modularize, snapshot, extract, refine, generate, lint.

Every stage reads and writes the interchange files under ``<out>/<case-id>/``,
so a full `run` is byte-identical to chaining the stage subcommands on the
same inputs.  Stage boundaries on disk:

    <case>.modularize.spec.json   page modules, no elements yet
    <case>.spec.json              current specification (final form after refine)
    <case>.extract.spec.json      elements as first extracted
    <case>.refine.spec.json       elements after refinement + dedup
    <case>.validation.csv         selector classifications per module/step
    <case>.robot                  generated script
    <case>.lint.json              lint findings
    <case>.modularize.raw.txt     raw model output, kept when it fails to parse
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from e2egen import crawl, extract, gateway, metrics, modularize, robot
from e2egen.config import PipelineConfig
from e2egen.crawl import PageSnapshot
from e2egen.gateway import MODE_REPLAY, PromptTemplate, Transcript, load_templates, load_transcript
from e2egen.model import (
    BoundaryViolationError,
    SpecError,
    TestScenario,
    TestSpecification,
    parse_scenario_text,
    parse_specification,
    serialize_specification,
    slugify,
)

logger = logging.getLogger(__name__)


class StageFailure(Exception):
    """A pipeline stage failed; carries the stage name for error reporting."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass
class CaseResult:
    case_id: str
    out_dir: Path
    lint_findings: list[robot.LintFinding]

    @property
    def lint_errors(self) -> int:
        return sum(1 for f in self.lint_findings if f.severity == "Error")


@dataclass
class PipelineContext:
    """Everything a case run needs besides the scenario itself."""

    config: PipelineConfig
    templates: dict[str, PromptTemplate]
    out_dir: Path
    snapshot_dir: Path
    transcript_dir: Path
    mode: str = MODE_REPLAY
    offline: bool = False
    baseline_modularizer: bool = False

    @classmethod
    def create(
        cls,
        config: PipelineConfig,
        out_dir: Path | str,
        snapshot_dir: Path | str,
        transcript_dir: Path | str,
        mode: str = MODE_REPLAY,
        offline: bool = False,
        baseline_modularizer: bool = False,
    ) -> "PipelineContext":
        return cls(
            config=config,
            templates=load_templates(config.template_dir),
            out_dir=Path(out_dir),
            snapshot_dir=Path(snapshot_dir),
            transcript_dir=Path(transcript_dir),
            mode=mode,
            offline=offline,
            baseline_modularizer=baseline_modularizer,
        )

    def case_dir(self, case_id: str) -> Path:
        path = self.out_dir / case_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def transcript(self, case_id: str, stage: str) -> Transcript:
        path = self.transcript_dir / f"{case_id}.{stage}.transcript.json"
        try:
            return load_transcript(path, self.mode)
        except gateway.TranscriptError as exc:
            raise StageFailure(stage, exc) from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_modularize(ctx: PipelineContext, scenario: TestScenario) -> TestSpecification:
    """Level 1: scenario -> page modules; writes the Level-1 spec artifacts."""
    case_id = slugify(scenario.title)
    case_dir = ctx.case_dir(case_id)
    if ctx.baseline_modularizer:
        spec = modularize.baseline_modularize(scenario, ctx.config.nav_phrases)
    else:
        try:
            spec = modularize.modularize(
                scenario,
                ctx.templates[gateway.LEVEL_MODULARIZE],
                ctx.transcript(case_id, "modularize"),
                ctx.config,
            )
        except modularize.LlmOutputInvalid as exc:
            _write(case_dir / f"{case_id}.modularize.raw.txt", exc.raw_response)
            raise StageFailure("modularize", exc) from exc
        except (BoundaryViolationError, gateway.GatewayError) as exc:
            raise StageFailure("modularize", exc) from exc
    text = serialize_specification(spec)
    _write(case_dir / f"{case_id}.modularize.spec.json", text)
    _write(case_dir / f"{case_id}.spec.json", text)
    return spec


def acquire_snapshots(ctx: PipelineContext, spec: TestSpecification) -> list[PageSnapshot]:
    """One snapshot per module, in module order, store-backed.

    Offline mode only reads the snapshot store; online mode fetches any page
    missing from the store and persists it.  No session state is carried
    between fetches, so pages reachable only after prior interactions
    snapshot in their unvisited state.
    """
    snapshots: list[PageSnapshot] = []
    for module in spec.modules:
        try:
            snapshot = crawl.load_snapshot(ctx.snapshot_dir, module.url)
        except crawl.IoError:
            if ctx.offline:
                raise StageFailure(
                    "crawler",
                    crawl.IoError(
                        f"--offline set but no stored snapshot for {module.url}"
                    ),
                ) from None
            try:
                snapshot = crawl.fetch(
                    module.url,
                    timeout=ctx.config.fetch_timeout,
                    budget=ctx.config.prune_budget,
                )
            except crawl.CrawlError as exc:
                raise StageFailure("crawler", exc) from exc
            crawl.save_snapshot(snapshot, ctx.snapshot_dir)
        snapshots.append(snapshot)
    return snapshots


def stage_extract(
    ctx: PipelineContext,
    spec: TestSpecification,
    snapshots: list[PageSnapshot],
) -> TestSpecification:
    """Level 2a: fill extracted_data module by module."""
    case_id = slugify(spec.test_case)
    case_dir = ctx.case_dir(case_id)
    transcript = ctx.transcript(case_id, "extract")
    modules = []
    for module, snapshot in zip(spec.modules, snapshots):
        try:
            modules.append(
                extract.extract_elements(
                    module, snapshot, ctx.templates[gateway.LEVEL_EXTRACT], transcript, ctx.config
                )
            )
        except (modularize.LlmOutputInvalid, extract.StepMismatch, gateway.GatewayError) as exc:
            raise StageFailure("extract", exc) from exc
    extracted = replace(spec, modules=tuple(modules))
    text = serialize_specification(extracted)
    _write(case_dir / f"{case_id}.extract.spec.json", text)
    _write(case_dir / f"{case_id}.spec.json", text)
    return extracted


def stage_refine(
    ctx: PipelineContext,
    spec: TestSpecification,
    snapshots: list[PageSnapshot],
) -> TestSpecification:
    """Level 2b: refine + dedup + classify; writes the validation report."""
    case_id = slugify(spec.test_case)
    case_dir = ctx.case_dir(case_id)
    transcript = ctx.transcript(case_id, "refine")
    modules = []
    rows: list[extract.ValidationRow] = []
    for index, (module, snapshot) in enumerate(zip(spec.modules, snapshots)):
        refined, report = extract.refine_elements(
            module,
            snapshot,
            ctx.templates[gateway.LEVEL_REFINE],
            transcript,
            ctx.config,
            module_index=index,
        )
        modules.append(refined)
        rows.extend(report)
    refined_spec = replace(spec, modules=tuple(modules))
    text = serialize_specification(refined_spec)
    _write(case_dir / f"{case_id}.refine.spec.json", text)
    _write(case_dir / f"{case_id}.spec.json", text)
    _write(case_dir / f"{case_id}.validation.csv", _validation_csv(rows))
    return refined_spec


def _validation_csv(rows: list[extract.ValidationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["module", "step", "expression", "classification"])
    for row in rows:
        writer.writerow([row.module_index, row.step, row.expression, row.classification])
    return buf.getvalue()


def stage_generate(ctx: PipelineContext, spec: TestSpecification) -> str:
    """Level 3: specification -> Robot Framework script text."""
    case_id = slugify(spec.test_case)
    case_dir = ctx.case_dir(case_id)
    transcript = ctx.transcript(case_id, "generate")
    try:
        script_text = robot.generate_script(
            spec, ctx.templates[gateway.LEVEL_GENERATE], transcript, ctx.config
        )
    except (modularize.LlmOutputInvalid, robot.ScriptInvalid, gateway.GatewayError) as exc:
        raise StageFailure("generate", exc) from exc
    _write(case_dir / f"{case_id}.robot", script_text)
    return script_text


def stage_lint(
    ctx: PipelineContext, case_id: str, script_text: str, spec: TestSpecification | None
) -> list[robot.LintFinding]:
    case_dir = ctx.case_dir(case_id)
    try:
        parsed = robot.parse_robot(script_text)
    except robot.ParseError as exc:
        raise StageFailure("lint", exc) from exc
    whitelist = robot.load_whitelist(ctx.config.whitelist_path)
    findings = robot.lint(parsed, spec, whitelist)
    _write(case_dir / f"{case_id}.lint.json", robot.findings_to_json(findings))
    return findings


# ---------------------------------------------------------------------------
# Whole-case runs
# ---------------------------------------------------------------------------


def run_case(ctx: PipelineContext, scenario: TestScenario) -> CaseResult:
    """Run every stage for one scenario; raises StageFailure on the first error."""
    case_id = slugify(scenario.title)
    spec = stage_modularize(ctx, scenario)
    snapshots = acquire_snapshots(ctx, spec)
    spec = stage_extract(ctx, spec, snapshots)
    spec = stage_refine(ctx, spec, snapshots)
    script_text = stage_generate(ctx, spec)
    findings = stage_lint(ctx, case_id, script_text, spec)
    return CaseResult(case_id=case_id, out_dir=ctx.case_dir(case_id), lint_findings=findings)


def load_scenario_file(path: Path | str) -> TestScenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StageFailure("scenario", exc) from exc
    try:
        return parse_scenario_text(text)
    except SpecError as exc:
        raise StageFailure("scenario", exc) from exc


def load_spec_file(path: Path | str) -> TestSpecification:
    try:
        return parse_specification(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise StageFailure("spec", exc) from exc
    except SpecError as exc:
        raise StageFailure("spec", exc) from exc


def run_many(
    ctx: PipelineContext, scenario_paths: list[Path], jobs: int = 1
) -> list[tuple[Path, CaseResult | StageFailure]]:
    """Run several scenarios, optionally in parallel; stages stay sequential per case."""

    def one(path: Path) -> CaseResult | StageFailure:
        try:
            return run_case(ctx, load_scenario_file(path))
        except StageFailure as exc:
            return exc

    if jobs <= 1 or len(scenario_paths) <= 1:
        return [(path, one(path)) for path in scenario_paths]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(one, scenario_paths))
    return list(zip(scenario_paths, results))


def evaluate_counts(counts_path: Path | str, format: str = "markdown") -> str:
    """Evaluation entry: annotated counts CSV in, rendered report out."""
    return metrics.render_report(metrics.aggregate(metrics.ingest_counts(counts_path)), format)
