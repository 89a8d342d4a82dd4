"""Per-case quality metrics and their aggregation.

Counts are ingested from an annotated CSV — correctness columns (C, CS) come
from manual review of executed scripts and are never computed here.  Each
percentage is rounded half-up to an integer, aggregate percentages are the
arithmetic mean of the per-case rounded values (macro average, never a pooled
ratio of summed counts), and standard deviations use the sample (n-1) form
over the rounded column values.  All rounding is exact integer arithmetic, so
no float edge case can flip a displayed value.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, fields
from pathlib import Path


class MetricsError(Exception):
    pass


class DivisionByZeroDenominator(MetricsError):
    def __init__(self, field_name: str, case_id: str):
        self.field = field_name
        self.case_id = case_id
        super().__init__(f"{case_id}: denominator {field_name} is 0")


class InvariantViolation(MetricsError):
    def __init__(self, case_id: str, rule: str):
        self.case_id = case_id
        self.rule = rule
        super().__init__(f"{case_id}: {rule}")


class CsvError(MetricsError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class InsufficientData(MetricsError):
    pass


@dataclass(frozen=True)
class CaseCounts:
    """Raw per-case counts: elements expected/generated/correct, script lines
    total/modified, steps expected/generated/correct."""

    case_id: str
    E: int
    G: int
    C: int
    LOC: int
    ML: int
    ES: int
    GS: int
    CS: int

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.type == "int" and getattr(self, f.name) < 0:
                raise InvariantViolation(self.case_id, f"{f.name} must be non-negative")
        if self.C > self.G:
            raise InvariantViolation(self.case_id, "C must not exceed G")
        if self.CS > self.GS:
            raise InvariantViolation(self.case_id, "CS must not exceed GS")
        if self.ML > self.LOC:
            raise InvariantViolation(self.case_id, "ML must not exceed LOC")


@dataclass(frozen=True)
class CaseMetrics:
    """Derived percentages, half-up rounded to integers (coverage may exceed 100)."""

    element_coverage: int  # G/E
    element_precision: int  # C/G
    element_recall: int  # C/E
    modification_rate: int  # ML/LOC
    step_coverage: int  # GS/ES
    exec_precision: int  # CS/GS
    exec_recall: int  # CS/ES


PERCENT_FIELDS = (
    "element_coverage",
    "element_precision",
    "element_recall",
    "modification_rate",
    "step_coverage",
    "exec_precision",
    "exec_recall",
)


def percentage(numerator: int, denominator: int) -> int:
    """100 * numerator / denominator, rounded half-up, in exact integer math."""
    if denominator == 0:
        raise ZeroDivisionError
    return (200 * numerator + denominator) // (2 * denominator)


def mean_half_up(values: list[int]) -> int:
    """Arithmetic mean of integers, rounded half-up, in exact integer math."""
    n = len(values)
    return (2 * sum(values) + n) // (2 * n)


def compute_case(counts: CaseCounts) -> CaseMetrics:
    """Derive a case's percentages; a zero denominator is an error, never 0%."""

    def pct(num: int, den: int, field_name: str) -> int:
        if den == 0:
            raise DivisionByZeroDenominator(field_name, counts.case_id)
        return percentage(num, den)

    return CaseMetrics(
        element_coverage=pct(counts.G, counts.E, "E"),
        element_precision=pct(counts.C, counts.G, "G"),
        element_recall=pct(counts.C, counts.E, "E"),
        modification_rate=pct(counts.ML, counts.LOC, "LOC"),
        step_coverage=pct(counts.GS, counts.ES, "ES"),
        exec_precision=pct(counts.CS, counts.GS, "GS"),
        exec_recall=pct(counts.CS, counts.ES, "ES"),
    )


@dataclass(frozen=True)
class AggregateReport:
    """Per-case rows plus the General row (count sums, macro-averaged percentages)."""

    counts: tuple[CaseCounts, ...]
    metrics: tuple[CaseMetrics, ...]
    general_counts: CaseCounts
    general_metrics: CaseMetrics
    sd_modification_rate: float | None  # sample SD over the MR column
    sd_step_coverage: float | None  # sample SD over the GS/ES column


def sample_sd(values: list[float] | list[int]) -> float:
    """Sample standard deviation (n-1 denominator)."""
    if len(values) < 2:
        raise InsufficientData("sample standard deviation needs at least 2 values")
    return statistics.stdev(values)


def aggregate(cases: list[CaseCounts]) -> AggregateReport:
    """Sum the count columns and macro-average the rounded percentage columns."""
    if not cases:
        raise MetricsError("aggregate needs at least one case")
    per_case = tuple(compute_case(c) for c in cases)
    general_counts = CaseCounts(
        case_id="General",
        E=sum(c.E for c in cases),
        G=sum(c.G for c in cases),
        C=sum(c.C for c in cases),
        LOC=sum(c.LOC for c in cases),
        ML=sum(c.ML for c in cases),
        ES=sum(c.ES for c in cases),
        GS=sum(c.GS for c in cases),
        CS=sum(c.CS for c in cases),
    )
    general_metrics = CaseMetrics(
        **{
            name: mean_half_up([getattr(m, name) for m in per_case])
            for name in PERCENT_FIELDS
        }
    )
    n = len(cases)
    return AggregateReport(
        counts=tuple(cases),
        metrics=per_case,
        general_counts=general_counts,
        general_metrics=general_metrics,
        sd_modification_rate=(
            sample_sd([m.modification_rate for m in per_case]) if n >= 2 else None
        ),
        sd_step_coverage=(
            sample_sd([m.step_coverage for m in per_case]) if n >= 2 else None
        ),
    )


# ---------------------------------------------------------------------------
# Rendering and ingestion
# ---------------------------------------------------------------------------

# Column layout of the report tables (counts and percentage columns interleaved).
REPORT_COLUMNS = (
    "TC", "E", "G", "C", "G/E", "C/G", "C/E", "LOC", "M", "MR",
    "ES", "GS", "CS", "GS/ES", "CS/GS", "CS/ES",
)

_INGEST_COLUMNS = ("case_id", "E", "G", "C", "LOC", "ML", "ES", "GS", "CS")


def _row_values(counts: CaseCounts, metrics: CaseMetrics) -> list:
    return [
        counts.case_id,
        counts.E, counts.G, counts.C,
        metrics.element_coverage, metrics.element_precision, metrics.element_recall,
        counts.LOC, counts.ML, metrics.modification_rate,
        counts.ES, counts.GS, counts.CS,
        metrics.step_coverage, metrics.exec_precision, metrics.exec_recall,
    ]


_PERCENT_COLUMN_IDX = {4, 5, 6, 9, 13, 14, 15}


def render_report(report: AggregateReport, format: str = "markdown") -> str:
    """Render rows plus the General row as markdown or CSV.

    Markdown marks percentage cells with '%' and appends the SD lines when at
    least two cases are present; CSV stays numeric so it can be re-ingested.
    """
    if format in ("markdown", "md"):
        return _render_markdown(report)
    if format == "csv":
        return _render_csv(report)
    raise MetricsError(f"unknown report format {format!r}")


def _format_cells(values: list, percent_sign: bool) -> list[str]:
    out = []
    for i, v in enumerate(values):
        if percent_sign and i in _PERCENT_COLUMN_IDX:
            out.append(f"{v}%")
        else:
            out.append(str(v))
    return out


def _render_markdown(report: AggregateReport) -> str:
    rows = [
        _format_cells(_row_values(c, m), percent_sign=True)
        for c, m in zip(report.counts, report.metrics)
    ]
    rows.append(
        _format_cells(
            _row_values(report.general_counts, report.general_metrics), percent_sign=True
        )
    )
    widths = [
        max(len(REPORT_COLUMNS[i]), *(len(r[i]) for r in rows))
        for i in range(len(REPORT_COLUMNS))
    ]
    lines = [
        "| " + " | ".join(h.ljust(w) for h, w in zip(REPORT_COLUMNS, widths)) + " |",
        "| " + " | ".join("-" * w for w in widths) + " |",
    ]
    lines += ["| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |" for r in rows]
    if report.sd_modification_rate is not None:
        lines.append("")
        lines.append(f"Sample SD (MR): {report.sd_modification_rate:.2f}")
        lines.append(f"Sample SD (GS/ES): {report.sd_step_coverage:.2f}")
    return "\n".join(lines) + "\n"


def _render_csv(report: AggregateReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for c, m in zip(report.counts, report.metrics):
        writer.writerow(_row_values(c, m))
    writer.writerow(_row_values(report.general_counts, report.general_metrics))
    return buf.getvalue()


def ingest_counts(path: Path | str) -> list[CaseCounts]:
    """Parse an annotated counts CSV into invariant-checked rows.

    The required columns are case_id,E,G,C,LOC,ML,ES,GS,CS ('TC' and 'M' are
    accepted as aliases, so a rendered report CSV round-trips).  Extra columns
    are ignored and aggregate rows labeled 'General' are skipped.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CsvError(0, f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise CsvError(1, "missing header row")
    header = {name.strip(): name for name in reader.fieldnames}
    aliases = {"case_id": ("case_id", "TC"), "ML": ("ML", "M")}
    columns: dict[str, str] = {}
    for wanted in _INGEST_COLUMNS:
        for candidate in aliases.get(wanted, (wanted,)):
            if candidate in header:
                columns[wanted] = header[candidate]
                break
        else:
            raise CsvError(1, f"missing required column {wanted!r}")
    out: list[CaseCounts] = []
    for lineno, row in enumerate(reader, start=2):
        case_id = (row[columns["case_id"]] or "").strip()
        if not case_id:
            raise CsvError(lineno, "empty case_id")
        if case_id.lower() == "general":
            continue
        values: dict[str, int] = {}
        for name in _INGEST_COLUMNS[1:]:
            raw = (row[columns[name]] or "").strip().rstrip("%")
            try:
                values[name] = int(raw)
            except ValueError as exc:
                raise CsvError(lineno, f"column {name} is not an integer: {raw!r}") from exc
        out.append(CaseCounts(case_id=case_id, **values))
    if not out:
        raise CsvError(2, "no data rows")
    return out
