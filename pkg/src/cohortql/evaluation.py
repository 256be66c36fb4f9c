"""Benchmark replay and the accuracy / F1 / edit-distance report.

The harness runs each labeled natural-language case through the
pipeline, judges the outcome (human labels are authoritative; otherwise
the result table is compared against the expected literal), and
aggregates:

* accuracy = C / n
* f1 = 2C / (2C + W), the harmonic aggregate over correct count C and
  wrong count W = n - C
* Levenshtein statistics over (generated, corrected) pairs of the
  incorrect cases — raw, plus a whitespace-collapsed variant since
  formatting-only edits arguably should not count.
"""

from __future__ import annotations

import json
import logging
import statistics
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from cohortql.catalog import Catalog
from cohortql.distance import levenshtein
from cohortql.pipeline import (
    CorrectionTranscript,
    OUTCOME_SUCCESS,
    PipelineConfig,
    result_table_from_dict,
    run_pipeline,
    transcript_to_dict,
)
from cohortql.llm import Provider
from cohortql.sqlengine import ResultTable, parse_query

log = logging.getLogger(__name__)

CATEGORIES = ("information_extraction", "cohort_discovery")


class BenchmarkParseError(Exception):
    pass


class UnjudgeableError(Exception):
    pass


@dataclass(frozen=True)
class BenchmarkCase:
    id: str
    user_input: str
    category: str
    expected_result: ResultTable | None = None
    expected_query: str | None = None
    human_label: str | None = None  # correct | incorrect
    corrected_query: str | None = None

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise BenchmarkParseError(
                f"case {self.id!r}: unknown category {self.category!r}"
            )
        if self.human_label not in (None, "correct", "incorrect"):
            raise BenchmarkParseError(
                f"case {self.id!r}: invalid human_label {self.human_label!r}"
            )
        if self.expected_result is None and self.human_label is None:
            raise BenchmarkParseError(
                f"case {self.id!r}: needs expected_result or human_label"
            )
        if self.corrected_query is not None and self.human_label != "incorrect":
            raise BenchmarkParseError(
                f"case {self.id!r}: corrected_query requires human_label=incorrect"
            )


def load_benchmark(path: Path | str) -> list[BenchmarkCase]:
    path = Path(path)
    cases: list[BenchmarkCase] = []
    seen: set[str] = set()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BenchmarkParseError(f"cannot read {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BenchmarkParseError(f"{path}:{lineno}: {exc}") from None
        try:
            expected = None
            if record.get("expected_result") is not None:
                expected = result_table_from_dict(record["expected_result"])
            case = BenchmarkCase(
                id=str(record["id"]),
                user_input=record["user_input"],
                category=record["category"],
                expected_result=expected,
                expected_query=record.get("expected_query"),
                human_label=record.get("human_label"),
                corrected_query=record.get("corrected_query"),
            )
        except KeyError as exc:
            raise BenchmarkParseError(
                f"{path}:{lineno}: missing field {exc}"
            ) from None
        if case.id in seen:
            raise BenchmarkParseError(f"{path}:{lineno}: duplicate id {case.id!r}")
        seen.add(case.id)
        cases.append(case)
    if not cases:
        raise BenchmarkParseError(f"{path}: benchmark is empty")
    return cases


def _tables_match(
    actual: ResultTable, expected: ResultTable, ordered: bool
) -> bool:
    """Cell-level comparison; column names are ignored on purpose, since
    equivalent queries may alias columns differently."""
    if len(actual.column_names) != len(expected.column_names):
        return False
    if ordered:
        return actual.rows == expected.rows
    return Counter(actual.rows) == Counter(expected.rows)


def judge_case(
    case: BenchmarkCase,
    transcript: CorrectionTranscript,
    catalog: Catalog,
) -> str:
    """``correct`` or ``incorrect``; human labels win over auto-judging."""
    if case.human_label is not None:
        return case.human_label
    if case.expected_result is None:
        raise UnjudgeableError(f"case {case.id!r} has no label and no expectation")
    if transcript.outcome != OUTCOME_SUCCESS or transcript.final_result is None:
        return "incorrect"
    final_query = transcript.final_query
    ordered = False
    if final_query:
        ordered = bool(parse_query(final_query).order_by)
    matched = _tables_match(transcript.final_result, case.expected_result, ordered)
    return "correct" if matched else "incorrect"


@dataclass(frozen=True)
class CaseJudgment:
    case_id: str
    category: str
    verdict: str  # correct | incorrect
    outcome: str
    attempt_count: int


@dataclass(frozen=True)
class EvalReport:
    n: int
    correct: int
    accuracy: float
    f1: float
    per_category: dict[str, dict[str, int]]
    edit_distances: tuple[int, ...]
    edit_mean: float | None
    edit_std: float | None
    edit_distances_collapsed: tuple[int, ...]
    edit_mean_collapsed: float | None
    edit_std_collapsed: float | None
    per_case: tuple[CaseJudgment, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "per_category": self.per_category,
            "edit_distances": list(self.edit_distances),
            "edit_mean": self.edit_mean,
            "edit_std": self.edit_std,
            "edit_distances_collapsed": list(self.edit_distances_collapsed),
            "edit_mean_collapsed": self.edit_mean_collapsed,
            "edit_std_collapsed": self.edit_std_collapsed,
            "per_case": [
                {
                    "case_id": j.case_id,
                    "category": j.category,
                    "verdict": j.verdict,
                    "outcome": j.outcome,
                    "attempt_count": j.attempt_count,
                }
                for j in self.per_case
            ],
        }


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def _stats(values: list[int]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = statistics.mean(values)
    std = statistics.stdev(values) if len(values) > 1 else None
    return float(mean), (float(std) if std is not None else None)


def compute_metrics(
    judgments: list[CaseJudgment],
    incorrect_pairs: list[tuple[str, str]],
) -> EvalReport:
    """Aggregate verdicts and edit distances into the final report."""
    if not judgments:
        raise ValueError("judgments must be non-empty")
    n = len(judgments)
    correct = sum(1 for j in judgments if j.verdict == "correct")
    wrong = n - correct
    accuracy = correct / n
    f1 = (2 * correct) / (2 * correct + wrong) if correct else 0.0

    per_category: dict[str, dict[str, int]] = {}
    for j in judgments:
        bucket = per_category.setdefault(j.category, {"n": 0, "correct": 0})
        bucket["n"] += 1
        if j.verdict == "correct":
            bucket["correct"] += 1

    distances = [levenshtein(g, c) for g, c in incorrect_pairs]
    collapsed = [
        levenshtein(_collapse_ws(g), _collapse_ws(c)) for g, c in incorrect_pairs
    ]
    mean, std = _stats(distances)
    mean_c, std_c = _stats(collapsed)

    return EvalReport(
        n=n,
        correct=correct,
        accuracy=accuracy,
        f1=f1,
        per_category=per_category,
        edit_distances=tuple(distances),
        edit_mean=mean,
        edit_std=std,
        edit_distances_collapsed=tuple(collapsed),
        edit_mean_collapsed=mean_c,
        edit_std_collapsed=std_c,
        per_case=tuple(judgments),
    )


def _last_extracted_query(transcript: CorrectionTranscript) -> str | None:
    for attempt in reversed(transcript.attempts):
        if attempt.extracted_query is not None:
            return attempt.extracted_query
    return None


def render_report_text(report: EvalReport) -> str:
    lines = []
    header = f"{'case':<8} {'category':<24} {'outcome':<18} {'att':>3}  verdict"
    lines.append(header)
    lines.append("-" * len(header))
    for j in report.per_case:
        lines.append(
            f"{j.case_id:<8} {j.category:<24} {j.outcome:<18} "
            f"{j.attempt_count:>3}  {j.verdict}"
        )
    lines.append("")
    lines.append(f"n = {report.n}, correct = {report.correct}")
    lines.append(f"accuracy = {report.accuracy:.4f}")
    lines.append(f"f1 = {report.f1:.4f}")
    for name, bucket in sorted(report.per_category.items()):
        lines.append(f"  {name}: {bucket['correct']}/{bucket['n']} correct")
    if report.edit_mean is not None:
        std = f"{report.edit_std:.2f}" if report.edit_std is not None else "n/a"
        lines.append(
            f"edit distance over {len(report.edit_distances)} corrected pairs: "
            f"mean = {report.edit_mean:.2f}, std = {std}"
        )
        std_c = (
            f"{report.edit_std_collapsed:.2f}"
            if report.edit_std_collapsed is not None
            else "n/a"
        )
        lines.append(
            f"  whitespace-collapsed: mean = {report.edit_mean_collapsed:.2f}, "
            f"std = {std_c}"
        )
    return "\n".join(lines) + "\n"


def run_benchmark(
    benchmark_file: Path | str,
    catalog: Catalog,
    provider: Provider,
    config: PipelineConfig = PipelineConfig(),
    out_dir: Path | str | None = None,
) -> EvalReport:
    """Replay every case, judge, aggregate; optionally write the report."""
    cases = load_benchmark(benchmark_file)
    judgments: list[CaseJudgment] = []
    pairs: list[tuple[str, str]] = []
    transcripts: list[dict] = []
    for case in cases:
        case_provider = provider.scoped(case.id)
        transcript = run_pipeline(case.user_input, catalog, case_provider, config)
        verdict = judge_case(case, transcript, catalog)
        judgments.append(
            CaseJudgment(
                case_id=case.id,
                category=case.category,
                verdict=verdict,
                outcome=transcript.outcome,
                attempt_count=len(transcript.attempts),
            )
        )
        if verdict == "incorrect" and case.corrected_query is not None:
            generated = _last_extracted_query(transcript)
            if generated is not None:
                pairs.append((generated, case.corrected_query))
        transcripts.append({"case_id": case.id, **transcript_to_dict(transcript)})
        log.info("case %s: %s (%s)", case.id, verdict, transcript.outcome)

    report = compute_metrics(judgments, pairs)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        (out / "report.txt").write_text(
            render_report_text(report), encoding="utf-8"
        )
        (out / "transcripts.jsonl").write_text(
            "".join(json.dumps(t) + "\n" for t in transcripts),
            encoding="utf-8",
        )
    return report


__all__ = [
    "BenchmarkCase",
    "BenchmarkParseError",
    "CaseJudgment",
    "EvalReport",
    "UnjudgeableError",
    "compute_metrics",
    "judge_case",
    "levenshtein",
    "load_benchmark",
    "render_report_text",
    "run_benchmark",
]
