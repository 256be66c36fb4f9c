"""The generate → extract → execute → correct loop.

One call to :func:`run_pipeline` handles a single natural-language input:
it grounds the model with the schema prompt, asks for a query, and on
any detectable failure (no extractable query, lex/parse/bind/pattern
error, row-limit breach) feeds the formatted error back and retries, up
to a hard attempt cap.  A query that executes but answers the wrong
question is invisible here by design — only human judgment catches it
downstream.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from datetime import date

from cohortql.catalog import Catalog, Cell, ColumnType
from cohortql.llm import (
    ChatMessage,
    Conversation,
    DEFAULT_DELIMITERS,
    ExtractionError,
    GroundingRules,
    Provider,
    ProviderError,
    build_system_prompt,
    extract_query,
    generate_completion,
)
from cohortql.sqlengine import (
    DEFAULT_MAX_RESULT_ROWS,
    QueryError,
    ResultTable,
    bind_query,
    classify_error,
    evaluate_query,
    format_error,
    parse_query,
)

log = logging.getLogger(__name__)

OUTCOME_SUCCESS = "Success"
OUTCOME_EXHAUSTED = "ExhaustedAttempts"
OUTCOME_PROVIDER_FAILURE = "ProviderFailure"


@dataclass(frozen=True)
class PipelineConfig:
    max_attempts: int = 10
    strict_extraction: bool = False
    max_result_rows: int = DEFAULT_MAX_RESULT_ROWS
    delimiters: tuple[str, str] = DEFAULT_DELIMITERS

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class AttemptError:
    """Uniform view of extraction and query errors for transcripts."""

    kind: str  # LexError | ParseError | BindError | PatternError | LimitError | ExtractionError
    group: str  # Syntax | Resource (Semantic is assigned by humans only)
    message: str
    formatted: str  # exact text embedded in the correction prompt
    position: tuple[int, int] | None = None
    token: str | None = None
    hint: str | None = None

    @classmethod
    def from_query_error(cls, err: QueryError) -> "AttemptError":
        return cls(
            kind=err.kind.value,
            group=classify_error(err).value,
            message=err.message,
            formatted=format_error(err),
            position=err.position,
            token=err.token,
            hint=err.hint,
        )

    @classmethod
    def from_extraction_error(cls, err: ExtractionError) -> "AttemptError":
        return cls(
            kind="ExtractionError",
            group="Syntax",
            message=err.message,
            formatted=f"ExtractionError: {err.message}",
        )


@dataclass(frozen=True)
class Attempt:
    index: int  # 1-based
    raw_response: str
    extracted_query: str | None
    error: AttemptError | None
    result: ResultTable | None
    elapsed_s: float

    def __post_init__(self) -> None:
        if (self.error is None) == (self.result is None):
            raise ValueError("an attempt has exactly one of error, result")
        if self.result is not None and self.extracted_query is None:
            raise ValueError("a result requires an extracted query")


@dataclass(frozen=True)
class CorrectionTranscript:
    user_input: str
    attempts: tuple[Attempt, ...]
    outcome: str
    final_result: ResultTable | None = None
    failure_detail: str | None = None

    @property
    def final_query(self) -> str | None:
        if self.outcome == OUTCOME_SUCCESS and self.attempts:
            return self.attempts[-1].extracted_query
        return None


def build_correction_prompt(
    failed_query: str | None,
    error_text: str,
    delimiters: tuple[str, str] = DEFAULT_DELIMITERS,
) -> ChatMessage:
    """Deterministic user message asking the model to repair its query."""
    open_tok, close_tok = delimiters
    if failed_query is not None:
        content = (
            "The previous query failed to execute.\n"
            "\n"
            "Query:\n"
            f"{open_tok}\n"
            f"{failed_query}\n"
            f"{close_tok}\n"
            "\n"
            "Error:\n"
            f"{error_text}\n"
            "\n"
            f"Please generate a corrected query enclosed within {open_tok} "
            f"and {close_tok}."
        )
    else:
        content = (
            "The previous response did not contain a query.\n"
            "\n"
            "Error:\n"
            f"{error_text}\n"
            "\n"
            f"Please reply with exactly one query enclosed within {open_tok} "
            f"and {close_tok}."
        )
    return ChatMessage(role="user", content=content)


def _append_correction(
    conversation: Conversation, correction: ChatMessage, provider: Provider
) -> None:
    """Append, truncating first if the budget would be blown.

    Truncation keeps the system prompt plus the last failed exchange so
    the model still sees its own query and the error.
    """
    budget = provider.context_budget_tokens
    if budget is not None:
        projected = (
            conversation.token_estimate
            + len(correction.content) // 4
            + provider.max_response_tokens
        )
        if projected > budget and len(conversation.messages) > 2:
            kept = [conversation.messages[0], conversation.messages[-1]]
            log.debug(
                "truncating conversation from %d to %d messages",
                len(conversation.messages),
                len(kept) + 1,
            )
            conversation.messages[:] = kept
    conversation.append(correction)


def run_pipeline(
    user_input: str,
    catalog: Catalog,
    provider: Provider,
    config: PipelineConfig = PipelineConfig(),
    *,
    conversation: Conversation | None = None,
) -> CorrectionTranscript:
    """Run the full loop for one input; query failures never raise.

    Passing ``conversation`` continues an existing session: the system
    prompt is reused and this call's messages are appended in place.
    """
    if not user_input.strip():
        raise ValueError("user_input must be non-empty")
    if conversation is None:
        conversation = Conversation()
    if not conversation.messages:
        rules = GroundingRules(delimiters=config.delimiters)
        conversation.append(build_system_prompt(catalog.default_table, rules))
    conversation.append(ChatMessage(role="user", content=user_input))

    attempts: list[Attempt] = []
    for index in range(1, config.max_attempts + 1):
        started = time.perf_counter()
        try:
            assistant = generate_completion(provider, conversation)
        except ProviderError as exc:
            log.warning("provider failure on attempt %d: %s", index, exc)
            return CorrectionTranscript(
                user_input=user_input,
                attempts=tuple(attempts),
                outcome=OUTCOME_PROVIDER_FAILURE,
                failure_detail=str(exc),
            )
        conversation.append(assistant)

        query: str | None = None
        error: AttemptError | None = None
        result: ResultTable | None = None
        try:
            query = extract_query(
                assistant.content,
                config.delimiters,
                strict=config.strict_extraction,
            )
        except ExtractionError as exc:
            error = AttemptError.from_extraction_error(exc)
        if query is not None:
            try:
                ast = parse_query(query)
                plan = bind_query(ast, catalog)
                result = evaluate_query(plan, catalog, config.max_result_rows)
            except QueryError as exc:
                error = AttemptError.from_query_error(exc)

        elapsed = time.perf_counter() - started
        attempts.append(
            Attempt(
                index=index,
                raw_response=assistant.content,
                extracted_query=query,
                error=error,
                result=result,
                elapsed_s=elapsed,
            )
        )
        if result is not None:
            return CorrectionTranscript(
                user_input=user_input,
                attempts=tuple(attempts),
                outcome=OUTCOME_SUCCESS,
                final_result=result,
            )
        assert error is not None
        if index < config.max_attempts:
            correction = build_correction_prompt(
                query, error.formatted, config.delimiters
            )
            _append_correction(conversation, correction, provider)

    return CorrectionTranscript(
        user_input=user_input,
        attempts=tuple(attempts),
        outcome=OUTCOME_EXHAUSTED,
    )


# -- JSON (de)serialization --------------------------------------------------
#
# The wire schema is documented in docs/transcript.md and consumed by the
# eval harness, the HTTP service, and the web console.  Dates travel as
# ISO strings; column_types lets readers restore typed cells.


def _cell_to_json(cell: Cell) -> object:
    if isinstance(cell, date):
        return cell.isoformat()
    return cell


def _cell_from_json(value: object, type_name: str) -> Cell:
    if value is None:
        return None
    if type_name == ColumnType.DATE.value:
        return date.fromisoformat(str(value))
    if type_name == ColumnType.INTEGER.value:
        return int(value)  # type: ignore[arg-type]
    return str(value)


def result_table_to_dict(table: ResultTable) -> dict:
    return {
        "column_names": list(table.column_names),
        "column_types": [t.value for t in table.column_types],
        "rows": [[_cell_to_json(c) for c in row] for row in table.rows],
    }


def result_table_from_dict(data: dict) -> ResultTable:
    types = [ColumnType(t) for t in data["column_types"]]
    rows = tuple(
        tuple(
            _cell_from_json(cell, t.value)
            for cell, t in zip(row, types)
        )
        for row in data["rows"]
    )
    return ResultTable(
        column_names=tuple(data["column_names"]),
        column_types=tuple(types),
        rows=rows,
    )


def attempt_to_dict(attempt: Attempt) -> dict:
    error = None
    if attempt.error is not None:
        error = {
            "kind": attempt.error.kind,
            "group": attempt.error.group,
            "message": attempt.error.message,
            "formatted": attempt.error.formatted,
            "position": list(attempt.error.position)
            if attempt.error.position
            else None,
            "token": attempt.error.token,
            "hint": attempt.error.hint,
        }
    return {
        "index": attempt.index,
        "raw_response": attempt.raw_response,
        "extracted_query": attempt.extracted_query,
        "error": error,
        "result": result_table_to_dict(attempt.result)
        if attempt.result is not None
        else None,
        "elapsed_s": attempt.elapsed_s,
    }


def attempt_from_dict(data: dict) -> Attempt:
    error = None
    if data.get("error") is not None:
        e = data["error"]
        error = AttemptError(
            kind=e["kind"],
            group=e["group"],
            message=e["message"],
            formatted=e["formatted"],
            position=tuple(e["position"]) if e.get("position") else None,
            token=e.get("token"),
            hint=e.get("hint"),
        )
    result = None
    if data.get("result") is not None:
        result = result_table_from_dict(data["result"])
    return Attempt(
        index=data["index"],
        raw_response=data["raw_response"],
        extracted_query=data.get("extracted_query"),
        error=error,
        result=result,
        elapsed_s=data["elapsed_s"],
    )


def transcript_to_dict(transcript: CorrectionTranscript) -> dict:
    return {
        "user_input": transcript.user_input,
        "outcome": transcript.outcome,
        "failure_detail": transcript.failure_detail,
        "attempts": [attempt_to_dict(a) for a in transcript.attempts],
        "final_result": result_table_to_dict(transcript.final_result)
        if transcript.final_result is not None
        else None,
    }


def transcript_from_dict(data: dict) -> CorrectionTranscript:
    final = None
    if data.get("final_result") is not None:
        final = result_table_from_dict(data["final_result"])
    return CorrectionTranscript(
        user_input=data["user_input"],
        attempts=tuple(attempt_from_dict(a) for a in data["attempts"]),
        outcome=data["outcome"],
        final_result=final,
        failure_detail=data.get("failure_detail"),
    )
