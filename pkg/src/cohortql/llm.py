"""Chat-completion providers, prompt grounding, and query extraction.

Three provider flavors share one interface: scripted (canned responses
for tests and demos), replay (canned responses loaded from JSONL,
optionally keyed by benchmark case), and HTTP (any endpoint speaking the
common chat-completions JSON shape).  The API key is referenced only by
environment-variable name and read at request time; it is never stored
on objects, config files, logs, or transcripts.
"""

from __future__ import annotations

import json
import logging
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx

log = logging.getLogger(__name__)

DEFAULT_DELIMITERS = ("```", "```")


class ProviderError(Exception):
    """Base class for completion failures."""


class ProviderHttpError(ProviderError):
    def __init__(self, status: int, body_excerpt: str) -> None:
        super().__init__(f"provider returned HTTP {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class ProviderTimeout(ProviderError):
    pass


class ContextBudgetExceeded(ProviderError):
    def __init__(self, estimate: int, budget: int) -> None:
        super().__init__(
            f"conversation estimate {estimate} tokens exceeds budget {budget}"
        )
        self.estimate = estimate
        self.budget = budget


class ScriptExhausted(ProviderError):
    pass


class ExtractionError(Exception):
    """No query could be pulled out of a model response."""

    def __init__(self, message: str, raw_response: str) -> None:
        super().__init__(message)
        self.message = message
        self.raw_response = raw_response


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"invalid role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


def estimate_tokens(text: str) -> int:
    """Deterministic heuristic: ceil(characters / 4)."""
    return (len(text) + 3) // 4


@dataclass
class Conversation:
    messages: list[ChatMessage] = field(default_factory=list)

    def append(self, message: ChatMessage) -> None:
        if not self.messages and message.role != "system":
            raise ValueError("a conversation must start with a system message")
        self.messages.append(message)

    @property
    def token_estimate(self) -> int:
        return sum(estimate_tokens(m.content) for m in self.messages)


@dataclass(frozen=True)
class GroundingRules:
    """The four system-prompt constraints, rendered in order."""

    description: str = (
        "You answer questions about a table of cancer-imaging metadata by "
        "writing one SQL query against the schema below."
    )
    specificity: str = (
        "Be as specific as possible without providing explanations: reply "
        "with the query and nothing else."
    )
    delimiters: tuple[str, str] = DEFAULT_DELIMITERS
    regex_preference: str = (
        "For text filters, utilize regular expressions in queries to "
        "prevent exact matches from missing relevant rows (REGEXP_CONTAINS "
        "rather than =)."
    )


def build_system_prompt(schema, rules: GroundingRules = GroundingRules()) -> ChatMessage:
    """Deterministic system message: description, schema, style rules."""
    open_tok, close_tok = rules.delimiters
    lines = [rules.description, "", f"Table: {schema.table_name}"]
    for alias in schema.aliases:
        lines.append(f"Also addressable as: {alias}")
    lines.append("Columns:")
    for col in schema.columns:
        lines.append(f"  {col.name} ({col.type.value})")
    lines += [
        "",
        rules.specificity,
        f"Enclose the query within {open_tok} and {close_tok} delimiters.",
        rules.regex_preference,
    ]
    return ChatMessage(role="system", content="\n".join(lines))


class Provider(ABC):
    """A chat-completion backend."""

    kind: str = "abstract"
    context_budget_tokens: int | None = None
    max_response_tokens: int = 1024

    @abstractmethod
    def complete(self, messages: Sequence[ChatMessage]) -> str:
        """Return the assistant response text for ``messages``."""

    def scoped(self, case_id: str) -> "Provider":
        """A provider view for one benchmark case; default is self."""
        return self


def generate_completion(provider: Provider, conversation: Conversation) -> ChatMessage:
    """One completion over ``conversation``; never mutates it."""
    budget = provider.context_budget_tokens
    if budget is not None:
        estimate = conversation.token_estimate + provider.max_response_tokens
        if estimate > budget:
            raise ContextBudgetExceeded(estimate, budget)
    content = provider.complete(tuple(conversation.messages))
    return ChatMessage(role="assistant", content=content)


class ScriptedProvider(Provider):
    """Returns canned responses in order; raises once the script runs out."""

    kind = "scripted"

    def __init__(self, script: Sequence[str], kind: str | None = None) -> None:
        if not script:
            raise ValueError("script must be non-empty")
        self._script = list(script)
        self._next = 0
        if kind is not None:
            self.kind = kind

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        if self._next >= len(self._script):
            raise ScriptExhausted(
                f"script exhausted after {len(self._script)} responses"
            )
        response = self._script[self._next]
        self._next += 1
        return response


class ReplayProvider(Provider):
    """Canned responses from a JSONL file.

    Two line shapes are accepted (not mixed):

    * ``{"response": "..."}`` — a flat sequence consumed in order.
    * ``{"case_id": "...", "responses": ["...", ...]}`` — per-case
      scripts; ``scoped(case_id)`` yields a provider for one case.
    """

    kind = "replay"

    def __init__(self, path: Path | str) -> None:
        self._path = Path(path)
        self._sequence: list[str] = []
        self._by_case: dict[str, list[str]] = {}
        self._next = 0
        for lineno, line in enumerate(
            self._path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProviderError(
                    f"{self._path}:{lineno}: invalid JSON: {exc}"
                ) from None
            if "case_id" in record:
                responses = record.get("responses")
                if not isinstance(responses, list) or not all(
                    isinstance(r, str) for r in responses
                ):
                    raise ProviderError(
                        f"{self._path}:{lineno}: 'responses' must be a list of strings"
                    )
                self._by_case[str(record["case_id"])] = responses
            elif "response" in record:
                self._sequence.append(str(record["response"]))
            else:
                raise ProviderError(
                    f"{self._path}:{lineno}: expected 'response' or 'case_id'"
                )
        if self._sequence and self._by_case:
            raise ProviderError(
                f"{self._path}: mixes flat 'response' lines with per-case records"
            )

    @property
    def case_ids(self) -> list[str]:
        return list(self._by_case)

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        if self._by_case:
            raise ProviderError(
                "per-case replay file requires scoped(case_id) before use"
            )
        if self._next >= len(self._sequence):
            raise ScriptExhausted(
                f"replay exhausted after {len(self._sequence)} responses"
            )
        response = self._sequence[self._next]
        self._next += 1
        return response

    def scoped(self, case_id: str) -> Provider:
        if not self._by_case:
            return self
        try:
            script = self._by_case[case_id]
        except KeyError:
            raise ProviderError(f"no replay responses for case '{case_id}'") from None
        return ScriptedProvider(script, kind=self.kind)


class HttpChatProvider(Provider):
    """Client for chat-completions endpoints (messages[] in, choices[] out)."""

    kind = "http"

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        api_key_env_var: str,
        *,
        temperature: float = 0.0,
        timeout_s: float = 30.0,
        max_response_tokens: int = 1024,
        context_budget_tokens: int | None = 16385,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.api_key_env_var = api_key_env_var
        self.temperature = temperature
        self.max_response_tokens = max_response_tokens
        self.context_budget_tokens = context_budget_tokens
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        api_key = os.environ.get(self.api_key_env_var)
        if not api_key:
            raise ProviderError(
                f"environment variable '{self.api_key_env_var}' is not set"
            )
        body = {
            "model": self.model_name,
            "temperature": self.temperature,
            "max_tokens": self.max_response_tokens,
            "messages": [
                {"role": m.role, "content": m.content} for m in messages
            ],
        }
        log.debug("completion request: %d messages", len(messages))
        try:
            response = self._client.post(
                self.endpoint_url,
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"provider timed out: {exc}") from None
        except httpx.HTTPError as exc:
            raise ProviderHttpError(0, str(exc)) from None
        if response.status_code != 200:
            raise ProviderHttpError(response.status_code, response.text[:200])
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError):
            raise ProviderHttpError(
                response.status_code, "malformed completion body"
            ) from None
        if not isinstance(content, str) or not content:
            raise ProviderHttpError(response.status_code, "empty completion")
        return content


def _looks_like_language_tag(line: str) -> bool:
    word = line.strip()
    return word == "" or (word.isalnum() and len(word) <= 12)


def extract_query(
    response: ChatMessage | str,
    delimiters: tuple[str, str] = DEFAULT_DELIMITERS,
    *,
    strict: bool = False,
) -> str:
    """Pull the query text out of a model response.

    Takes the text between the first opening delimiter and the next
    closing one, dropping a leading language tag (as in fenced code
    blocks).  When neither delimiter appears and ``strict`` is off, a
    response that itself starts with SELECT is accepted as-is.
    """
    text = response.content if isinstance(response, ChatMessage) else response
    open_tok, close_tok = delimiters
    if open_tok in text:
        after = text.split(open_tok, 1)[1]
        if close_tok not in after:
            raise ExtractionError("missing closing delimiter", text)
        segment = after.split(close_tok, 1)[0]
        # Nested opener (the model opened two fences): keep the last span.
        segment = segment.rsplit(open_tok, 1)[-1]
        first_line, newline, rest = segment.partition("\n")
        if newline and _looks_like_language_tag(first_line):
            segment = rest
        query = segment.strip()
        if not query:
            raise ExtractionError("delimiters enclose no query", text)
        return query
    if close_tok not in text and not strict:
        stripped = text.strip()
        if stripped[:6].upper() == "SELECT":
            return stripped
    raise ExtractionError("response contains no delimited query", text)
