"""Application configuration: a small documented JSON file.

Shape (all keys optional):

    {
      "provider": {
        "endpoint_url": "https://api.example.com/v1/chat/completions",
        "model_name": "gpt-3.5-turbo",
        "api_key_env_var": "OPENAI_API_KEY",
        "temperature": 0.0,
        "timeout_s": 30.0,
        "max_response_tokens": 1024,
        "context_budget_tokens": 16385
      },
      "delimiters": {"open": "```", "close": "```"},
      "strict_extraction": false,
      "max_attempts": 10,
      "max_result_rows": 100000
    }

The API key itself never appears here — only the name of the
environment variable that holds it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from cohortql.llm import (
    DEFAULT_DELIMITERS,
    HttpChatProvider,
    Provider,
    ReplayProvider,
    ScriptedProvider,
)
from cohortql.pipeline import PipelineConfig
from cohortql.sqlengine import DEFAULT_MAX_RESULT_ROWS


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-3.5-turbo"
    api_key_env_var: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    timeout_s: float = 30.0
    max_response_tokens: int = 1024
    context_budget_tokens: int = 16385


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig = ProviderConfig()
    delimiters: tuple[str, str] = DEFAULT_DELIMITERS
    strict_extraction: bool = False
    max_attempts: int = 10
    max_result_rows: int = DEFAULT_MAX_RESULT_ROWS

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            max_attempts=self.max_attempts,
            strict_extraction=self.strict_extraction,
            max_result_rows=self.max_result_rows,
            delimiters=self.delimiters,
        )


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(
            f"unknown {section} key(s): {', '.join(sorted(unknown))}"
        )


def load_config(path: Path | str | None) -> AppConfig:
    """Parse the config file; a missing path means all defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _check_keys(
        "config",
        data,
        {
            "provider",
            "delimiters",
            "strict_extraction",
            "max_attempts",
            "max_result_rows",
        },
    )

    provider = ProviderConfig()
    if "provider" in data:
        pdata = data["provider"]
        _check_keys(
            "provider",
            pdata,
            {
                "endpoint_url",
                "model_name",
                "api_key_env_var",
                "temperature",
                "timeout_s",
                "max_response_tokens",
                "context_budget_tokens",
            },
        )
        provider = ProviderConfig(
            endpoint_url=pdata.get("endpoint_url", provider.endpoint_url),
            model_name=pdata.get("model_name", provider.model_name),
            api_key_env_var=pdata.get(
                "api_key_env_var", provider.api_key_env_var
            ),
            temperature=pdata.get("temperature", provider.temperature),
            timeout_s=pdata.get("timeout_s", provider.timeout_s),
            max_response_tokens=pdata.get(
                "max_response_tokens", provider.max_response_tokens
            ),
            context_budget_tokens=pdata.get(
                "context_budget_tokens", provider.context_budget_tokens
            ),
        )

    delimiters = DEFAULT_DELIMITERS
    if "delimiters" in data:
        ddata = data["delimiters"]
        _check_keys("delimiters", ddata, {"open", "close"})
        delimiters = (
            ddata.get("open", DEFAULT_DELIMITERS[0]),
            ddata.get("close", DEFAULT_DELIMITERS[1]),
        )
        if not delimiters[0] or not delimiters[1]:
            raise ConfigError("delimiter tokens must be non-empty")

    return AppConfig(
        provider=provider,
        delimiters=delimiters,
        strict_extraction=bool(data.get("strict_extraction", False)),
        max_attempts=int(data.get("max_attempts", 10)),
        max_result_rows=int(data.get("max_result_rows", DEFAULT_MAX_RESULT_ROWS)),
    )


def make_provider(
    kind: str,
    config: AppConfig,
    responses_path: Path | str | None = None,
) -> Provider:
    """Build the provider named by ``kind``: scripted, replay, or http.

    ``scripted`` reads a JSON array of response strings from
    ``responses_path``; ``replay`` reads the JSONL replay format.
    """
    if kind == "http":
        p = config.provider
        return HttpChatProvider(
            p.endpoint_url,
            p.model_name,
            p.api_key_env_var,
            temperature=p.temperature,
            timeout_s=p.timeout_s,
            max_response_tokens=p.max_response_tokens,
            context_budget_tokens=p.context_budget_tokens,
        )
    if responses_path is None:
        raise ConfigError(f"provider '{kind}' requires a responses file")
    if kind == "replay":
        return ReplayProvider(responses_path)
    if kind == "scripted":
        try:
            script = json.loads(Path(responses_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read script: {exc}") from None
        if not isinstance(script, list) or not all(
            isinstance(s, str) for s in script
        ):
            raise ConfigError("script file must be a JSON array of strings")
        return ScriptedProvider(script)
    raise ConfigError(f"unknown provider kind '{kind}'")
