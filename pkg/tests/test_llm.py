import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cohortql.llm import (
    DEFAULT_DELIMITERS,
    ChatMessage,
    ContextBudgetExceeded,
    Conversation,
    ExtractionError,
    GroundingRules,
    HttpChatProvider,
    ProviderError,
    ProviderHttpError,
    ProviderTimeout,
    ReplayProvider,
    ScriptExhausted,
    ScriptedProvider,
    build_system_prompt,
    extract_query,
    generate_completion,
)


# --- messages and conversations -------------------------------------------

def convo(*messages):
    conversation = Conversation()
    for m in messages:
        conversation.append(m)
    return conversation


def test_message_roles_validated():
    ChatMessage("system", "x")
    ChatMessage("user", "x")
    ChatMessage("assistant", "x")
    with pytest.raises(ValueError):
        ChatMessage("tool", "x")
    with pytest.raises(ValueError):
        ChatMessage("user", "")


def test_conversation_first_message_must_be_system():
    convo = Conversation()
    with pytest.raises(ValueError):
        convo.append(ChatMessage("user", "hi"))
    convo.append(ChatMessage("system", "rules"))
    convo.append(ChatMessage("user", "hi"))
    assert len(convo.messages) == 2


def test_token_estimate_is_ceil_div_4():
    convo = Conversation()
    convo.append(ChatMessage("system", "abcd"))      # 1 token
    assert convo.token_estimate == 1
    convo.append(ChatMessage("user", "abcde"))       # 2 tokens
    assert convo.token_estimate == 3


@given(st.lists(st.text(min_size=1, max_size=40), min_size=1, max_size=8))
def test_token_estimate_monotone(contents):
    convo = Conversation()
    convo.append(ChatMessage("system", contents[0]))
    previous = convo.token_estimate
    for text in contents[1:]:
        convo.append(ChatMessage("user", text))
        assert convo.token_estimate >= previous
        previous = convo.token_estimate


# --- system prompt ---------------------------------------------------------

def test_system_prompt_embeds_schema(catalog):
    prompt = build_system_prompt(catalog.default_table).content
    assert "dicom_all" in prompt
    for column in catalog.default_table.columns:
        assert f"{column.name} ({column.type.value})" in prompt
    assert "bigquery-public-data.idc_current.dicom_all" in prompt


def test_system_prompt_contains_delimiters_and_rules(catalog):
    prompt = build_system_prompt(catalog.default_table).content
    assert "```" in prompt
    assert "as specific as possible without providing explanations" in prompt
    assert "utilize regular expressions in queries to prevent exact matches" in prompt


def test_system_prompt_injective_on_schemas(catalog, mini_catalog):
    a = build_system_prompt(catalog.default_table).content
    b = build_system_prompt(mini_catalog.default_table).content
    assert a != b


def test_system_prompt_custom_delimiters(catalog):
    rules = GroundingRules(delimiters=("<<SQL", "SQL>>"))
    prompt = build_system_prompt(catalog.default_table, rules).content
    assert "<<SQL" in prompt and "SQL>>" in prompt


# --- extraction ------------------------------------------------------------

def test_extract_fenced_with_language_tag():
    text = "Here you go:\n```sql\nSELECT COUNT(*) FROM dicom_all\n```"
    assert extract_query(text) == "SELECT COUNT(*) FROM dicom_all"


def test_extract_fenced_without_tag():
    assert extract_query("```\nSELECT 1 FROM t\n```") == "SELECT 1 FROM t"


def test_extract_first_block_wins():
    text = "```\nSELECT a FROM t\n```\nor maybe\n```\nSELECT b FROM t\n```"
    assert extract_query(text) == "SELECT a FROM t"


def test_extract_single_line_fence():
    assert extract_query("```SELECT * FROM t```") == "SELECT * FROM t"


def test_extract_bare_select_fallback():
    assert extract_query("select * from dicom_all limit 5") == "select * from dicom_all limit 5"


def test_extract_strict_disables_fallback():
    with pytest.raises(ExtractionError):
        extract_query("SELECT * FROM t", strict=True)


def test_extract_no_query():
    with pytest.raises(ExtractionError) as exc:
        extract_query("I cannot answer that.")
    assert "no delimited query" in str(exc.value)


def test_extract_missing_close():
    with pytest.raises(ExtractionError) as exc:
        extract_query("```sql\nSELECT * FROM t")
    assert "closing delimiter" in str(exc.value)


def test_extract_empty_block():
    with pytest.raises(ExtractionError):
        extract_query("```sql\n\n```")


def test_extract_custom_delimiters():
    text = "[Q] SELECT * FROM t [/Q]"
    assert extract_query(text, ("[Q]", "[/Q]")) == "SELECT * FROM t"


@given(st.text(max_size=200))
def test_extract_never_contains_delimiters(text):
    try:
        query = extract_query(text)
    except ExtractionError:
        return
    assert DEFAULT_DELIMITERS[0] not in query
    assert DEFAULT_DELIMITERS[1] not in query


# --- scripted and replay providers ----------------------------------------

def test_scripted_provider_in_order_then_exhausted():
    provider = ScriptedProvider(["one", "two"])
    first = generate_completion(provider, convo(ChatMessage("system", "s")))
    second = generate_completion(provider, convo(ChatMessage("system", "s")))
    assert (first.content, second.content) == ("one", "two")
    assert first.role == "assistant"
    with pytest.raises(ScriptExhausted):
        generate_completion(provider, convo(ChatMessage("system", "s")))


def test_scripted_provider_rejects_empty_script():
    with pytest.raises(ValueError):
        ScriptedProvider([])


def test_generate_completion_does_not_mutate_conversation():
    provider = ScriptedProvider(["x"])
    conversation = convo(ChatMessage("system", "s"))
    generate_completion(provider, conversation)
    assert len(conversation.messages) == 1


def test_context_budget_checked_before_call():
    provider = ScriptedProvider(["x"])
    provider.context_budget_tokens = 10
    provider.max_response_tokens = 8
    with pytest.raises(ContextBudgetExceeded) as exc:
        generate_completion(provider, convo(ChatMessage("system", "abcdefghijkl")))
    assert exc.value.estimate + 8 > exc.value.budget
    # the script was not consumed by the failed call
    assert generate_completion(ScriptedProvider(["x"]), convo(ChatMessage("system", "s"))).content == "x"


def test_replay_flat_mode(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"response": "a"}\n{"response": "b"}\n')
    provider = ReplayProvider(path)
    assert generate_completion(provider, convo(ChatMessage("system", "s"))).content == "a"
    assert generate_completion(provider, convo(ChatMessage("system", "s"))).content == "b"


def test_replay_map_mode_requires_scoped(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"case_id": "c1", "responses": ["a", "b"]}\n')
    provider = ReplayProvider(path)
    assert provider.case_ids == ["c1"]
    with pytest.raises(ProviderError):
        provider.complete([ChatMessage("system", "s")])
    scoped = provider.scoped("c1")
    assert generate_completion(scoped, convo(ChatMessage("system", "s"))).content == "a"
    with pytest.raises(ProviderError):
        provider.scoped("missing")


def test_replay_mixing_modes_rejected(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"response": "a"}\n{"case_id": "c", "responses": []}\n')
    with pytest.raises(ProviderError):
        ReplayProvider(path)


def test_replay_bad_json_names_line(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"response": "a"}\nnot json\n')
    with pytest.raises(ProviderError) as exc:
        ReplayProvider(path)
    assert ":2" in str(exc.value)


# --- HTTP provider ---------------------------------------------------------

def http_provider(handler, monkeypatch, **kwargs):
    monkeypatch.setenv("TEST_API_KEY", "sk-sekret-123")
    transport = httpx.MockTransport(handler)
    return HttpChatProvider(
        endpoint_url="https://llm.example/v1/chat/completions",
        model_name="test-model",
        api_key_env_var="TEST_API_KEY",
        transport=transport,
        **kwargs,
    )


def ok_handler(request):
    body = json.loads(request.content)
    ok_handler.last_request = {"headers": dict(request.headers), "body": body}
    return httpx.Response(
        200, json={"choices": [{"message": {"content": "```sql\nSELECT 1 FROM t\n```"}}]}
    )


def test_http_success_and_request_shape(monkeypatch):
    provider = http_provider(ok_handler, monkeypatch, temperature=0.5)
    reply = generate_completion(provider, convo(ChatMessage("system", "s"), ChatMessage("user", "u")))
    assert "SELECT 1" in reply.content
    sent = ok_handler.last_request
    assert sent["headers"]["authorization"] == "Bearer sk-sekret-123"
    assert sent["body"]["model"] == "test-model"
    assert sent["body"]["temperature"] == 0.5
    assert sent["body"]["messages"][0] == {"role": "system", "content": "s"}


def test_http_missing_key(monkeypatch):
    monkeypatch.delenv("MISSING_KEY", raising=False)
    provider = HttpChatProvider(
        endpoint_url="https://llm.example/v1",
        model_name="m",
        api_key_env_var="MISSING_KEY",
        transport=httpx.MockTransport(ok_handler),
    )
    with pytest.raises(ProviderError) as exc:
        provider.complete([ChatMessage("system", "s")])
    assert "MISSING_KEY" in str(exc.value)
    assert "sk-" not in str(exc.value)


def test_http_non_200(monkeypatch):
    provider = http_provider(lambda r: httpx.Response(500, text="boom"), monkeypatch)
    with pytest.raises(ProviderHttpError) as exc:
        provider.complete([ChatMessage("system", "s")])
    assert exc.value.status == 500


def test_http_timeout(monkeypatch):
    def raise_timeout(request):
        raise httpx.ReadTimeout("too slow", request=request)

    provider = http_provider(raise_timeout, monkeypatch)
    with pytest.raises(ProviderTimeout):
        provider.complete([ChatMessage("system", "s")])


def test_http_malformed_payload(monkeypatch):
    provider = http_provider(lambda r: httpx.Response(200, json={"choices": []}), monkeypatch)
    with pytest.raises(ProviderHttpError):
        provider.complete([ChatMessage("system", "s")])


def test_http_provider_never_stores_key(monkeypatch):
    provider = http_provider(ok_handler, monkeypatch)
    for value in vars(provider).values():
        assert value != "sk-sekret-123"
    assert provider.api_key_env_var == "TEST_API_KEY"
