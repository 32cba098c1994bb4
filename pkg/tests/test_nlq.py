import json
import random

import httpx
import pytest
from hypothesis import given, strategies as st

from metrovqa.nlq import (
    NoTemplateMatch,
    TEMPLATES,
    instantiate_template,
    match_template,
    parse_question_regex,
    template_of_program,
)
from metrovqa.nlq.llm import (
    CATEGORIES,
    EXAMPLE_BANK,
    FIXTURES_PATH,
    PRE_PROMPT,
    ChatClient,
    CredentialMissing,
    LlmConfig,
    ParseFailure,
    TransportFailure,
    build_llm_prompt,
    classify_response,
    extract_program_from_response,
    llm_parse,
    llm_parse_many,
    load_fixtures,
    prompt_digest,
)
from metrovqa.program import parse_program

PRE_PROMPT_TEXT = (
    "You are now a Question Parser that translates natural language \n"
    "questions into ASP ground truths about different stations. \n"
    "Output only the ground truths and nothing else. The stations to \n"
    "be selected from are arbitrary."
)

names = st.from_regex(r"[A-Za-z]{1,12}", fullmatch=True)


# -- regex parser --------------------------------------------------------------


def test_row1_question():
    p = parse_question_regex("How many stations are between Leauts and Nily?")
    assert p.text() == 'end(3).countNodesBetween(2).shortestPath(1).station(0,"leauts").station(0,"nily").'


def test_exist_question_allows_digits():
    assert parse_question_regex("Is there a station called Foo9?") == parse_program(
        'end(2).exist(1).station(0,"foo9").')


def test_out_of_grammar():
    with pytest.raises(NoTemplateMatch):
        parse_question_regex("What is north of Nily?")


def test_digits_rejected_outside_template_8():
    with pytest.raises(NoTemplateMatch):
        parse_question_regex("Are a1 and b adjacent?")


def test_extra_whitespace_is_tolerated():
    assert parse_question_regex("  Are  a and b   adjacent? ") == parse_question_regex("Are a and b adjacent?")


def test_instantiation_examples():
    assert instantiate_template(5, ["a", "b"]) == "Are a and b adjacent?"
    assert instantiate_template(12, ["redline"]) == "Which stations does redline pass through?"


def test_instantiation_arity_checked():
    with pytest.raises(ValueError):
        instantiate_template(5, ["a"])


def test_twelve_templates_with_distinct_programs():
    assert [t.id for t in TEMPLATES] == list(range(1, 13))
    progs = {t.program(["x"] * t.arity) for t in TEMPLATES}
    assert len(progs) == 12


@given(st.integers(1, 12), st.lists(names, min_size=2, max_size=2))
def test_instantiate_then_parse_is_exact(tid, pool):
    t = TEMPLATES[tid - 1]
    bindings = pool[: t.arity]
    q = instantiate_template(tid, bindings)
    tmpl, got = match_template(q)
    assert tmpl.id == tid and got == bindings
    p = parse_question_regex(q)
    assert p == t.program(bindings)
    assert template_of_program(p) == tid


# -- prompt ------------------------------------------------------------------


def test_pre_prompt_verbatim():
    assert PRE_PROMPT == PRE_PROMPT_TEXT
    assert build_llm_prompt("Is a part of a cycle?").startswith(PRE_PROMPT_TEXT)


def test_prompt_has_36_examples_three_per_template():
    prompt = build_llm_prompt("Are a and b adjacent?")
    assert prompt.count("\nQ: ") == 36
    assert len(EXAMPLE_BANK) == 36
    per = [sum(1 for tid, _, _ in EXAMPLE_BANK if tid == k) for k in range(1, 13)]
    assert per == [3] * 12


def test_prompt_is_deterministic_and_ends_with_question():
    a, b = build_llm_prompt("Q?"), build_llm_prompt("Q?")
    assert a == b and prompt_digest(a) == prompt_digest(b)
    assert a.endswith("Now provide the output for the following question:\nQ?")


def test_example_answers_parse_to_template_programs():
    for tid, question, bindings in EXAMPLE_BANK:
        block = build_llm_prompt("x").split(f'Q: "{question}"\nA: ')[1].split("\n")[0]
        p = parse_program(block)
        assert template_of_program(p) == tid


# -- extraction and classification ----------------------------------------------


EXPECTED = parse_program('end(2).exist(1).station(0,"foo").')


def test_extract_exact():
    assert extract_program_from_response('end(2).exist(1).station(0,"foo").') == EXPECTED


def test_extract_from_prose():
    resp = 'Sure, here it is:\nend(2).\nexist(1).\nstation(0,"foo").\nHope that helps.'
    assert extract_program_from_response(resp) == EXPECTED


def test_extract_whitespace_is_none():
    assert extract_program_from_response("  \n ") is None


@pytest.mark.parametrize("response,category", [
    ('end(2).exist(1).station(0,"foo").', "full_match"),
    ('end(2). exist(1). station(0, "Foo").\n', "full_match"),
    ('The answer is end(2).exist(1).station(0,"foo"). Done.', "contains_solution"),
    ("I cannot help with that.", "task_missed"),
    ('end(2).exist(1).station(0,"bar").', "task_missed"),
    ("", "no_answer"),
    ("   \n", "no_answer"),
])
def test_classifier(response, category):
    assert classify_response(response, EXPECTED).category == category


def test_fixture_transcripts_classify_as_recorded():
    rows = load_fixtures(FIXTURES_PATH)
    assert len(rows) >= 24
    for r in rows:
        assert prompt_digest(build_llm_prompt(r["question"])) == r["prompt_sha256"]
        assert classify_response(r["response"], parse_program(r["expected"])).category == r["category"]


def test_fixture_coverage_per_category():
    rows = load_fixtures(FIXTURES_PATH)
    for c in CATEGORIES:
        templates = {r["template_id"] for r in rows if r["category"] == c}
        assert len(templates) >= 6, c


# -- client ------------------------------------------------------------------


def _ok(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


@pytest.fixture
def key(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "secret")
    return "TEST_LLM_KEY"


def test_replay_fixture_template_1():
    row = next(r for r in load_fixtures(FIXTURES_PATH) if r["template_id"] == 1 and r["category"] == "full_match")
    cfg = LlmConfig(fixtures=str(FIXTURES_PATH))
    assert llm_parse(row["question"], cfg) == parse_program(row["expected"])


def test_replay_missing_prompt_is_transport_error():
    with pytest.raises(TransportFailure):
        llm_parse("Something never recorded?", LlmConfig(fixtures=str(FIXTURES_PATH)))


def test_request_shape(key):
    seen = {}

    def handler(request):
        seen.update(json.loads(request.content))
        seen["auth"] = request.headers["authorization"]
        return _ok('end(2).cycle(1).station(0,"a").')

    cfg = LlmConfig(endpoint="http://llm.test/v1", api_key_env=key)
    p = llm_parse("Is a part of a cycle?", cfg, ChatClient(cfg, httpx.MockTransport(handler)))
    assert p == parse_program('end(2).cycle(1).station(0,"a").')
    assert seen["temperature"] == 0
    assert seen["messages"][0] == {"role": "system", "content": PRE_PROMPT_TEXT}
    assert seen["messages"][1]["content"].endswith("Is a part of a cycle?")
    assert seen["auth"] == "Bearer secret"


def test_whitespace_response_is_parse_failure(key):
    cfg = LlmConfig(endpoint="http://llm.test/v1", api_key_env=key)
    client = ChatClient(cfg, httpx.MockTransport(lambda r: _ok("   ")))
    with pytest.raises(ParseFailure):
        llm_parse("Is a part of a cycle?", cfg, client)


def test_retries_server_errors_then_succeeds(key):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503) if len(calls) < 3 else _ok('end(2).exist(1).station(0,"a").')

    cfg = LlmConfig(endpoint="http://llm.test/v1", api_key_env=key, backoff=0)
    p = llm_parse("Is there a station called a?", cfg, ChatClient(cfg, httpx.MockTransport(handler)))
    assert len(calls) == 3 and p.terminal == 2


def test_transport_error_after_three_attempts(key):
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("refused", request=request)

    cfg = LlmConfig(endpoint="http://llm.test/v1", api_key_env=key, backoff=0)
    with pytest.raises(TransportFailure, match="3 attempts"):
        ChatClient(cfg, httpx.MockTransport(handler)).complete("x")
    assert len(calls) == 3


def test_unreachable_endpoint(key):
    cfg = LlmConfig(endpoint="http://127.0.0.1:9/v1", api_key_env=key, backoff=0, timeout=2)
    with pytest.raises(TransportFailure):
        ChatClient(cfg).complete("x")


def test_missing_credentials(monkeypatch):
    monkeypatch.delenv("NO_SUCH_KEY_VAR", raising=False)
    cfg = LlmConfig(endpoint="http://llm.test/v1", api_key_env="NO_SUCH_KEY_VAR")
    with pytest.raises(CredentialMissing):
        ChatClient(cfg, httpx.MockTransport(lambda r: _ok(""))).complete("x")


def test_temperature_is_pinned():
    with pytest.raises(ValueError):
        LlmConfig(temperature=0.7)


def test_parse_many_keeps_order_and_errors():
    rows = [r for r in load_fixtures(FIXTURES_PATH) if r["category"] in ("full_match", "no_answer")][:8]
    out = llm_parse_many([r["question"] for r in rows], LlmConfig(fixtures=str(FIXTURES_PATH)))
    for r, got in zip(rows, out):
        if r["category"] == "full_match":
            assert got == parse_program(r["expected"])
        else:
            assert isinstance(got, ParseFailure)


def test_recording_writes_transcript(key, tmp_path):
    cfg = LlmConfig(endpoint="http://llm.test/v1", api_key_env=key)
    path = tmp_path / "rec.json"
    client = ChatClient(cfg, httpx.MockTransport(lambda r: _ok("end(2).exist(1).station(0,a).")), record_to=path)
    client.complete(build_llm_prompt("Is there a station called a?"))
    rows = json.loads(path.read_text())
    assert rows[0]["question"] == "Is there a station called a?"
    assert rows[0]["prompt_sha256"] == prompt_digest(build_llm_prompt("Is there a station called a?"))
