"""In-context LLM semantic parsing: prompt, response extraction, grading, client."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import httpx

from metrovqa.nlq.templates import get_template
from metrovqa.program import FunctionalProgram, ProgramError, scan_atoms

log = logging.getLogger(__name__)

PRE_PROMPT = (
    "You are now a Question Parser that translates natural language \n"
    "questions into ASP ground truths about different stations. \n"
    "Output only the ground truths and nothing else. The stations to \n"
    "be selected from are arbitrary."
)
EXAMPLES_INTRO = "I now provide you with some examples on how to parse Questions:"
QUESTION_INTRO = "Now provide the output for the following question:"

FIXTURES_PATH = Path(__file__).resolve().parent.parent / "data" / "llm_fixtures.json"

CATEGORIES = ("full_match", "contains_solution", "task_missed", "no_answer")


# (template id, question, bindings as written in the question)
EXAMPLE_BANK: tuple[tuple[int, str, tuple[str, ...]], ...] = (
    (1, "How many stations are between Inzersdorf and Mainstation?", ("Inzersdorf", "Mainstation")),
    (1, "What is the amount of stations between Station A and Station B?", ("Station A", "Station B")),
    (1, "How many stops lie between Karlsplatz and Ottakring?", ("Karlsplatz", "Ottakring")),
    (2, "How many other stations are two stops or closer to Praterstern?", ("Praterstern",)),
    (2, "How many stations can I reach from Station C in at most two stops?", ("Station C",)),
    (2, "Count the stations within two stops of Hietzing.", ("Hietzing",)),
    (3, "How many distinct routes are there between Simmering and Stephansplatz?", ("Simmering", "Stephansplatz")),
    (3, "In how many different ways can I travel from Station A to Station D?", ("Station A", "Station D")),
    (3, "How many different paths connect Heiligenstadt and Floridsdorf?", ("Heiligenstadt", "Floridsdorf")),
    (4, "Is Schwedenplatz part of a cycle?", ("Schwedenplatz",)),
    (4, "Does Station E lie on a loop?", ("Station E",)),
    (4, "Can I ride in a circle that passes through Landstrasse?", ("Landstrasse",)),
    (5, "Are Volkstheater and Rathaus adjacent?", ("Volkstheater", "Rathaus")),
    (5, "Is Station A directly next to Station B?", ("Station A", "Station B")),
    (5, "Can I go from Spittelau to Alserstrasse without any stop in between?", ("Spittelau", "Alserstrasse")),
    (6, "Which station is adjacent to Kagran and Altedonau?", ("Kagran", "Altedonau")),
    (6, "What station is next to both Station F and Station G?", ("Station F", "Station G")),
    (6, "Name the stations that neighbour Taborstrasse as well as Nestroyplatz.", ("Taborstrasse", "Nestroyplatz")),
    (7, "Are Westbahnhof and Burggasse connected by the same station?", ("Westbahnhof", "Burggasse")),
    (7, "Is there a station that links Station H and Station I?", ("Station H", "Station I")),
    (7, "Do Meidling and Margaretenguertel share a neighbouring station?", ("Meidling", "Margaretenguertel")),
    (8, "Is there a station called Neubaugasse?", ("Neubaugasse",)),
    (8, "Does a station named Station 12 exist?", ("Station 12",)),
    (8, "Is Zieglergasse a station on the map?", ("Zieglergasse",)),
    (9, "Which lines is Stadlau on?", ("Stadlau",)),
    (9, "What lines stop at Station J?", ("Station J",)),
    (9, "Which lines serve Erdberg?", ("Erdberg",)),
    (10, "How many lines is Josefstaedterstrasse on?", ("Josefstaedterstrasse",)),
    (10, "How many different lines stop at Station K?", ("Station K",)),
    (10, "Count the lines that pass Laengenfeldgasse.", ("Laengenfeldgasse",)),
    (11, "Are Pilgramgasse and Kettenbrueckengasse on the same line?", ("Pilgramgasse", "Kettenbrueckengasse")),
    (11, "Can I reach Station A from Station B without a line change?", ("Station A", "Station B")),
    (11, "Is there a line that serves both Huetteldorf and Ober St Veit?", ("Huetteldorf", "Ober St Veit")),
    (12, "Which stations does Redline pass through?", ("Redline",)),
    (12, "What are the stations on line Blue?", ("Blue",)),
    (12, "List every stop of Uline.", ("Uline",)),
)


def example_answer(template_id: int, bindings: Sequence[str]) -> str:
    """Atom text for an example, keeping names as written in the question."""
    t = get_template(template_id)
    atoms = [f"end({len(t.ops) + 1})."]
    for i, (op, extra) in reversed(list(enumerate(t.ops))):
        atoms.append(f"{op}({','.join([str(i + 1), *extra])}).")
    atoms += [f'{t.arg_kind}(0,"{b}").' for b in bindings]
    return "".join(atoms)


def build_llm_prompt(q: str, examples: Iterable[tuple[int, str, Sequence[str]]] = EXAMPLE_BANK) -> str:
    blocks = [f'Q: "{question}"\nA: {example_answer(tid, b)}' for tid, question, b in examples]
    return "\n\n".join([PRE_PROMPT, EXAMPLES_INTRO, *blocks, f"{QUESTION_INTRO}\n{q}"])


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def extract_program_from_response(response: str) -> FunctionalProgram | None:
    steps, _ = scan_atoms(response)
    if not steps:
        return None
    try:
        return FunctionalProgram(dict.fromkeys(steps))
    except ProgramError:
        return None


@dataclass(frozen=True)
class ResponseVerdict:
    category: str
    program: FunctionalProgram | None = None


def classify_response(response: str, expected: FunctionalProgram) -> ResponseVerdict:
    if not response.strip():
        return ResponseVerdict("no_answer")
    steps, residue = scan_atoms(response)
    program = extract_program_from_response(response)
    if program is not None and program == expected:
        if not residue.strip():
            return ResponseVerdict("full_match", program)
        return ResponseVerdict("contains_solution", program)
    return ResponseVerdict("task_missed", program)


# -- client ----------------------------------------------------------------


class LlmError(Exception):
    pass


class TransportFailure(LlmError):
    pass


class CredentialMissing(LlmError):
    pass


class ParseFailure(LlmError):
    pass


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4"
    api_key_env: str = "OPENAI_API_KEY"
    max_tokens: int = 256
    temperature: float = 0.0
    fixtures: str | None = None
    attempts: int = 3
    backoff: float = 0.5
    timeout: float = 60.0
    max_in_flight: int = 4

    def __post_init__(self):
        if self.temperature != 0:
            raise ValueError("temperature is fixed to 0")


def load_fixtures(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


class ChatClient:
    """Minimal chat-completion client with retry and optional transcript recording."""

    def __init__(self, config: LlmConfig, transport: httpx.BaseTransport | None = None,
                 record_to: str | Path | None = None):
        self.config = config
        self._transport = transport
        self._record_to = Path(record_to) if record_to else None
        self._lock = threading.Lock()
        self._replay: dict[str, str] | None = None
        if config.fixtures:
            self._replay = {r["prompt_sha256"]: r["response"] for r in load_fixtures(config.fixtures)}

    def _key(self) -> str:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise CredentialMissing(f"environment variable {self.config.api_key_env} is not set")
        return key

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        if self._replay is not None:
            if digest not in self._replay:
                raise TransportFailure(f"no recorded transcript for prompt {digest[:12]}")
            return self._replay[digest]
        system, _, user = prompt.partition("\n\n")
        body = {
            "model": self.config.model,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        }
        headers = {"Authorization": f"Bearer {self._key()}"}
        last: Exception | None = None
        with httpx.Client(transport=self._transport, timeout=self.config.timeout) as http:
            for attempt in range(self.config.attempts):
                try:
                    r = http.post(self.config.endpoint, json=body, headers=headers)
                    if r.status_code >= 500 or r.status_code == 429:
                        raise httpx.HTTPStatusError(f"status {r.status_code}", request=r.request, response=r)
                    r.raise_for_status()
                    text = r.json()["choices"][0]["message"]["content"] or ""
                    break
                except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                    last = exc
                    log.warning("chat completion attempt %d failed: %s", attempt + 1, exc)
                    if attempt + 1 < self.config.attempts:
                        time.sleep(self.config.backoff * 2**attempt)
                except (KeyError, IndexError, ValueError) as exc:
                    raise TransportFailure(f"malformed response: {exc}") from exc
            else:
                raise TransportFailure(f"gave up after {self.config.attempts} attempts: {last}")
        if self._record_to is not None:
            self._record(prompt, digest, text)
        return text

    def _record(self, prompt: str, digest: str, text: str) -> None:
        with self._lock:
            rows = load_fixtures(self._record_to) if self._record_to.exists() else []
            question = prompt.rsplit("\n", 1)[-1]
            rows.append({"question": question, "prompt_sha256": digest, "response": text})
            self._record_to.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


def llm_parse(q: str, config: LlmConfig, client: ChatClient | None = None) -> FunctionalProgram:
    client = client or ChatClient(config)
    response = client.complete(build_llm_prompt(q))
    program = extract_program_from_response(response)
    if program is None:
        raise ParseFailure(f"no program could be extracted from the response to {q!r}")
    return program


def llm_parse_many(questions: Sequence[str], config: LlmConfig,
                   client: ChatClient | None = None) -> list[FunctionalProgram | Exception]:
    client = client or ChatClient(config)

    def one(q):
        try:
            return llm_parse(q, config, client)
        except LlmError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, config.max_in_flight)) as pool:
        return list(pool.map(one, questions))
