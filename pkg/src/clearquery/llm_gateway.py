"""Uniform chat-completion interface with pluggable providers.

Three providers share one call surface: a live HTTP provider for any
chat-completions-style endpoint, a scripted provider backed by canned
responses, and a replay provider loaded from a recorded transcript. Scripted
and replay lookups key on a stable digest of the request, which makes tests
deterministic and transcripts portable.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import (
    CorruptTranscriptError,
    IncompleteRegenerationError,
    InvalidPlanError,
    MalformedOutputError,
    NoScriptEntryError,
    ProviderError,
)

#: Parse/validation failures that warrant the single repair round.
_REPAIRABLE = (MalformedOutputError, InvalidPlanError, IncompleteRegenerationError)

PURPOSE_TAGS = ("linking", "decompose", "refine", "regenerate", "finalize")
ROLES = ("system", "user", "assistant")

#: Retries for transient transport failures on the live provider.
DEFAULT_RETRIES = 2
_BACKOFF_SECONDS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message with empty content")


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[ChatMessage, ...]
    purpose_tag: str
    temperature: float = 0.0

    def __post_init__(self):
        if self.purpose_tag not in PURPOSE_TAGS:
            raise ValueError(f"unknown purpose tag {self.purpose_tag!r}")
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("request must contain at least one user message")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    provider_label: str
    latency: float


@dataclass(frozen=True)
class TranscriptEntry:
    request_digest: str
    response_text: str


def request_digest(request: CompletionRequest) -> str:
    """Stable hash of purpose tag plus canonicalized messages.

    Message content is whitespace-normalized (runs collapsed, ends stripped)
    so cosmetic prompt reformatting does not invalidate transcripts.
    """
    canonical = {
        "messages": [
            {"content": " ".join(m.content.split()), "role": m.role} for m in request.messages
        ],
        "purpose": request.purpose_tag,
    }
    payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CompletionProvider(Protocol):
    label: str

    def fetch(self, request: CompletionRequest) -> str: ...


@dataclass
class ScriptedProvider:
    """Canned responses keyed by request digest; records every call."""

    label: str = "scripted"
    responses: dict[str, str] = field(default_factory=dict)
    calls: list[tuple[str, str]] = field(default_factory=list)

    def seed(self, request: CompletionRequest, response_text: str) -> str:
        digest = request_digest(request)
        self.responses[digest] = response_text
        return digest

    def seed_digest(self, digest: str, response_text: str) -> None:
        self.responses[digest] = response_text

    def fetch(self, request: CompletionRequest) -> str:
        digest = request_digest(request)
        self.calls.append((request.purpose_tag, digest))
        if digest not in self.responses:
            raise NoScriptEntryError(digest, request.purpose_tag)
        return self.responses[digest]

    def transcript_entries(self) -> list[TranscriptEntry]:
        return [TranscriptEntry(d, t) for d, t in sorted(self.responses.items())]

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        provider = cls()
        for entry in _read_transcript(path):
            provider.responses[entry.request_digest] = entry.response_text
        return provider


@dataclass
class ReplayProvider:
    """Immutable digest-keyed lookups over a recorded transcript."""

    responses: dict[str, str]
    label: str = "replay"
    calls: list[tuple[str, str]] = field(default_factory=list)

    def fetch(self, request: CompletionRequest) -> str:
        digest = request_digest(request)
        self.calls.append((request.purpose_tag, digest))
        if digest not in self.responses:
            raise NoScriptEntryError(digest, request.purpose_tag)
        return self.responses[digest]


@dataclass
class LiveProvider:
    """JSON-over-HTTP chat-completions client.

    Sends ``{"model", "messages", "temperature"}`` and reads
    ``choices[0].message.content``; retries transient transport failures and
    5xx responses with backoff.
    """

    endpoint: str
    model: str
    api_key: str = ""
    label: str = "live"
    retries: int = DEFAULT_RETRIES
    timeout: float = 60.0
    calls: list[tuple[str, str]] = field(default_factory=list)
    sleep: Callable[[float], None] = time.sleep

    def fetch(self, request: CompletionRequest) -> str:
        self.calls.append((request.purpose_tag, request_digest(request)))
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(_BACKOFF_SECONDS[min(attempt - 1, len(_BACKOFF_SECONDS) - 1)])
            try:
                response = httpx.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = ProviderError(f"server error {response.status_code}")
                continue
            if response.status_code >= 400:
                raise ProviderError(f"provider rejected request: HTTP {response.status_code}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise ProviderError(f"unexpected provider response shape: {exc}") from exc
        raise ProviderError(f"transport failure after {self.retries + 1} attempts: {last_error}")


def complete(provider: CompletionProvider, request: CompletionRequest) -> CompletionResult:
    """Run one completion; an empty response surfaces as ProviderError."""
    start = time.perf_counter()
    text = provider.fetch(request)
    latency = time.perf_counter() - start
    if not text or not text.strip():
        raise ProviderError(f"{provider.label} provider returned an empty completion")
    return CompletionResult(text=text, provider_label=provider.label, latency=latency)


# -- structured output parsing -------------------------------------------------

EXPECTED_KINDS = ("linking_json", "plan_json", "sql_only")
_SQL_STARTERS = ("select", "with", "explain", "values")


def parse_structured(text: str, expected_kind: str):
    """Extract and validate a structured value from free-form model output.

    Strips code fences and surrounding prose. For the JSON kinds the first
    balanced JSON value matching the expected shape wins; for ``sql_only``
    the first SQL statement is returned without its trailing semicolon.
    """
    if expected_kind not in EXPECTED_KINDS:
        raise ValueError(f"unknown expected kind {expected_kind!r}")
    if expected_kind == "sql_only":
        return _extract_sql(text)
    last_shape_error = ""
    for candidate in _iter_json_values(text):
        try:
            if expected_kind == "linking_json":
                return _validate_linking(candidate)
            return _validate_plan(candidate)
        except MalformedOutputError as exc:
            last_shape_error = exc.detail
            continue
    detail = last_shape_error or "no parseable JSON value found"
    raise MalformedOutputError(expected_kind, detail)


def _iter_json_values(text: str):
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch not in "[{":
            continue
        try:
            value, _end = decoder.raw_decode(text, i)
        except ValueError:
            continue
        yield value


def _validate_linking(value) -> list[dict]:
    if not isinstance(value, list):
        raise MalformedOutputError("linking_json", "expected a JSON array of mappings")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, dict):
            raise MalformedOutputError("linking_json", f"mapping {i} is not an object")
        surface = item.get("surface")
        fields = item.get("fields")
        if not isinstance(surface, str) or not surface:
            raise MalformedOutputError("linking_json", f"mapping {i} lacks a surface string")
        if not isinstance(fields, list):
            raise MalformedOutputError("linking_json", f"mapping {i} lacks a fields array")
        refs = []
        for j, ref in enumerate(fields):
            if (
                not isinstance(ref, dict)
                or not isinstance(ref.get("table"), str)
                or not isinstance(ref.get("column"), str)
            ):
                raise MalformedOutputError(
                    "linking_json", f"mapping {i} field {j} is not a table/column object"
                )
            refs.append({"table": ref["table"], "column": ref["column"]})
        out.append({"surface": surface, "fields": refs})
    return out


def _validate_plan(value) -> dict:
    if not isinstance(value, dict) or not isinstance(value.get("steps"), list):
        raise MalformedOutputError("plan_json", "expected an object with a steps array")
    steps = []
    for i, item in enumerate(value["steps"]):
        if not isinstance(item, dict):
            raise MalformedOutputError("plan_json", f"step {i} is not an object")
        step_id = item.get("id")
        explanation = item.get("explanation")
        sql = item.get("sql")
        depends_on = item.get("depends_on", [])
        if not isinstance(step_id, str) or not step_id:
            raise MalformedOutputError("plan_json", f"step {i} lacks an id")
        if not isinstance(explanation, str) or not explanation.strip():
            raise MalformedOutputError("plan_json", f"step {step_id!r} lacks an explanation")
        if not isinstance(sql, str) or not sql.strip():
            raise MalformedOutputError("plan_json", f"step {step_id!r} lacks sql")
        if not isinstance(depends_on, list) or not all(isinstance(d, str) for d in depends_on):
            raise MalformedOutputError("plan_json", f"step {step_id!r} has a malformed depends_on")
        steps.append(
            {"id": step_id, "explanation": explanation, "sql": sql, "depends_on": list(depends_on)}
        )
    return {"steps": steps}


def _strip_fences(text: str) -> str:
    if "```" not in text:
        return text
    segments = text.split("```")
    # Fenced content sits at odd indices; prefer the first non-empty block.
    for segment in segments[1::2]:
        body = segment
        first_line, _, rest = segment.partition("\n")
        if first_line.strip().isalpha():  # language tag like ``sql`` or ``json``
            body = rest
        if body.strip():
            return body
    return text


def _extract_sql(text: str) -> str:
    candidate = _strip_fences(text)
    lowered = candidate.lower()
    start = -1
    for keyword in _SQL_STARTERS:
        pos = _find_word(lowered, keyword)
        if pos != -1 and (start == -1 or pos < start):
            start = pos
    if start == -1:
        raise MalformedOutputError("sql_only", "no SQL statement found")
    end = _top_level_semicolon(candidate, start)
    statement = candidate[start:end].strip()
    if not statement:
        raise MalformedOutputError("sql_only", "empty SQL statement")
    return statement


def _find_word(haystack: str, word: str) -> int:
    pos = 0
    while True:
        pos = haystack.find(word, pos)
        if pos == -1:
            return -1
        before_ok = pos == 0 or not (haystack[pos - 1].isalnum() or haystack[pos - 1] == "_")
        after = pos + len(word)
        after_ok = after >= len(haystack) or not (haystack[after].isalnum() or haystack[after] == "_")
        if before_ok and after_ok:
            return pos
        pos += 1


def _top_level_semicolon(text: str, start: int) -> int:
    """Index of the first statement-terminating semicolon after ``start``.

    Semicolons inside string literals, quoted identifiers, or comments do not
    terminate the statement.
    """
    i = start
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "'" or ch == '"':
            i = _skip_quoted(text, i, ch)
        elif ch == "-" and text[i : i + 2] == "--":
            nl = text.find("\n", i)
            i = n if nl == -1 else nl + 1
        elif ch == "/" and text[i : i + 2] == "/*":
            close = text.find("*/", i + 2)
            i = n if close == -1 else close + 2
        elif ch == ";":
            return i
        else:
            i += 1
    return n


def _skip_quoted(text: str, start: int, quote: str) -> int:
    """Position just past a quoted region starting at ``start``; doubled quotes escape."""
    i = start + 1
    n = len(text)
    while i < n:
        if text[i] == quote:
            if i + 1 < n and text[i + 1] == quote:
                i += 2
                continue
            return i + 1
        i += 1
    return n


REPAIR_INSTRUCTIONS = {
    "linking_json": "Return only a valid JSON array matching the documented linking schema.",
    "plan_json": "Return only a valid JSON object matching the documented plan schema.",
    "sql_only": "Return only one valid SQL statement, nothing else.",
}


def structured_call(
    provider: CompletionProvider,
    request: CompletionRequest,
    expected_kind: str,
    validate: Callable | None = None,
):
    """Complete and parse, with at most one format-repair retry.

    ``validate`` may run extra checks on the parsed value and raise; its
    failures also trigger the single repair round. The second failure
    propagates to the caller.
    """
    def attempt(req: CompletionRequest):
        result = complete(provider, req)
        parsed = parse_structured(result.text, expected_kind)
        if validate is not None:
            validate(parsed)
        return parsed

    try:
        return attempt(request)
    except _REPAIRABLE as exc:
        reason = str(exc)
        repair = ChatMessage(
            role="user",
            content=(
                f"Your previous response was invalid: {reason}. "
                f"{REPAIR_INSTRUCTIONS[expected_kind]}"
            ),
        )
        retry = CompletionRequest(
            messages=request.messages + (repair,),
            purpose_tag=request.purpose_tag,
            temperature=request.temperature,
        )
        return attempt(retry)


# -- transcripts ----------------------------------------------------------------

def record_transcript(entries: list[TranscriptEntry], path: str | Path) -> None:
    """Write newline-delimited JSON records: {"digest": ..., "response": ...}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(
                json.dumps(
                    {"digest": entry.request_digest, "response": entry.response_text},
                    sort_keys=True,
                )
                + "\n"
            )


def _read_transcript(path: str | Path) -> list[TranscriptEntry]:
    path = Path(path)
    entries = []
    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                entries.append(TranscriptEntry(doc["digest"], doc["response"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptTranscriptError(str(path), line_number, f"bad record: {exc}") from exc
    return entries


def load_transcript(path: str | Path) -> ReplayProvider:
    """Load a transcript into an immutable replay provider."""
    responses = {e.request_digest: e.response_text for e in _read_transcript(path)}
    return ReplayProvider(responses=responses)
