"""Sandboxed statement execution for validation runs.

Defense in depth: a keyword classifier rejects anything that is not a single
read-only statement before a connection is even opened, and the statement
then runs on a read-only connection with a row cap and a wall-clock watchdog.
Failures come back as :class:`ExecError` values, never as raised exceptions.
"""

from __future__ import annotations

import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path

#: Statements whose first keyword is one of these are considered read-only.
ALLOWED_STARTERS = ("SELECT", "WITH", "EXPLAIN", "VALUES")

#: Known statement verbs that are never read-only. Everything SQLite accepts
#: as a statement starts with a known verb, so an unrecognized first word is
#: not executable at all and may fall through to the engine's syntax error.
FORBIDDEN_VERBS = frozenset(
    {
        "ALTER", "ANALYZE", "ATTACH", "BEGIN", "COMMIT", "CREATE", "DELETE",
        "DETACH", "DROP", "END", "INSERT", "PRAGMA", "REINDEX", "RELEASE",
        "REPLACE", "ROLLBACK", "SAVEPOINT", "UPDATE", "VACUUM",
        # Cross-dialect mutating verbs, forbidden for clarity of intent.
        "CALL", "COPY", "EXEC", "EXECUTE", "GRANT", "IMPORT", "INSTALL",
        "LOAD", "LOCK", "MERGE", "RENAME", "REVOKE", "SET", "TRUNCATE",
        "UPSERT", "USE",
    }
)


@dataclass(frozen=True)
class ExecLimits:
    max_preview_rows: int = 100
    timeout: float = 5.0

    def __post_init__(self):
        if self.max_preview_rows <= 0:
            raise ValueError("max_preview_rows must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class ResultPreview:
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    total_rows_seen: int
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "type": "preview",
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "total_rows_seen": self.total_rows_seen,
            "truncated": self.truncated,
        }


@dataclass(frozen=True)
class ExecError:
    kind: str  # syntax | runtime | timeout | forbidden
    message: str
    sql: str

    def to_dict(self) -> dict:
        return {"type": "error", "kind": self.kind, "message": self.message, "sql": self.sql}


@dataclass(frozen=True)
class StatementClass:
    allowed: bool
    reason: str | None = None


def classify_statement(sql: str) -> StatementClass:
    """Forbid known mutating verbs and multi-statement inputs.

    Scans past leading comments and whitespace to the first keyword, then
    walks the rest of the text (string literals, quoted identifiers, and both
    comment forms are opaque) looking for a statement separator followed by
    any further content. A first word that is neither an allowed starter nor
    a known verb passes through: the engine rejects it as a syntax error,
    which is the classification a typo like "SELEC" deserves.
    """
    i = _skip_leading_trivia(sql, 0)
    if i >= len(sql):
        return StatementClass(False, "empty statement")
    separator = _find_top_level_semicolon(sql, i)
    if separator != -1 and sql[separator + 1 :].strip():
        return StatementClass(False, "multiple statements")
    first_word = _read_word(sql, i).upper()
    if first_word in ALLOWED_STARTERS:
        return StatementClass(True)
    if first_word in FORBIDDEN_VERBS:
        return StatementClass(False, f"non-read-only verb {first_word}")
    return StatementClass(True)  # unrecognized word: the engine rejects it as syntax


def _skip_leading_trivia(text: str, i: int) -> int:
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif text[i : i + 2] == "--":
            nl = text.find("\n", i)
            i = n if nl == -1 else nl + 1
        elif text[i : i + 2] == "/*":
            close = text.find("*/", i + 2)
            i = n if close == -1 else close + 2
        else:
            return i
    return i


def _read_word(text: str, i: int) -> str:
    j = i
    while j < len(text) and (text[j].isalpha() or text[j] == "_"):
        j += 1
    return text[i:j]


def _find_top_level_semicolon(text: str, i: int) -> int:
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "'" or ch == '"':
            i = _skip_quoted(text, i, ch)
        elif text[i : i + 2] == "--":
            nl = text.find("\n", i)
            i = n if nl == -1 else nl + 1
        elif text[i : i + 2] == "/*":
            close = text.find("*/", i + 2)
            i = n if close == -1 else close + 2
        elif ch == ";":
            return i
        else:
            i += 1
    return -1


def _skip_quoted(text: str, start: int, quote: str) -> int:
    i = start + 1
    n = len(text)
    while i < n:
        if text[i] == quote:
            if i + 1 < n and text[i + 1] == quote:  # doubled quote escapes
                i += 2
                continue
            return i + 1
        i += 1
    return n


def execute_preview(
    db_path: str | Path, sql: str, limits: ExecLimits | None = None
) -> ResultPreview | ExecError:
    """Run one read-only statement and return a bounded preview.

    Forbidden statements short-circuit without touching the database. NULL
    cells render as the string "NULL"; all other values are stringified.
    """
    limits = limits or ExecLimits()
    decision = classify_statement(sql)
    if not decision.allowed:
        return ExecError(kind="forbidden", message=decision.reason or "forbidden", sql=sql)

    path = Path(db_path)
    try:
        conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
    except sqlite3.Error as exc:
        return ExecError(kind="runtime", message=f"cannot open database: {exc}", sql=sql)

    interrupted = threading.Event()

    def _interrupt():
        interrupted.set()
        conn.interrupt()

    watchdog = threading.Timer(limits.timeout, _interrupt)
    watchdog.start()
    try:
        conn.execute("PRAGMA query_only = ON")
        cursor = conn.execute(sql)
        columns = tuple(d[0] for d in cursor.description) if cursor.description else ()
        fetched = cursor.fetchmany(limits.max_preview_rows + 1)
        kept = fetched[: limits.max_preview_rows]
        total_seen = len(fetched)
        rows = tuple(tuple(_display(cell) for cell in row) for row in kept)
        return ResultPreview(
            columns=columns,
            rows=rows,
            total_rows_seen=total_seen,
            truncated=total_seen > len(rows),
        )
    except sqlite3.OperationalError as exc:
        message = str(exc)
        if interrupted.is_set() or "interrupted" in message.lower():
            return ExecError(
                kind="timeout", message=f"query exceeded {limits.timeout:g}s and was aborted", sql=sql
            )
        kind = "syntax" if "syntax error" in message.lower() else "runtime"
        return ExecError(kind=kind, message=message, sql=sql)
    except sqlite3.Error as exc:
        return ExecError(kind="runtime", message=str(exc), sql=sql)
    finally:
        watchdog.cancel()
        conn.close()


def _display(value) -> str:
    if value is None:
        return "NULL"
    return str(value)
