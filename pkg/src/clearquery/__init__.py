"""Transparent, controllable natural-language-to-SQL orchestration.

The pipeline turns a question over a SQLite database into reviewed SQL in
three human-checkable stages: intent linking (which schema fields does the
question talk about?), step decomposition (a DAG of explained sub-queries,
each executable on its own), and validation (sandboxed execution, targeted
refinement, cascade-safe regeneration). The final statement is annotated
with nesting depths and per-step provenance spans.
"""

from .errors import ClearQueryError
from .llm_gateway import (
    ChatMessage,
    CompletionRequest,
    CompletionResult,
    LiveProvider,
    ReplayProvider,
    ScriptedProvider,
    complete,
    load_transcript,
    parse_structured,
    record_transcript,
    request_digest,
)
from .schema_catalog import (
    SchemaSnapshot,
    SchemaSubset,
    filter_keyword,
    introspect_database,
    relationship_edges,
    render_schema_prompt,
    select_tables,
)
from .session_engine import Session, SessionEngine, load_session, replay_events, save_session
from .sql_executor import ExecError, ExecLimits, ResultPreview, classify_statement, execute_preview

__all__ = [
    "ChatMessage",
    "ClearQueryError",
    "CompletionRequest",
    "CompletionResult",
    "ExecError",
    "ExecLimits",
    "LiveProvider",
    "ReplayProvider",
    "ResultPreview",
    "SchemaSnapshot",
    "SchemaSubset",
    "ScriptedProvider",
    "Session",
    "SessionEngine",
    "classify_statement",
    "complete",
    "execute_preview",
    "filter_keyword",
    "introspect_database",
    "load_session",
    "load_transcript",
    "parse_structured",
    "record_transcript",
    "relationship_edges",
    "render_schema_prompt",
    "replay_events",
    "request_digest",
    "save_session",
    "select_tables",
]

__version__ = "0.1.0"
