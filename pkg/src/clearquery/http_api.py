"""JSON-over-HTTP surface for sessions.

One endpoint per user action; every session-scoped response carries the full
serialized session plus an ``action_result`` envelope, so clients re-render
from a single source of truth. Module errors map onto a closed set of
(status, code) pairs.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import BindError, ClearQueryError, ConfigError
from .intent_linker import FieldRef
from .llm_gateway import LiveProvider, ReplayProvider, ScriptedProvider, load_transcript
from .plan_graph import dependency_tree
from .schema_catalog import filter_keyword, relationship_edges, snapshot_to_dict, subset_to_list
from .session_engine import Session, SessionEngine, session_to_dict
from .sql_executor import ExecLimits

STATUS_BY_CODE = {
    "file_not_found": 400,
    "not_a_database": 400,
    "introspection_failed": 400,
    "unknown_table": 400,
    "empty_selection": 400,
    "unknown_field": 400,
    "bad_request": 400,
    "unknown_mention": 404,
    "unknown_step": 404,
    "session_not_found": 404,
    "invalid_state": 409,
    "not_confirmed": 409,
    "provider_error": 502,
    "no_script_entry": 502,
    "malformed_output": 502,
    "invalid_plan": 502,
    "incomplete_regeneration": 502,
    "corrupt_transcript": 500,
    "corrupt_session": 500,
    "config_error": 500,
    "bind_error": 500,
    "internal_error": 500,
}


@dataclass
class ServiceConfig:
    db_path: str
    store_dir: str | None = None
    provider: str = "scripted"
    script_path: str | None = None
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_api_key: str = ""
    host: str = "127.0.0.1"
    port: int = 8000
    ui_dir: str | None = None
    limits: ExecLimits = field(default_factory=ExecLimits)


def build_provider(config: ServiceConfig):
    if config.provider == "scripted":
        if config.script_path:
            return ScriptedProvider.from_file(config.script_path)
        return ScriptedProvider()
    if config.provider == "replay":
        if not config.script_path:
            raise ConfigError("replay provider needs --script <transcript>")
        return load_transcript(config.script_path)
    if config.provider == "live":
        if not config.llm_endpoint or not config.llm_model:
            raise ConfigError("live provider needs LLM_ENDPOINT and LLM_MODEL")
        return LiveProvider(
            endpoint=config.llm_endpoint, model=config.llm_model, api_key=config.llm_api_key
        )
    raise ConfigError(f"unknown provider {config.provider!r}")


def serialize_session(session: Session) -> dict:
    """Stable, fully self-describing session document (see session_engine)."""
    return session_to_dict(session)


class CanonicalJSONResponse(JSONResponse):
    """Sorted keys keep serialized sessions byte-identical and diffable."""

    def render(self, content: Any) -> bytes:
        return json.dumps(content, sort_keys=True, separators=(",", ":")).encode("utf-8")


class CreateSessionBody(BaseModel):
    tables: list[str]
    knowledge: str = ""
    db_path: str | None = None


class QuestionBody(BaseModel):
    question: str


class FieldBody(BaseModel):
    table: str
    column: str


class MappingBody(BaseModel):
    fields: list[FieldBody]


class EditBody(BaseModel):
    explanation: str | None = None
    sql: str | None = None


def create_app(config: ServiceConfig, engine: SessionEngine | None = None) -> FastAPI:
    if engine is None:
        engine = SessionEngine(
            provider=build_provider(config),
            store_dir=config.store_dir,
            limits=config.limits,
        )
    app = FastAPI(title="clearquery", default_response_class=CanonicalJSONResponse)
    app.state.engine = engine
    app.state.config = config

    @app.exception_handler(ClearQueryError)
    async def _domain_error(_request: Request, exc: ClearQueryError):
        code = getattr(exc, "code", "internal_error")
        status = STATUS_BY_CODE.get(code, 500)
        return CanonicalJSONResponse(
            {"error": {"status": status, "code": code, "message": str(exc), "details": None}},
            status_code=status,
        )

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(_request: Request, exc: FileNotFoundError):
        return CanonicalJSONResponse(
            {"error": {"status": 400, "code": "file_not_found", "message": str(exc), "details": None}},
            status_code=400,
        )

    @app.exception_handler(ValueError)
    async def _bad_value(_request: Request, exc: ValueError):
        return CanonicalJSONResponse(
            {"error": {"status": 400, "code": "bad_request", "message": str(exc), "details": None}},
            status_code=400,
        )

    def envelope(session: Session, action_result: dict | None) -> dict:
        return {"session": serialize_session(session), "action_result": action_result}

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.post("/sessions")
    async def create_session(body: CreateSessionBody):
        session = engine.create_session(
            db_path=body.db_path or config.db_path,
            table_names=body.tables,
            knowledge=body.knowledge,
        )
        return envelope(session, {"kind": "created", "session_id": session.id})

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return envelope(engine.get_session(session_id), None)

    @app.post("/sessions/{session_id}/question")
    async def submit_question(session_id: str, body: QuestionBody):
        session = engine.submit_question(session_id, body.question)
        assert session.linking is not None
        return envelope(session, {"kind": "linked", "warnings": list(session.linking.warnings)})

    @app.post("/sessions/{session_id}/mappings/{mention_id}")
    async def correct_mapping(session_id: str, mention_id: str, body: MappingBody):
        session = engine.correct_mapping(
            session_id, mention_id, [FieldRef(f.table, f.column) for f in body.fields]
        )
        return envelope(session, {"kind": "mapping_corrected", "mention_id": mention_id})

    @app.post("/sessions/{session_id}/confirm")
    async def confirm_intent(session_id: str):
        session = engine.confirm_intent(session_id)
        return envelope(session, {"kind": "plan_generated"})

    @app.post("/sessions/{session_id}/steps/{step_id}/execute")
    async def execute_step(session_id: str, step_id: str):
        session = engine.step_action(session_id, step_id, "execute")
        assert session.plan is not None
        step = session.plan.step(step_id)
        result = step.last_result.to_dict() if step.last_result else None
        return envelope(session, {"kind": "step_executed", "step_id": step_id, "result": result})

    @app.post("/sessions/{session_id}/steps/{step_id}/refine")
    async def refine_step(session_id: str, step_id: str):
        session = engine.step_action(session_id, step_id, "refine")
        return envelope(session, {"kind": "step_refined", "step_id": step_id})

    @app.post("/sessions/{session_id}/steps/{step_id}/edit")
    async def edit_step(session_id: str, step_id: str, body: EditBody):
        session = engine.step_action(
            session_id, step_id, "edit", {"explanation": body.explanation, "sql": body.sql}
        )
        return envelope(session, {"kind": "step_edited", "step_id": step_id})

    @app.post("/sessions/{session_id}/steps/{step_id}/regenerate")
    async def regenerate_steps(session_id: str, step_id: str):
        session = engine.step_action(session_id, step_id, "regenerate")
        return envelope(session, {"kind": "regenerated", "from_step": step_id})

    @app.post("/sessions/{session_id}/finalize")
    async def finalize(session_id: str):
        session = engine.finalize_session(session_id)
        assert session.plan is not None
        return envelope(session, {"kind": "finalized", "forced": session.plan.final_forced})

    @app.post("/sessions/{session_id}/reopen")
    async def reopen(session_id: str):
        session = engine.reopen_session(session_id)
        return envelope(session, {"kind": "reopened"})

    @app.get("/sessions/{session_id}/schema")
    async def schema_panel(session_id: str, keyword: str = ""):
        session = engine.get_session(session_id)
        edges = [
            {
                "source_table": e.source_table,
                "target_table": e.target_table,
                "local_column": e.local_column,
                "target_column": e.target_column,
            }
            for e in relationship_edges(session.snapshot)
        ]
        filtered = [[name, cols] for name, cols in filter_keyword(session.snapshot, keyword)]
        return envelope(
            session,
            {
                "kind": "schema",
                "snapshot": snapshot_to_dict(session.snapshot),
                "selected": subset_to_list(session.selected),
                "edges": edges,
                "keyword": keyword,
                "filtered": filtered,
            },
        )

    @app.get("/sessions/{session_id}/tree")
    async def tree(session_id: str):
        session = engine.get_session(session_id)
        structure = dependency_tree(session.plan) if session.plan else {"roots": [], "nodes": {}}
        return envelope(session, {"kind": "tree", "tree": structure})

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until terminated; raises BindError if the port is taken."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        raise BindError(f"cannot bind {config.host}:{config.port}: {exc}") from exc
    finally:
        probe.close()
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
