"""One session per querying task: an auditable, persistent state machine.

A session carries the question, the selected schema, optional free-text
knowledge, and every derived artifact (linking, focused subset, plan,
annotated final SQL). Each mutation appends an event whose payload contains
the full artifact it changed, so replaying the log from creation rebuilds
the session exactly and every human intervention stays auditable.

States: TableSelection -> QuestionEntry -> IntentReview -> PlanReview ->
Finalized (with reopen back to PlanReview). Mutations are serialized per
session; reads are always allowed.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import intent_linker, plan_graph
from .errors import (
    ClearQueryError,
    CorruptSessionError,
    InvalidStateError,
    SessionNotFoundError,
)
from .intent_linker import FieldRef, LinkingResult, linking_from_dict
from .llm_gateway import CompletionProvider
from .plan_graph import Plan, plan_from_dict
from .schema_catalog import (
    SchemaSnapshot,
    SchemaSubset,
    introspect_database,
    select_tables,
    snapshot_from_dict,
    snapshot_to_dict,
    subset_from_list,
    subset_to_list,
)
from .sql_attribution import AnnotatedSql, annotate, annotated_from_dict
from .sql_executor import ExecError, ExecLimits, execute_preview

SCHEMA_VERSION = 1

# Session states.
TABLE_SELECTION = "TableSelection"
QUESTION_ENTRY = "QuestionEntry"
INTENT_REVIEW = "IntentReview"
PLAN_REVIEW = "PlanReview"
FINALIZED = "Finalized"

STEP_ACTIONS = ("execute", "refine", "edit", "regenerate")

EVENT_KINDS = (
    "session_created",
    "question_submitted",
    "linked",
    "mapping_corrected",
    "intent_confirmed",
    "plan_generated",
    "step_executed",
    "step_edited",
    "step_refined",
    "regenerated",
    "finalized",
    "reopened",
    "error",
)

#: Event kinds acceptable in each state, with the state they lead to (None = unchanged).
_TRANSITIONS: dict[str, dict[str, str | None]] = {
    TABLE_SELECTION: {"session_created": QUESTION_ENTRY},
    QUESTION_ENTRY: {"question_submitted": None, "linked": INTENT_REVIEW, "error": None},
    INTENT_REVIEW: {
        "question_submitted": None,
        "linked": None,
        "mapping_corrected": None,
        "intent_confirmed": None,
        "plan_generated": PLAN_REVIEW,
        "error": None,
    },
    PLAN_REVIEW: {
        "step_executed": None,
        "step_edited": None,
        "step_refined": None,
        "regenerated": None,
        "finalized": FINALIZED,
        "error": None,
    },
    FINALIZED: {"reopened": PLAN_REVIEW, "error": None},
}


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    payload: dict
    at: str

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "at": self.at}


@dataclass
class Session:
    id: str
    db_path: str
    snapshot: SchemaSnapshot
    selected: SchemaSubset
    knowledge: str
    question: str = ""
    state: str = QUESTION_ENTRY
    linking: LinkingResult | None = None
    focused: SchemaSubset | None = None
    plan: Plan | None = None
    annotated: AnnotatedSql | None = None
    events: list[Event] = field(default_factory=list)
    created_at: str = ""
    updated_at: str = ""


def session_to_dict(session: Session) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": session.id,
        "db_path": session.db_path,
        "knowledge": session.knowledge,
        "question": session.question,
        "state": session.state,
        "snapshot": snapshot_to_dict(session.snapshot),
        "selected": subset_to_list(session.selected),
        "focused": subset_to_list(session.focused) if session.focused else None,
        "linking": session.linking.to_dict() if session.linking else None,
        "plan": session.plan.to_dict() if session.plan else None,
        "annotated_sql": session.annotated.to_dict() if session.annotated else None,
        "events": [e.to_dict() for e in session.events],
        "created_at": session.created_at,
        "updated_at": session.updated_at,
    }


def session_from_dict(doc: dict) -> Session:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CorruptSessionError(f"unsupported session schema_version: {version!r}")
    try:
        snapshot = snapshot_from_dict(doc["snapshot"])
        return Session(
            id=doc["id"],
            db_path=doc["db_path"],
            snapshot=snapshot,
            selected=subset_from_list(snapshot, doc["selected"]),
            knowledge=doc["knowledge"],
            question=doc["question"],
            state=doc["state"],
            linking=linking_from_dict(doc["linking"]) if doc["linking"] else None,
            focused=subset_from_list(snapshot, doc["focused"]) if doc["focused"] else None,
            plan=plan_from_dict(doc["plan"]) if doc["plan"] else None,
            annotated=annotated_from_dict(doc["annotated_sql"]) if doc["annotated_sql"] else None,
            events=[Event(e["seq"], e["kind"], e["payload"], e["at"]) for e in doc["events"]],
            created_at=doc["created_at"],
            updated_at=doc["updated_at"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSessionError(f"session document is malformed: {exc}") from exc


def save_session(session: Session, store_dir: str | Path) -> Path:
    """Write the session as one JSON document: ``<store_dir>/<id>.json``."""
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)
    path = store / f"{session.id}.json"
    path.write_text(
        json.dumps(session_to_dict(session), sort_keys=True, indent=1), encoding="utf-8"
    )
    return path


def load_session(session_id: str, store_dir: str | Path) -> Session:
    path = Path(store_dir) / f"{session_id}.json"
    if not path.is_file():
        raise SessionNotFoundError(session_id)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CorruptSessionError(f"cannot parse {path}: {exc}") from exc
    return session_from_dict(doc)


def replay_events(session_id: str, events: list[Event]) -> Session:
    """Rebuild a session by folding its event log through the state machine.

    Every event is validated against the transitions its state permits, so a
    successful replay doubles as a reachability proof for the stored state.
    """
    if not events or events[0].kind != "session_created":
        raise CorruptSessionError("event log must start with session_created")
    state = TABLE_SELECTION
    session: Session | None = None
    for index, event in enumerate(events):
        if event.seq != index + 1:
            raise CorruptSessionError(f"event sequence broken at #{index + 1} (got {event.seq})")
        allowed = _TRANSITIONS[state]
        if event.kind not in allowed:
            raise CorruptSessionError(f"event {event.kind!r} not allowed in state {state!r}")
        payload = event.payload
        if event.kind == "session_created":
            snapshot = snapshot_from_dict(payload["snapshot"])
            session = Session(
                id=session_id,
                db_path=payload["db_path"],
                snapshot=snapshot,
                selected=subset_from_list(snapshot, payload["selected"]),
                knowledge=payload["knowledge"],
                created_at=event.at,
            )
        else:
            assert session is not None
            if event.kind == "question_submitted":
                session.question = payload["question"]
            elif event.kind == "linked":
                session.linking = linking_from_dict(payload["linking"])
                session.focused = None
                session.plan = None
                session.annotated = None
            elif event.kind == "mapping_corrected":
                session.linking = linking_from_dict(payload["linking"])
            elif event.kind == "intent_confirmed":
                session.linking = linking_from_dict(payload["linking"])
                session.focused = subset_from_list(session.snapshot, payload["focused"])
            elif event.kind == "plan_generated":
                session.plan = plan_from_dict(payload["plan"])
            elif event.kind in ("step_executed", "step_edited", "step_refined", "regenerated"):
                session.plan = plan_from_dict(payload["plan"])
            elif event.kind == "finalized":
                session.plan = plan_from_dict(payload["plan"])
                session.annotated = annotated_from_dict(payload["annotated_sql"])
            elif event.kind == "reopened":
                session.plan = plan_from_dict(payload["plan"])
                session.annotated = None
        next_state = allowed[event.kind]
        if next_state is not None:
            state = next_state
        assert session is not None
        session.state = state
        session.events.append(event)
        session.updated_at = event.at
    assert session is not None
    return session


class SessionEngine:
    """Owns live sessions: one writer at a time per session, reads always."""

    def __init__(
        self,
        provider: CompletionProvider,
        store_dir: str | Path | None = None,
        limits: ExecLimits | None = None,
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] | None = None,
    ):
        self.provider = provider
        self.store_dir = Path(store_dir) if store_dir else None
        self.limits = limits or ExecLimits()
        self.clock = clock
        self.id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- plumbing ---------------------------------------------------------

    def _now(self) -> str:
        return datetime.fromtimestamp(self.clock(), tz=timezone.utc).isoformat()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _append(self, session: Session, kind: str, payload: dict) -> Event:
        event = Event(seq=len(session.events) + 1, kind=kind, payload=payload, at=self._now())
        session.events.append(event)
        session.updated_at = event.at
        return event

    def _persist(self, session: Session) -> None:
        if self.store_dir is not None:
            save_session(session, self.store_dir)

    def _require(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            if self.store_dir is not None:
                session = load_session(session_id, self.store_dir)
                self._sessions[session_id] = session
                return session
            raise SessionNotFoundError(session_id)
        return session

    def _require_state(self, session: Session, *states: str) -> None:
        if session.state not in states:
            raise InvalidStateError(
                f"operation not allowed in state {session.state}; needs {' or '.join(states)}",
                state=session.state,
            )

    def _record_error(self, session: Session, exc: Exception) -> None:
        code = getattr(exc, "code", "internal_error")
        self._append(session, "error", {"code": code, "message": str(exc)})
        self._persist(session)

    # -- operations ---------------------------------------------------------

    def get_session(self, session_id: str) -> Session:
        return self._require(session_id)

    def create_session(self, db_path: str | Path, table_names: list[str], knowledge: str = "") -> Session:
        snapshot = introspect_database(db_path, clock=self.clock)
        selected = select_tables(snapshot, table_names)
        session = Session(
            id=self.id_factory(),
            db_path=str(db_path),
            snapshot=snapshot,
            selected=selected,
            knowledge=knowledge,
            state=QUESTION_ENTRY,
        )
        created = self._append(
            session,
            "session_created",
            {
                "db_path": str(db_path),
                "knowledge": knowledge,
                "snapshot": snapshot_to_dict(snapshot),
                "selected": subset_to_list(selected),
            },
        )
        session.created_at = created.at
        with self._registry_lock:
            self._sessions[session.id] = session
            self._locks.setdefault(session.id, threading.Lock())
        self._persist(session)
        return session

    def submit_question(self, session_id: str, question: str) -> Session:
        with self._lock_for(session_id):
            session = self._require(session_id)
            self._require_state(session, QUESTION_ENTRY, INTENT_REVIEW)
            linking = intent_linker.link(self.provider, question, session.selected, session.knowledge)
            session.question = question
            session.linking = linking
            session.focused = None
            session.plan = None
            session.annotated = None
            session.state = INTENT_REVIEW
            self._append(session, "question_submitted", {"question": question})
            self._append(session, "linked", {"linking": linking.to_dict()})
            self._persist(session)
            return session

    def correct_mapping(self, session_id: str, mention_id: str, fields: list[FieldRef]) -> Session:
        with self._lock_for(session_id):
            session = self._require(session_id)
            self._require_state(session, INTENT_REVIEW)
            assert session.linking is not None
            session.linking = intent_linker.apply_correction(
                session.linking, mention_id, fields, session.selected
            )
            session.focused = None
            self._append(
                session,
                "mapping_corrected",
                {"mention_id": mention_id, "linking": session.linking.to_dict()},
            )
            self._persist(session)
            return session

    def confirm_intent(self, session_id: str) -> Session:
        with self._lock_for(session_id):
            session = self._require(session_id)
            self._require_state(session, INTENT_REVIEW)
            assert session.linking is not None
            session.linking = intent_linker.confirm(session.linking)
            session.focused = intent_linker.derive_focused_schema(session.linking, session.selected)
            self._append(
                session,
                "intent_confirmed",
                {"linking": session.linking.to_dict(), "focused": subset_to_list(session.focused)},
            )
            try:
                plan = plan_graph.decompose(
                    self.provider, session.question, session.focused, session.knowledge
                )
            except ClearQueryError as exc:
                self._record_error(session, exc)
                raise
            session.plan = plan
            session.state = PLAN_REVIEW
            self._append(session, "plan_generated", {"plan": plan.to_dict()})
            self._persist(session)
            return session

    def step_action(self, session_id: str, step_id: str, action: str, payload: dict | None = None) -> Session:
        if action not in STEP_ACTIONS:
            raise ValueError(f"unknown step action {action!r}")
        payload = payload or {}
        with self._lock_for(session_id):
            session = self._require(session_id)
            self._require_state(session, PLAN_REVIEW)
            assert session.plan is not None and session.focused is not None
            try:
                if action == "execute":
                    step = session.plan.step(step_id)
                    result = execute_preview(session.db_path, step.sql, self.limits)
                    session.plan = plan_graph.record_execution(session.plan, step_id, result)
                    self._append(
                        session,
                        "step_executed",
                        {
                            "step_id": step_id,
                            "result": result.to_dict(),
                            "plan": session.plan.to_dict(),
                        },
                    )
                elif action == "edit":
                    session.plan = plan_graph.edit_step(
                        session.plan,
                        step_id,
                        new_explanation=payload.get("explanation"),
                        new_sql=payload.get("sql"),
                    )
                    session.annotated = None
                    self._append(
                        session,
                        "step_edited",
                        {"step_id": step_id, "plan": session.plan.to_dict()},
                    )
                elif action == "refine":
                    step = session.plan.step(step_id)
                    if not isinstance(step.last_result, ExecError):
                        raise InvalidStateError(
                            f"step {step_id} has no failed execution to refine", state=session.state
                        )
                    session.plan = plan_graph.refine_step(
                        self.provider, session.plan, step_id, step.last_result, session.focused
                    )
                    session.annotated = None
                    self._append(
                        session,
                        "step_refined",
                        {"step_id": step_id, "plan": session.plan.to_dict()},
                    )
                else:  # regenerate
                    session.plan = plan_graph.regenerate_downstream(
                        self.provider,
                        session.plan,
                        step_id,
                        session.question,
                        session.focused,
                        session.knowledge,
                    )
                    session.annotated = None
                    self._append(
                        session,
                        "regenerated",
                        {"from_step": step_id, "plan": session.plan.to_dict()},
                    )
            except ClearQueryError as exc:
                if not isinstance(exc, InvalidStateError):
                    self._record_error(session, exc)
                raise
            self._persist(session)
            return session

    def finalize_session(self, session_id: str) -> Session:
        with self._lock_for(session_id):
            session = self._require(session_id)
            self._require_state(session, PLAN_REVIEW)
            assert session.plan is not None and session.focused is not None
            try:
                plan = plan_graph.finalize(
                    self.provider, session.plan, session.question, session.focused, session.knowledge
                )
            except ClearQueryError as exc:
                self._record_error(session, exc)
                raise
            session.plan = plan
            assert plan.final_sql is not None
            session.annotated = annotate(plan.final_sql, plan)
            session.state = FINALIZED
            self._append(
                session,
                "finalized",
                {
                    "forced": plan.final_forced,
                    "plan": plan.to_dict(),
                    "annotated_sql": session.annotated.to_dict(),
                },
            )
            self._persist(session)
            return session

    def reopen_session(self, session_id: str) -> Session:
        with self._lock_for(session_id):
            session = self._require(session_id)
            self._require_state(session, FINALIZED)
            assert session.plan is not None
            session.plan = plan_graph.clear_final(session.plan)
            session.annotated = None
            session.state = PLAN_REVIEW
            self._append(session, "reopened", {"plan": session.plan.to_dict()})
            self._persist(session)
            return session

    def save(self, session_id: str, store_dir: str | Path | None = None) -> Path:
        session = self._require(session_id)
        target = Path(store_dir) if store_dir else self.store_dir
        if target is None:
            raise ValueError("no store directory configured")
        return save_session(session, target)

    def load(self, session_id: str, store_dir: str | Path | None = None) -> Session:
        target = Path(store_dir) if store_dir else self.store_dir
        if target is None:
            raise ValueError("no store directory configured")
        session = load_session(session_id, target)
        with self._registry_lock:
            self._sessions[session.id] = session
            self._locks.setdefault(session.id, threading.Lock())
        return session
