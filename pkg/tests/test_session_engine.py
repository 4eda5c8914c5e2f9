from __future__ import annotations

import itertools
import json

import pytest

import scenario
from conftest import FnProvider

from clearquery.errors import (
    CorruptSessionError,
    InvalidPlanError,
    InvalidStateError,
    SessionNotFoundError,
    UnknownTableError,
)
from clearquery.intent_linker import FieldRef
from clearquery.llm_gateway import load_transcript, record_transcript
from clearquery.session_engine import (
    FINALIZED,
    INTENT_REVIEW,
    PLAN_REVIEW,
    QUESTION_ENTRY,
    SessionEngine,
    load_session,
    replay_events,
    save_session,
    session_to_dict,
)
from clearquery.sql_executor import ExecError


def make_engine(provider, store_dir=None, **kwargs) -> SessionEngine:
    ticks = itertools.count()
    ids = itertools.count(1)
    kwargs.setdefault("clock", lambda: 1700000000.0 + next(ticks))
    kwargs.setdefault("id_factory", lambda: f"sess{next(ids)}")
    return SessionEngine(provider, store_dir=store_dir, **kwargs)


LINK_MATH = json.dumps(
    [{"surface": "math", "fields": [{"table": "satscores", "column": "AvgScrMath"}]}]
)

PLAN_TWO = json.dumps(
    {
        "steps": [
            {"id": "a", "explanation": "first", "sql": "SELECT 1", "depends_on": []},
            {"id": "b", "explanation": "second", "sql": "SELECT 2", "depends_on": ["a"]},
        ]
    }
)


def start_plan_review(schools_db, responses=None):
    provider = FnProvider(responses or [LINK_MATH, PLAN_TWO])
    engine = make_engine(provider)
    session = engine.create_session(schools_db, ["satscores"], "")
    engine.submit_question(session.id, "highest math score")
    engine.confirm_intent(session.id)
    return engine, engine.get_session(session.id), provider


# -- creation -----------------------------------------------------------------

def test_create_session(schools_db):
    engine = make_engine(FnProvider())
    session = engine.create_session(schools_db, ["satscores"], "")
    assert session.state == QUESTION_ENTRY
    assert session.selected.table_names() == ["satscores"]
    assert [e.kind for e in session.events] == ["session_created"]


def test_create_session_unknown_table(schools_db, tmp_path):
    engine = make_engine(FnProvider(), store_dir=tmp_path)
    with pytest.raises(UnknownTableError):
        engine.create_session(schools_db, ["nonexistent"], "")
    assert list(tmp_path.glob("*.json")) == []  # nothing persisted


def test_create_session_empty_knowledge_is_valid(schools_db):
    engine = make_engine(FnProvider())
    session = engine.create_session(schools_db, ["satscores"], "")
    assert session.knowledge == ""


# -- question & linking ------------------------------------------------------------

def test_submit_question_links(schools_db):
    engine = make_engine(FnProvider([LINK_MATH]))
    session = engine.create_session(schools_db, ["satscores"], "")
    session = engine.submit_question(session.id, "highest math score")
    assert session.state == INTENT_REVIEW
    assert session.linking is not None
    assert session.linking.mappings[0].mention.surface_text == "math"
    assert [e.kind for e in session.events] == [
        "session_created",
        "question_submitted",
        "linked",
    ]


def test_resubmission_discards_prior_artifacts(schools_db):
    relink = json.dumps(
        [{"surface": "writing", "fields": [{"table": "satscores", "column": "AvgScrWrite"}]}]
    )
    engine, session, provider = start_plan_review(schools_db)
    assert session.plan is not None
    with pytest.raises(InvalidStateError):
        engine.submit_question(session.id, "asking again")  # PlanReview forbids it

    # From IntentReview a re-submission relinks and drops everything downstream.
    provider2 = FnProvider([LINK_MATH, relink])
    engine2 = make_engine(provider2)
    s2 = engine2.create_session(schools_db, ["satscores"], "")
    engine2.submit_question(s2.id, "highest math score")
    s2 = engine2.submit_question(s2.id, "highest writing score")
    assert s2.state == INTENT_REVIEW
    assert s2.plan is None and s2.focused is None
    assert s2.linking.mappings[0].mention.surface_text == "writing"
    assert s2.question == "highest writing score"


def test_submit_while_finalized_is_invalid(schools_db):
    engine, session, provider = start_plan_review(schools_db)
    engine.step_action(session.id, "a", "execute")
    engine.step_action(session.id, "b", "execute")
    engine.finalize_session(session.id)
    with pytest.raises(InvalidStateError):
        engine.submit_question(session.id, "new question")


def test_correct_mapping(schools_db):
    engine = make_engine(FnProvider([LINK_MATH]))
    session = engine.create_session(schools_db, ["satscores"], "")
    session = engine.submit_question(session.id, "highest math score")
    mention_id = session.linking.mappings[0].mention.id
    session = engine.correct_mapping(
        session.id, mention_id, [FieldRef("satscores", "AvgScrRead")]
    )
    assert [f.column for f in session.linking.mappings[0].fields] == ["AvgScrRead"]
    assert session.linking.mappings[0].origin == "user_corrected"
    assert session.events[-1].kind == "mapping_corrected"


def test_correction_after_confirm_is_invalid_state(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    mention_id = session.linking.mappings[0].mention.id
    with pytest.raises(InvalidStateError):
        engine.correct_mapping(session.id, mention_id, [FieldRef("satscores", "AvgScrRead")])


# -- confirmation & planning ---------------------------------------------------------

def test_confirm_generates_plan(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    assert session.state == PLAN_REVIEW
    assert session.linking.confirmed is True
    assert session.focused is not None
    assert [s.id for s in session.plan.steps] == ["a", "b"]
    assert [e.kind for e in session.events] == [
        "session_created",
        "question_submitted",
        "linked",
        "intent_confirmed",
        "plan_generated",
    ]


def test_confirm_failure_stays_in_intent_review(schools_db):
    bad_plan = json.dumps(
        {"steps": [{"id": "a", "explanation": "x", "sql": "SELECT 1", "depends_on": ["zz"]}]}
    )
    provider = FnProvider([LINK_MATH, bad_plan, bad_plan])
    engine = make_engine(provider)
    session = engine.create_session(schools_db, ["satscores"], "")
    engine.submit_question(session.id, "highest math score")
    with pytest.raises(InvalidPlanError):
        engine.confirm_intent(session.id)
    session = engine.get_session(session.id)
    assert session.state == INTENT_REVIEW
    assert session.plan is None
    assert session.events[-1].kind == "error"
    assert session.events[-1].payload["code"] == "invalid_plan"
    # The user may retry once the provider behaves.
    provider.push(PLAN_TWO)
    session = engine.confirm_intent(session.id)
    assert session.state == PLAN_REVIEW


def test_confirm_twice_is_invalid(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    with pytest.raises(InvalidStateError):
        engine.confirm_intent(session.id)


# -- step actions ----------------------------------------------------------------------

def test_execute_step(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    session = engine.step_action(session.id, "a", "execute")
    step = session.plan.step("a")
    assert step.status == "executed_ok"
    assert step.last_result.rows == (("1",),)
    assert session.events[-1].kind == "step_executed"
    assert session.state == PLAN_REVIEW


def test_refine_after_syntax_error(schools_db):
    broken_plan = json.dumps(
        {"steps": [{"id": "a", "explanation": "typo", "sql": "SELEC 1", "depends_on": []}]}
    )
    engine, session, provider = start_plan_review(schools_db, [LINK_MATH, broken_plan])
    session = engine.step_action(session.id, "a", "execute")
    assert session.plan.step("a").status == "executed_error"
    assert isinstance(session.plan.step("a").last_result, ExecError)
    provider.push("SELECT 1")
    session = engine.step_action(session.id, "a", "refine")
    assert session.plan.step("a").sql == "SELECT 1"
    assert session.plan.step("a").status == "pending"


def test_refine_without_failure_is_invalid(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    with pytest.raises(InvalidStateError):
        engine.step_action(session.id, "a", "refine")


def test_edit_then_regenerate_preserves_prior_steps(schools_db):
    five = json.dumps(
        {
            "steps": [
                {
                    "id": f"s{i}",
                    "explanation": f"step {i}",
                    "sql": f"SELECT {i}",
                    "depends_on": [f"s{i - 1}"] if i > 1 else [],
                }
                for i in range(1, 6)
            ]
        }
    )
    engine, session, provider = start_plan_review(schools_db, [LINK_MATH, five])
    before = {s.id: s for s in session.plan.steps}
    session = engine.step_action(session.id, "s3", "edit", {"explanation": "rethought"})
    assert session.plan.step("s4").status == "stale"
    provider.push(
        json.dumps(
            {
                "steps": [
                    {"id": "s4", "explanation": "new 4", "sql": "SELECT 44"},
                    {"id": "s5", "explanation": "new 5", "sql": "SELECT 55"},
                ]
            }
        )
    )
    session = engine.step_action(session.id, "s3", "regenerate")
    for frozen in ("s1", "s2"):
        assert session.plan.step(frozen) == before[frozen]
    assert session.plan.step("s4").sql == "SELECT 44"
    assert [e.kind for e in session.events[-2:]] == ["step_edited", "regenerated"]


def test_step_action_in_wrong_state(schools_db):
    engine = make_engine(FnProvider([LINK_MATH]))
    session = engine.create_session(schools_db, ["satscores"], "")
    with pytest.raises(InvalidStateError):
        engine.step_action(session.id, "a", "execute")


# -- finalize & reopen --------------------------------------------------------------------

def test_finalize_and_reopen(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    engine.step_action(session.id, "a", "execute")
    engine.step_action(session.id, "b", "execute")
    session = engine.finalize_session(session.id)
    assert session.state == FINALIZED
    assert session.plan.final_sql == "SELECT 2"  # single leaf, verbatim
    assert session.plan.final_forced is False
    assert session.annotated is not None
    assert session.annotated.sql == "SELECT 2"
    with pytest.raises(InvalidStateError):
        engine.step_action(session.id, "b", "execute")

    session = engine.reopen_session(session.id)
    assert session.state == PLAN_REVIEW
    assert session.plan.final_sql is None
    assert session.annotated is None
    session = engine.step_action(session.id, "b", "edit", {"sql": "SELECT 22"})
    assert session.plan.step("b").sql == "SELECT 22"


def test_finalize_with_error_step_is_forced(schools_db):
    bad_plan = json.dumps(
        {"steps": [{"id": "a", "explanation": "broken", "sql": "SELECT missing_col FROM satscores", "depends_on": []}]}
    )
    engine, session, _ = start_plan_review(schools_db, [LINK_MATH, bad_plan])
    engine.step_action(session.id, "a", "execute")
    session = engine.finalize_session(session.id)
    assert session.state == FINALIZED
    assert session.plan.final_forced is True
    assert session.events[-1].payload["forced"] is True


# -- persistence & replay ---------------------------------------------------------------

def test_save_load_round_trip(schools_db, tmp_path):
    engine, session, _ = start_plan_review(schools_db)
    engine.step_action(session.id, "a", "execute")
    session = engine.get_session(session.id)
    save_session(session, tmp_path)
    loaded = load_session(session.id, tmp_path)
    assert session_to_dict(loaded) == session_to_dict(session)


def test_load_missing_session(tmp_path):
    with pytest.raises(SessionNotFoundError):
        load_session("nope", tmp_path)


def test_unknown_schema_version_is_corrupt(schools_db, tmp_path):
    engine = make_engine(FnProvider(), store_dir=tmp_path)
    session = engine.create_session(schools_db, ["satscores"], "")
    path = tmp_path / f"{session.id}.json"
    doc = json.loads(path.read_text())
    doc["schema_version"] = 999
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptSessionError) as info:
        load_session(session.id, tmp_path)
    assert "999" in str(info.value)


def test_replay_reconstructs_session(schools_db):
    engine, session, provider = start_plan_review(schools_db)
    engine.step_action(session.id, "a", "execute")
    engine.step_action(session.id, "b", "execute")
    engine.finalize_session(session.id)
    session = engine.get_session(session.id)
    replayed = replay_events(session.id, session.events)
    assert session_to_dict(replayed) == session_to_dict(session)


def test_replay_rejects_illegal_transition(schools_db):
    engine, session, _ = start_plan_review(schools_db)
    session = engine.get_session(session.id)
    events = list(session.events)
    events[0], events[1] = events[1], events[0]
    from clearquery.session_engine import Event

    reseq = [Event(i + 1, e.kind, e.payload, e.at) for i, e in enumerate(events)]
    with pytest.raises(CorruptSessionError):
        replay_events(session.id, reseq)


def test_no_model_calls_outside_permitted_states(schools_db):
    engine, session, provider = start_plan_review(schools_db)
    engine.step_action(session.id, "a", "execute")
    engine.step_action(session.id, "b", "execute")
    engine.finalize_session(session.id)
    purposes = [p for p, _ in provider.calls]
    # linking during question submission, decompose during confirmation; the
    # single-leaf finalize path needs no model at all.
    assert purposes == ["linking", "decompose"]


def test_engine_autopersists_and_reloads(schools_db, tmp_path):
    provider = FnProvider([LINK_MATH, PLAN_TWO])
    engine = make_engine(provider, store_dir=tmp_path)
    session = engine.create_session(schools_db, ["satscores"], "")
    engine.submit_question(session.id, "highest math score")
    engine.confirm_intent(session.id)

    fresh = make_engine(FnProvider(), store_dir=tmp_path)
    restored = fresh.get_session(session.id)
    assert restored.state == PLAN_REVIEW
    assert [s.id for s in restored.plan.steps] == ["a", "b"]


# -- provider substitutability ------------------------------------------------------------

def _run_scenario(engine, db_path):
    session = engine.create_session(db_path, scenario.TABLES, scenario.KNOWLEDGE)
    engine.submit_question(session.id, scenario.QUESTION)
    engine.confirm_intent(session.id)
    for sid in ("s1", "s2", "s3", "s4", "s5"):
        engine.step_action(session.id, sid, "execute")
    engine.finalize_session(session.id)
    return session_to_dict(engine.get_session(session.id))


def test_scripted_and_replay_providers_agree(schools_db, tmp_path):
    scripted = scenario.build_script(schools_db)
    transcript = tmp_path / "walkthrough.ndjson"
    record_transcript(scripted.transcript_entries(), transcript)
    replay = load_transcript(transcript)

    doc_scripted = _run_scenario(make_engine(scripted), schools_db)
    doc_replay = _run_scenario(make_engine(replay), schools_db)
    assert doc_scripted == doc_replay
