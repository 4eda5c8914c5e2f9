from __future__ import annotations

import json
import random

import pytest

from conftest import FnProvider
from dag_tools import brute_force_reachable, random_plan

from clearquery.errors import (
    IncompleteRegenerationError,
    InvalidPlanError,
    UnknownStepError,
)
from clearquery.plan_graph import (
    Plan,
    Step,
    decompose,
    dependency_tree,
    edit_step,
    finalize,
    leaves,
    plan_from_dict,
    record_execution,
    refine_step,
    regenerate_downstream,
)
from clearquery.sql_executor import ExecError, ResultPreview


def _plan_response(steps):
    return json.dumps({"steps": steps})


def _chain_steps(n):
    return [
        {
            "id": f"s{i}",
            "explanation": f"explain step {i}",
            "sql": f"SELECT {i}",
            "depends_on": [f"s{i - 1}"] if i > 1 else [],
        }
        for i in range(1, n + 1)
    ]


def _plan(steps_spec) -> Plan:
    """steps_spec: list of (id, deps)."""
    return Plan(
        steps=tuple(
            Step(
                id=sid,
                ordinal=i + 1,
                explanation=f"does {sid}",
                sql=f"SELECT '{sid}'",
                depends_on=tuple(deps),
            )
            for i, (sid, deps) in enumerate(steps_spec)
        )
    )


# -- decompose ----------------------------------------------------------------

def test_decompose_five_step_chain(fn_provider, subset_satscores):
    fn_provider.push(_plan_response(_chain_steps(5)))
    plan = decompose(fn_provider, "question?", subset_satscores, "")
    assert [s.id for s in plan.steps] == ["s1", "s2", "s3", "s4", "s5"]
    assert [s.depends_on for s in plan.steps] == [(), ("s1",), ("s2",), ("s3",), ("s4",)]
    assert all(s.status == "pending" for s in plan.steps)
    assert plan.version == 1 and plan.final_sql is None


def test_decompose_single_step(fn_provider, subset_satscores):
    fn_provider.push(_plan_response(_chain_steps(1)))
    plan = decompose(fn_provider, "question?", subset_satscores, "")
    assert len(plan.steps) == 1
    assert plan.steps[0].depends_on == ()


def test_decompose_forward_dependency_fails_after_repair(fn_provider, subset_satscores):
    bad = _plan_response(
        [
            {"id": "a", "explanation": "x", "sql": "SELECT 1", "depends_on": ["b"]},
            {"id": "b", "explanation": "y", "sql": "SELECT 2", "depends_on": []},
        ]
    )
    fn_provider.push(bad)
    fn_provider.push(bad)  # repair attempt returns the same invalid plan
    with pytest.raises(InvalidPlanError):
        decompose(fn_provider, "question?", subset_satscores, "")
    assert len(fn_provider.calls) == 2

    # Oracle: a topological scan by ordinal flags the forward edge.
    doc = json.loads(bad)["steps"]
    seen = set()
    violations = [s["id"] for s in doc if any(d not in seen for d in s["depends_on"]) or seen.add(s["id"])]
    assert "a" in violations


def test_decompose_repairs_once_then_succeeds(fn_provider, subset_satscores):
    fn_provider.push("not json")
    fn_provider.push(_plan_response(_chain_steps(2)))
    plan = decompose(fn_provider, "question?", subset_satscores, "")
    assert len(plan.steps) == 2
    assert len(fn_provider.calls) == 2


def test_decompose_duplicate_ids_rejected(fn_provider, subset_satscores):
    bad = _plan_response(
        [
            {"id": "a", "explanation": "x", "sql": "SELECT 1", "depends_on": []},
            {"id": "a", "explanation": "y", "sql": "SELECT 2", "depends_on": []},
        ]
    )
    fn_provider.push(bad)
    fn_provider.push(bad)
    with pytest.raises(InvalidPlanError):
        decompose(fn_provider, "question?", subset_satscores, "")


# -- dependency tree ------------------------------------------------------------

def test_tree_linear_chain_is_path():
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s2"]), ("s4", ["s3"]), ("s5", ["s4"])])
    tree = dependency_tree(plan)
    assert tree["roots"] == ["s1"]
    depth = 0
    node = "s1"
    while tree["nodes"][node]["children"]:
        assert len(tree["nodes"][node]["children"]) == 1
        node = tree["nodes"][node]["children"][0]
        depth += 1
    assert depth == 4


def test_tree_fan_out():
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s1"])])
    tree = dependency_tree(plan)
    assert tree["roots"] == ["s1"]
    assert tree["nodes"]["s1"]["children"] == ["s2", "s3"]


def test_tree_diamond_single_node_two_incoming():
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s1"]), ("s4", ["s2", "s3"])])
    tree = dependency_tree(plan)
    # Oracle: brute-force edge enumeration.
    edges = {(dep, s.id) for s in plan.steps for dep in s.depends_on}
    tree_edges = {
        (parent, child)
        for parent, node in tree["nodes"].items()
        for child in node["children"]
    }
    assert tree_edges == edges
    assert list(tree["nodes"]).count("s4") == 1
    incoming = [p for p, c in tree_edges if c == "s4"]
    assert sorted(incoming) == ["s2", "s3"]


# -- edit & cascade ---------------------------------------------------------------

def test_edit_mid_chain_preserves_ancestors():
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s2"]), ("s4", ["s3"]), ("s5", ["s4"])])
    edited = edit_step(plan, "s3", new_sql="SELECT 'fixed'")
    for untouched in ("s1", "s2"):
        assert edited.step(untouched) == plan.step(untouched)
    assert edited.step("s3").status == "pending"
    assert edited.step("s3").sql == "SELECT 'fixed'"
    assert edited.step("s4").status == "stale"
    assert edited.step("s5").status == "stale"
    assert edited.version == plan.version + 1


def test_edit_last_step_marks_nothing_stale():
    plan = _plan([("s1", []), ("s2", ["s1"])])
    edited = edit_step(plan, "s2", new_explanation="new thinking")
    assert edited.step("s1") == plan.step("s1")
    assert all(s.status != "stale" for s in edited.steps)


def test_edit_diamond_only_descendants_stale():
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s1"]), ("s4", ["s2", "s3"])])
    edited = edit_step(plan, "s2", new_sql="SELECT 0")
    # Oracle: breadth-first reachability over dependency edges.
    assert brute_force_reachable(plan, "s2") == {"s4"}
    assert edited.step("s4").status == "stale"
    assert edited.step("s3") == plan.step("s3")


def test_edit_requires_a_change_and_known_step():
    plan = _plan([("s1", [])])
    with pytest.raises(ValueError):
        edit_step(plan, "s1")
    with pytest.raises(UnknownStepError):
        edit_step(plan, "ghost", new_sql="SELECT 1")


def test_edit_clears_final_sql():
    plan = _plan([("s1", [])])
    done = finalize(FnProvider(), plan, "q", None, "")
    assert done.final_sql == "SELECT 's1'"
    edited = edit_step(done, "s1", new_sql="SELECT 2")
    assert edited.final_sql is None and edited.final_version is None


def test_cascade_preservation_randomized():
    rng = random.Random(7)
    for _ in range(50):
        plan = random_plan(rng, max_nodes=12)
        victim = rng.choice(plan.steps).id
        edited = edit_step(plan, victim, new_sql="SELECT 'edited'")
        expected_stale = brute_force_reachable(plan, victim)
        for step in plan.steps:
            after = edited.step(step.id)
            if step.id == victim:
                assert after.status == "pending"
            elif step.id in expected_stale:
                assert after.status == "stale"
                assert after.sql == step.sql  # stale keeps its text until regeneration
            else:
                assert after == step  # byte-identical survivors


# -- regenerate --------------------------------------------------------------------

def test_regenerate_replaces_stale_set(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s2"]), ("s4", ["s3"]), ("s5", ["s4"])])
    edited = edit_step(plan, "s3", new_explanation="different idea")
    replacement = _plan_response(
        [
            {"id": "s3", "explanation": "regenerated 3", "sql": "SELECT 30"},
            {"id": "s4", "explanation": "regenerated 4", "sql": "SELECT 40"},
            {"id": "s5", "explanation": "regenerated 5", "sql": "SELECT 50"},
        ]
    )
    fn_provider.push(replacement)
    result = regenerate_downstream(fn_provider, edited, "s3", "q", subset_satscores, "")
    assert result.step("s1") == plan.step("s1")
    assert result.step("s2") == plan.step("s2")
    assert result.step("s4").sql == "SELECT 40"
    assert result.step("s4").status == "pending"
    assert result.step("s5").status == "pending"
    assert result.version == edited.version + 1


def test_regenerate_zero_stale_is_version_bump(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"])])
    edited = edit_step(plan, "s2", new_explanation="tail rethought")
    fn_provider.push(_plan_response([]))  # nothing to replace
    result = regenerate_downstream(fn_provider, edited, "s2", "q", subset_satscores, "")
    assert [s.sql for s in result.steps] == [s.sql for s in edited.steps]
    assert result.version == edited.version + 1


def test_regenerate_may_rewrite_the_edited_step(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"])])
    edited = edit_step(plan, "s2", new_explanation="tail rethought")
    fn_provider.push(
        _plan_response([{"id": "s2", "explanation": "tail rethought", "sql": "SELECT 99"}])
    )
    result = regenerate_downstream(fn_provider, edited, "s2", "q", subset_satscores, "")
    assert result.step("s2").sql == "SELECT 99"
    assert result.step("s1") == plan.step("s1")


def test_regenerate_missing_replacement_fails(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s2"])])
    edited = edit_step(plan, "s1", new_sql="SELECT 'new root'")
    incomplete = _plan_response([{"id": "s2", "explanation": "only two", "sql": "SELECT 2"}])
    fn_provider.push(incomplete)
    fn_provider.push(incomplete)  # repair retry also incomplete
    with pytest.raises(IncompleteRegenerationError):
        regenerate_downstream(fn_provider, edited, "s1", "q", subset_satscores, "")
    # Oracle: set difference between stale ids and replacement ids.
    stale = brute_force_reachable(plan, "s1")
    replaced = {"s2"}
    assert stale - replaced == {"s3"}
    assert len(fn_provider.calls) == 2


def test_regenerate_unknown_replacement_id_rejected(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"])])
    edited = edit_step(plan, "s1", new_sql="SELECT 0")
    bad = _plan_response(
        [
            {"id": "s2", "explanation": "fine", "sql": "SELECT 2"},
            {"id": "zz", "explanation": "intruder", "sql": "SELECT 666"},
        ]
    )
    fn_provider.push(bad)
    fn_provider.push(bad)
    with pytest.raises(InvalidPlanError):
        regenerate_downstream(fn_provider, edited, "s1", "q", subset_satscores, "")


# -- refine ------------------------------------------------------------------------

def test_refine_replaces_sql(fn_provider, subset_satscores):
    plan = _plan([("s1", [])])
    error = ExecError(kind="syntax", message='near "SELEC": syntax error', sql="SELEC 1")
    broken = record_execution(plan, "s1", error)
    assert broken.step("s1").status == "executed_error"
    fn_provider.push("SELECT 1")
    fixed = refine_step(fn_provider, broken, "s1", error, subset_satscores)
    assert fixed.step("s1").sql == "SELECT 1"
    assert fixed.step("s1").status == "pending"
    assert fixed.version == broken.version + 1


def test_refine_final_step_marks_nothing_stale(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"])])
    error = ExecError(kind="syntax", message="boom", sql="bad")
    fn_provider.push("SELECT 2")
    fixed = refine_step(fn_provider, plan, "s2", error, subset_satscores)
    assert all(s.status != "stale" for s in fixed.steps)


def test_refine_mid_chain_staleness_matches_edit(fn_provider, subset_satscores):
    spec = [("s1", []), ("s2", ["s1"]), ("s3", ["s2"]), ("s4", ["s3"])]
    error = ExecError(kind="runtime", message="no such column", sql="x")
    refined = refine_step(
        FnProvider(["SELECT 'fixed'"]), _plan(spec), "s2", error, subset_satscores
    )
    edited = edit_step(_plan(spec), "s2", new_sql="SELECT 'fixed'")
    assert [(s.id, s.status) for s in refined.steps] == [(s.id, s.status) for s in edited.steps]


# -- finalize ----------------------------------------------------------------------

def test_finalize_linear_chain_takes_leaf_verbatim():
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s2"]), ("s4", ["s3"]), ("s5", ["s4"])])
    # Oracle: in-degree count finds exactly one leaf.
    depended = {d for s in plan.steps for d in s.depends_on}
    assert [s.id for s in plan.steps if s.id not in depended] == ["s5"]
    done = finalize(FnProvider(), plan, "q", None, "")
    assert done.final_sql == plan.step("s5").sql
    assert done.final_version == plan.version


def test_finalize_single_step():
    plan = _plan([("only", [])])
    done = finalize(FnProvider(), plan, "q", None, "")
    assert done.final_sql == plan.step("only").sql


def test_finalize_multi_leaf_composes_via_model(fn_provider, subset_satscores):
    plan = _plan([("s1", []), ("s2", ["s1"]), ("s3", ["s1"])])
    assert len(leaves(plan)) == 2
    fn_provider.push("SELECT 's2' UNION SELECT 's3'")
    done = finalize(fn_provider, plan, "q", subset_satscores, "")
    assert done.final_sql == "SELECT 's2' UNION SELECT 's3'"
    assert fn_provider.calls[0][0] == "finalize"


def test_finalize_records_forced_flag():
    plan = _plan([("s1", [])])
    failed = record_execution(
        plan, "s1", ExecError(kind="runtime", message="x", sql="SELECT 's1'")
    )
    done = finalize(FnProvider(), failed, "q", None, "")
    assert done.final_forced is True
    ok = record_execution(
        plan,
        "s1",
        ResultPreview(columns=("a",), rows=(("1",),), total_rows_seen=1, truncated=False),
    )
    assert finalize(FnProvider(), ok, "q", None, "").final_forced is False


# -- serialization -------------------------------------------------------------------

def test_plan_round_trips_through_dict():
    plan = _plan([("s1", []), ("s2", ["s1"])])
    plan = record_execution(
        plan,
        "s1",
        ResultPreview(columns=("x",), rows=(("1",),), total_rows_seen=1, truncated=False),
    )
    plan = record_execution(
        plan, "s2", ExecError(kind="runtime", message="nope", sql="SELECT 's2'")
    )
    assert plan_from_dict(plan.to_dict()) == plan
