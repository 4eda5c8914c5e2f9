"""Step-decomposition plans: a DAG of explained sub-queries with sub-SQL.

A plan is an immutable value; every mutating operation returns a new version
and obeys the cascade-preservation rule: changing step *i* leaves every step
not reachable from *i* byte-identical, while (transitive) dependents are
marked stale for the user to regenerate when they choose. Dependencies may
only point at steps with smaller display ordinals, which keeps the graph
acyclic by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import (
    IncompleteRegenerationError,
    InvalidPlanError,
    UnknownStepError,
)
from .llm_gateway import ChatMessage, CompletionProvider, CompletionRequest, structured_call
from .schema_catalog import SchemaSubset, render_schema_prompt
from .sql_executor import ExecError, ResultPreview

STATUS_PENDING = "pending"
STATUS_OK = "executed_ok"
STATUS_ERROR = "executed_error"
STATUS_STALE = "stale"
STATUSES = frozenset({STATUS_PENDING, STATUS_OK, STATUS_ERROR, STATUS_STALE})


@dataclass(frozen=True)
class Step:
    id: str
    ordinal: int
    explanation: str
    sql: str
    depends_on: tuple[str, ...] = ()
    status: str = STATUS_PENDING
    last_result: ResultPreview | ExecError | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ordinal": self.ordinal,
            "explanation": self.explanation,
            "sql": self.sql,
            "depends_on": list(self.depends_on),
            "status": self.status,
            "last_result": self.last_result.to_dict() if self.last_result else None,
        }


@dataclass(frozen=True)
class Plan:
    steps: tuple[Step, ...]
    version: int = 1
    final_sql: str | None = None
    final_version: int | None = None
    final_forced: bool = False

    def step(self, step_id: str) -> Step:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise UnknownStepError(step_id)

    def has_step(self, step_id: str) -> bool:
        return any(s.id == step_id for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "final_sql": self.final_sql,
            "final_version": self.final_version,
            "final_forced": self.final_forced,
            "steps": [s.to_dict() for s in self.steps],
        }


def _check_steps(steps: list[Step]) -> tuple[Step, ...]:
    if not steps:
        raise InvalidPlanError("plan has no steps")
    by_id: dict[str, Step] = {}
    for step in steps:
        if step.id in by_id:
            raise InvalidPlanError(f"duplicate step id {step.id!r}")
        by_id[step.id] = step
    for step in steps:
        for dep in step.depends_on:
            if dep not in by_id:
                raise InvalidPlanError(f"step {step.id!r} depends on unknown step {dep!r}")
            if by_id[dep].ordinal >= step.ordinal:
                raise InvalidPlanError(
                    f"step {step.id!r} depends on {dep!r}, which does not precede it"
                )
    return tuple(steps)


def plan_from_parsed(doc: dict) -> Plan:
    """Build a fresh version-1 plan from a parsed plan document."""
    steps = [
        Step(
            id=item["id"],
            ordinal=i + 1,
            explanation=item["explanation"],
            sql=item["sql"],
            depends_on=tuple(item.get("depends_on", [])),
        )
        for i, item in enumerate(doc["steps"])
    ]
    return Plan(steps=_check_steps(steps), version=1)


def dependents_of(plan: Plan, step_id: str) -> dict[str, list[str]]:
    """Adjacency map: step id -> ids of steps that directly depend on it."""
    out: dict[str, list[str]] = {s.id: [] for s in plan.steps}
    for step in plan.steps:
        for dep in step.depends_on:
            out[dep].append(step.id)
    return out


def descendants(plan: Plan, step_id: str) -> set[str]:
    """Ids of every step transitively dependent on ``step_id``."""
    plan.step(step_id)  # raises UnknownStepError
    adjacency = dependents_of(plan, step_id)
    seen: set[str] = set()
    frontier = list(adjacency[step_id])
    while frontier:
        current = frontier.pop()
        if current in seen:
            continue
        seen.add(current)
        frontier.extend(adjacency[current])
    return seen


def ancestors(plan: Plan, step_id: str) -> list[Step]:
    """Every step the target transitively depends on, in ordinal order."""
    target = plan.step(step_id)
    seen: set[str] = set()
    frontier = list(target.depends_on)
    while frontier:
        current = frontier.pop()
        if current in seen:
            continue
        seen.add(current)
        frontier.extend(plan.step(current).depends_on)
    return sorted((plan.step(sid) for sid in seen), key=lambda s: s.ordinal)


def leaves(plan: Plan) -> list[Step]:
    depended_on = {dep for step in plan.steps for dep in step.depends_on}
    return [s for s in plan.steps if s.id not in depended_on]


def dependency_tree(plan: Plan) -> dict:
    """JSON-shaped rendering structure: roots plus nodes with children lists."""
    adjacency = dependents_of(plan, plan.steps[0].id) if plan.steps else {}
    ordinal_of = {s.id: s.ordinal for s in plan.steps}
    nodes = {
        s.id: {
            "id": s.id,
            "ordinal": s.ordinal,
            "explanation": s.explanation,
            "status": s.status,
            "children": sorted(adjacency.get(s.id, []), key=lambda i: ordinal_of[i]),
        }
        for s in plan.steps
    }
    roots = [s.id for s in plan.steps if not s.depends_on]
    return {"roots": roots, "nodes": nodes}


def _bump(plan: Plan, steps: list[Step]) -> Plan:
    """New plan version; any recorded final SQL is invalidated."""
    return Plan(steps=tuple(steps), version=plan.version + 1)


def edit_step(
    plan: Plan,
    step_id: str,
    new_explanation: str | None = None,
    new_sql: str | None = None,
) -> Plan:
    """Apply a manual edit; dependents are marked stale, nothing else moves."""
    if new_explanation is None and new_sql is None:
        raise ValueError("edit_step needs a new explanation, new sql, or both")
    target = plan.step(step_id)
    stale_ids = descendants(plan, step_id)
    updated = []
    for step in plan.steps:
        if step.id == step_id:
            updated.append(
                replace(
                    target,
                    explanation=new_explanation if new_explanation is not None else target.explanation,
                    sql=new_sql if new_sql is not None else target.sql,
                    status=STATUS_PENDING,
                    last_result=None,
                )
            )
        elif step.id in stale_ids:
            updated.append(replace(step, status=STATUS_STALE))
        else:
            updated.append(step)
    return _bump(plan, updated)


def record_execution(plan: Plan, step_id: str, result: ResultPreview | ExecError) -> Plan:
    """Store an execution outcome on one step.

    Bookkeeping only: the plan version does not move and no staleness
    propagates, because the step's logic is unchanged.
    """
    plan.step(step_id)
    status = STATUS_ERROR if isinstance(result, ExecError) else STATUS_OK
    updated = [
        replace(s, status=status, last_result=result) if s.id == step_id else s
        for s in plan.steps
    ]
    return replace(plan, steps=tuple(updated))


# -- model-backed operations ----------------------------------------------------

_PLAN_SHAPE_DOC = (
    'Respond with JSON only: {"steps": [{"id": string, "explanation": string, '
    '"sql": string, "depends_on": [string, ...]}]}. Steps are ordered; '
    "depends_on may reference only earlier steps."
)


def build_decompose_request(
    question: str, focused: SchemaSubset, knowledge: str
) -> CompletionRequest:
    system = (
        "You decompose a database question into a short sequence of simple, "
        "explained sub-queries. Each sub-query carries one executable SQLite "
        "statement and builds on the steps it depends on. " + _PLAN_SHAPE_DOC
    )
    user = (
        f"Question: {question}\n"
        f"Schema:\n{render_schema_prompt(focused)}\n"
        f"Knowledge: {knowledge or '(none)'}"
    )
    return CompletionRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        purpose_tag="decompose",
    )


def decompose(
    provider: CompletionProvider, question: str, focused: SchemaSubset, knowledge: str
) -> Plan:
    """Ask the model for a fresh plan; one repair round on malformed or invalid output."""
    request = build_decompose_request(question, focused, knowledge)
    holder: dict[str, Plan] = {}

    def validate(doc: dict) -> None:
        holder["plan"] = plan_from_parsed(doc)

    structured_call(provider, request, "plan_json", validate=validate)
    return holder["plan"]


def build_regenerate_request(
    question: str,
    focused: SchemaSubset,
    knowledge: str,
    plan: Plan,
    from_step_id: str,
    stale_ids: list[str],
) -> CompletionRequest:
    from_step = plan.step(from_step_id)
    frozen = ancestors(plan, from_step_id)
    frozen_text = "\n".join(
        f"- {s.id} (step {s.ordinal}): {s.explanation}\n  SQL: {s.sql}" for s in frozen
    )
    stale_steps = [plan.step(sid) for sid in stale_ids]
    stale_text = "\n".join(
        f"- {s.id} (step {s.ordinal}, depends on {', '.join(s.depends_on)}): {s.explanation}"
        for s in sorted(stale_steps, key=lambda s: s.ordinal)
    )
    system = (
        "A reasoning step of an existing query plan was modified. Regenerate "
        "the SQL of the listed out-of-date steps so they follow from the "
        "modified step; earlier steps are frozen and must not change. You may "
        "also return an updated entry for the modified step itself. "
        + _PLAN_SHAPE_DOC
        + " Return entries only for the out-of-date step ids (and optionally "
        "the modified step); omit depends_on or repeat the existing one."
    )
    user = (
        f"Question: {question}\n"
        f"Schema:\n{render_schema_prompt(focused)}\n"
        f"Knowledge: {knowledge or '(none)'}\n"
        f"Frozen earlier steps:\n{frozen_text or '(none)'}\n"
        f"Modified step {from_step.id} (step {from_step.ordinal}): {from_step.explanation}\n"
        f"  SQL: {from_step.sql}\n"
        f"Out-of-date steps needing new SQL:\n{stale_text or '(none)'}"
    )
    return CompletionRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        purpose_tag="regenerate",
    )


def regenerate_downstream(
    provider: CompletionProvider,
    plan: Plan,
    from_step_id: str,
    question: str,
    focused: SchemaSubset,
    knowledge: str,
) -> Plan:
    """Regenerate the stale descendants of ``from_step_id`` (and optionally itself).

    Replacements must cover every stale descendant; anything else in the
    response is rejected. Ancestors stay byte-identical.
    """
    plan.step(from_step_id)
    stale_ids = sorted(
        (sid for sid in descendants(plan, from_step_id) if plan.step(sid).status == STATUS_STALE),
        key=lambda sid: plan.step(sid).ordinal,
    )
    request = build_regenerate_request(question, focused, knowledge, plan, from_step_id, stale_ids)
    allowed = set(stale_ids) | {from_step_id}

    def validate(doc: dict) -> None:
        got = [item["id"] for item in doc["steps"]]
        unknown = [sid for sid in got if sid not in allowed]
        if unknown:
            raise InvalidPlanError(f"replacement references unknown ids: {', '.join(unknown)}")
        if len(set(got)) != len(got):
            raise InvalidPlanError("duplicate replacement ids")
        missing = [sid for sid in stale_ids if sid not in got]
        if missing:
            raise IncompleteRegenerationError(missing)

    doc = structured_call(provider, request, "plan_json", validate=validate)
    replacements = {item["id"]: item for item in doc["steps"]}
    updated = []
    for step in plan.steps:
        if step.id in replacements:
            item = replacements[step.id]
            updated.append(
                replace(
                    step,
                    explanation=item["explanation"],
                    sql=item["sql"],
                    status=STATUS_PENDING,
                    last_result=None,
                )
            )
        else:
            updated.append(step)
    return _bump(plan, updated)


def build_refine_request(step: Step, error: ExecError, focused: SchemaSubset) -> CompletionRequest:
    system = (
        "A SQL statement failed to execute. Correct it. Return only the "
        "corrected SQLite statement, no prose."
    )
    user = (
        f"Schema:\n{render_schema_prompt(focused)}\n"
        f"Failing SQL: {step.sql}\n"
        f"Error ({error.kind}): {error.message}"
    )
    return CompletionRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        purpose_tag="refine",
    )


def refine_step(
    provider: CompletionProvider,
    plan: Plan,
    step_id: str,
    error: ExecError,
    focused: SchemaSubset,
) -> Plan:
    """Ask the model to self-correct one failing statement."""
    target = plan.step(step_id)
    new_sql = structured_call(provider, build_refine_request(target, error, focused), "sql_only")
    stale_ids = descendants(plan, step_id)
    updated = []
    for step in plan.steps:
        if step.id == step_id:
            updated.append(replace(step, sql=new_sql, status=STATUS_PENDING, last_result=None))
        elif step.id in stale_ids:
            updated.append(replace(step, status=STATUS_STALE))
        else:
            updated.append(step)
    return _bump(plan, updated)


def build_finalize_request(
    question: str, focused: SchemaSubset, knowledge: str, leaf_steps: list[Step]
) -> CompletionRequest:
    leaf_text = "\n".join(f"- {s.id}: {s.explanation}\n  SQL: {s.sql}" for s in leaf_steps)
    system = (
        "Compose the results of several final reasoning steps into one SQLite "
        "statement answering the question. Return only the SQL statement."
    )
    user = (
        f"Question: {question}\n"
        f"Schema:\n{render_schema_prompt(focused)}\n"
        f"Knowledge: {knowledge or '(none)'}\n"
        f"Final steps:\n{leaf_text}"
    )
    return CompletionRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        purpose_tag="finalize",
    )


def finalize(
    provider: CompletionProvider,
    plan: Plan,
    question: str,
    focused: SchemaSubset,
    knowledge: str,
) -> Plan:
    """Record the final SQL: the single leaf's statement verbatim, or a
    model-composed statement when the plan has several leaves."""
    leaf_steps = sorted(leaves(plan), key=lambda s: s.ordinal)
    if len(leaf_steps) == 1:
        final_sql = leaf_steps[0].sql
    else:
        final_sql = structured_call(
            provider, build_finalize_request(question, focused, knowledge, leaf_steps), "sql_only"
        )
    forced = not all(s.status == STATUS_OK for s in plan.steps)
    return replace(plan, final_sql=final_sql, final_version=plan.version, final_forced=forced)


def clear_final(plan: Plan) -> Plan:
    return replace(plan, final_sql=None, final_version=None, final_forced=False)


# -- serialization ----------------------------------------------------------------

def step_from_dict(doc: dict) -> Step:
    last = doc.get("last_result")
    result: ResultPreview | ExecError | None = None
    if last is not None:
        if last["type"] == "preview":
            result = ResultPreview(
                columns=tuple(last["columns"]),
                rows=tuple(tuple(r) for r in last["rows"]),
                total_rows_seen=last["total_rows_seen"],
                truncated=last["truncated"],
            )
        else:
            result = ExecError(kind=last["kind"], message=last["message"], sql=last["sql"])
    return Step(
        id=doc["id"],
        ordinal=doc["ordinal"],
        explanation=doc["explanation"],
        sql=doc["sql"],
        depends_on=tuple(doc["depends_on"]),
        status=doc["status"],
        last_result=result,
    )


def plan_from_dict(doc: dict) -> Plan:
    return Plan(
        steps=tuple(step_from_dict(s) for s in doc["steps"]),
        version=doc["version"],
        final_sql=doc["final_sql"],
        final_version=doc["final_version"],
        final_forced=doc["final_forced"],
    )
