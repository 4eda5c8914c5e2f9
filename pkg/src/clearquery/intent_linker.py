"""Schema linking with human review.

The model proposes mappings from phrases in the question to schema fields;
each proposed surface string is located in the question (first
case-insensitive occurrence, left to right, non-overlapping) to produce
reviewable mention spans. Humans correct and confirm the result, and the
confirmed mappings drive the focused schema subset used by later stages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import (
    NotConfirmedError,
    UnknownFieldError,
    UnknownMentionError,
)
from .llm_gateway import ChatMessage, CompletionProvider, CompletionRequest, structured_call
from .schema_catalog import SchemaSubset, render_schema_prompt


@dataclass(frozen=True)
class Mention:
    id: str
    char_start: int
    char_end: int
    surface_text: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "surface_text": self.surface_text,
        }


@dataclass(frozen=True)
class FieldRef:
    table: str
    column: str

    def to_dict(self) -> dict:
        return {"table": self.table, "column": self.column}


ORIGIN_MODEL = "model"
ORIGIN_USER = "user_corrected"


@dataclass(frozen=True)
class Mapping:
    mention: Mention
    fields: tuple[FieldRef, ...]
    origin: str = ORIGIN_MODEL

    def to_dict(self) -> dict:
        return {
            "mention": self.mention.to_dict(),
            "fields": [f.to_dict() for f in self.fields],
            "origin": self.origin,
        }


@dataclass(frozen=True)
class LinkingResult:
    question: str
    knowledge: str
    mappings: tuple[Mapping, ...]
    confirmed: bool = False
    warnings: tuple[str, ...] = ()

    def mapping_for(self, mention_id: str) -> Mapping:
        for m in self.mappings:
            if m.mention.id == mention_id:
                return m
        raise UnknownMentionError(mention_id)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "knowledge": self.knowledge,
            "confirmed": self.confirmed,
            "warnings": list(self.warnings),
            "mappings": [m.to_dict() for m in self.mappings],
        }


LINKING_SHAPE_DOC = (
    'Respond with JSON only: [{"surface": string, "fields": [{"table": string, '
    '"column": string}]}]. Each surface must be quoted verbatim from the question.'
)


def build_linking_request(question: str, subset: SchemaSubset, knowledge: str) -> CompletionRequest:
    system = (
        "You link phrases of a natural-language database question to the "
        "schema fields they refer to. " + LINKING_SHAPE_DOC
    )
    user = (
        f"Question: {question}\n"
        f"Schema:\n{render_schema_prompt(subset)}\n"
        f"Knowledge: {knowledge or '(none)'}"
    )
    return CompletionRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        purpose_tag="linking",
    )


def link(
    provider: CompletionProvider, question: str, subset: SchemaSubset, knowledge: str = ""
) -> LinkingResult:
    """Ask the model for mappings and anchor them to spans of the question.

    Proposed fields that do not resolve in the subset, and surfaces that do
    not occur in the question, are dropped with a recorded warning rather
    than failing the link.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    parsed = structured_call(provider, build_linking_request(question, subset, knowledge), "linking_json")
    mappings: list[Mapping] = []
    warnings: list[str] = []
    claimed: list[tuple[int, int]] = []
    for item in parsed:
        surface = item["surface"]
        fields = []
        for ref in item["fields"]:
            if subset.has_field(ref["table"], ref["column"]):
                fields.append(FieldRef(ref["table"], ref["column"]))
            else:
                warnings.append(
                    f"dropped field {ref['table']}.{ref['column']} for {surface!r}: "
                    "not in the selected schema"
                )
        if not fields:
            warnings.append(f"dropped mapping for {surface!r}: no usable fields")
            continue
        span = _locate(question, surface, claimed)
        if span is None:
            warnings.append(f"dropped mapping for {surface!r}: phrase not found in question")
            continue
        claimed.append(span)
        start, end = span
        mention = Mention(
            id=f"m{len(mappings) + 1}",
            char_start=start,
            char_end=end,
            surface_text=question[start:end],
        )
        mappings.append(Mapping(mention=mention, fields=tuple(_dedupe(fields))))
    return LinkingResult(
        question=question,
        knowledge=knowledge,
        mappings=tuple(mappings),
        confirmed=False,
        warnings=tuple(warnings),
    )


def _dedupe(fields: list[FieldRef]) -> list[FieldRef]:
    seen = set()
    out = []
    for f in fields:
        key = (f.table.casefold(), f.column.casefold())
        if key not in seen:
            seen.add(key)
            out.append(f)
    return out


def _locate(question: str, surface: str, claimed: list[tuple[int, int]]) -> tuple[int, int] | None:
    """First case-insensitive occurrence of ``surface`` not overlapping a claimed span."""
    if not surface:
        return None
    haystack = question.casefold()
    needle = surface.casefold()
    pos = 0
    while True:
        pos = haystack.find(needle, pos)
        if pos == -1:
            return None
        end = pos + len(surface)
        if all(end <= s or e <= pos for s, e in claimed):
            return (pos, end)
        pos += 1


def apply_correction(
    result: LinkingResult,
    mention_id: str,
    new_fields: list[FieldRef],
    subset: SchemaSubset,
) -> LinkingResult:
    """Replace one mapping's fields with a human-chosen set.

    The correction is recorded even when the field set is unchanged; explicit
    confirmation by a person is information. Confirmation is reset.
    """
    if not new_fields:
        raise UnknownFieldError("(empty)", "(empty)")
    for ref in new_fields:
        if not subset.has_field(ref.table, ref.column):
            raise UnknownFieldError(ref.table, ref.column)
    target = result.mapping_for(mention_id)
    updated = tuple(
        replace(m, fields=tuple(_dedupe(list(new_fields))), origin=ORIGIN_USER)
        if m.mention.id == target.mention.id
        else m
        for m in result.mappings
    )
    return replace(result, mappings=updated, confirmed=False)


def confirm(result: LinkingResult) -> LinkingResult:
    """Mark the linking as human-approved; idempotent."""
    return replace(result, confirmed=True)


def derive_focused_schema(result: LinkingResult, subset: SchemaSubset) -> SchemaSubset:
    """Narrow the subset to what the confirmed mappings need.

    Retains every mapped column, the primary-key columns of each table that
    contributed a mapped column, and both columns of any foreign key joining
    two retained tables. With zero mappings the full subset is returned so
    simple questions can proceed.
    """
    if not result.confirmed:
        raise NotConfirmedError("linking must be confirmed before deriving the focused schema")
    if not result.mappings:
        return subset

    wanted: dict[str, set[str]] = {}
    for mapping in result.mappings:
        for ref in mapping.fields:
            wanted.setdefault(ref.table.casefold(), set()).add(ref.column.casefold())

    snapshot = subset.source
    retained_tables = [name for name, _ in subset.tables if name.casefold() in wanted]

    # Primary keys of contributing tables.
    for name in retained_tables:
        table = snapshot.table(name)
        assert table is not None
        for pk in table.primary_key_columns:
            wanted[name.casefold()].add(pk.casefold())

    # Foreign keys connecting two retained tables, in either direction.
    retained_set = {n.casefold() for n in retained_tables}
    for name in retained_tables:
        table = snapshot.table(name)
        assert table is not None
        for fk in table.foreign_keys:
            if fk.target_table.casefold() in retained_set:
                wanted[name.casefold()].add(fk.local_column.casefold())
                wanted[fk.target_table.casefold()].add(fk.target_column.casefold())

    entries = []
    for name, columns in subset.tables:
        keep = wanted.get(name.casefold())
        if not keep:
            continue
        entries.append((name, tuple(c for c in columns if c.casefold() in keep)))
    return SchemaSubset(source=snapshot, tables=tuple(entries))


def linking_from_dict(doc: dict) -> LinkingResult:
    return LinkingResult(
        question=doc["question"],
        knowledge=doc["knowledge"],
        confirmed=doc["confirmed"],
        warnings=tuple(doc.get("warnings", [])),
        mappings=tuple(
            Mapping(
                mention=Mention(
                    id=m["mention"]["id"],
                    char_start=m["mention"]["char_start"],
                    char_end=m["mention"]["char_end"],
                    surface_text=m["mention"]["surface_text"],
                ),
                fields=tuple(FieldRef(f["table"], f["column"]) for f in m["fields"]),
                origin=m["origin"],
            )
            for m in doc["mappings"]
        ),
    )
