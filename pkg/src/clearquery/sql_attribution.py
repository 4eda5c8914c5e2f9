"""Nesting-depth and per-step span analysis over a final SQL string.

Two independent scans feed the final-SQL view: :func:`depth_scan` tiles the
text with parenthesis-nesting depths (string literals, quoted identifiers,
and comments are opaque), and :func:`attribute_steps` maps character ranges
back to the reasoning steps whose sub-SQL produced them. Attribution is
best-effort textual matching, not SQL parsing: positions matched by no step
are reported as honest gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

from .plan_graph import Plan


@dataclass(frozen=True)
class DepthSpan:
    char_start: int
    char_end: int
    depth: int

    def to_dict(self) -> dict:
        return {"start": self.char_start, "end": self.char_end, "depth": self.depth}


@dataclass(frozen=True)
class StepSpan:
    char_start: int
    char_end: int
    step_id: str

    def to_dict(self) -> dict:
        return {"start": self.char_start, "end": self.char_end, "step_id": self.step_id}


@dataclass(frozen=True)
class AnnotatedSql:
    sql: str
    depth_spans: tuple[DepthSpan, ...]
    step_spans: tuple[StepSpan, ...]
    unattributed: tuple[tuple[int, int], ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "sql": self.sql,
            "depth_spans": [s.to_dict() for s in self.depth_spans],
            "step_spans": [s.to_dict() for s in self.step_spans],
            "unattributed": [[s, e] for s, e in self.unattributed],
            "warnings": list(self.warnings),
        }


# -- depth scan -----------------------------------------------------------------

_NORMAL, _SINGLE, _DOUBLE, _LINE_COMMENT, _BLOCK_COMMENT = range(5)


def depth_scan(sql: str) -> tuple[list[DepthSpan], list[str]]:
    """Tile ``sql`` with nesting depths in one left-to-right pass.

    Depth increments after ``(`` and decrements after ``)``, so an opening
    parenthesis sits at its outer depth and a closing one at its inner depth.
    Parentheses inside quoted regions or comments are ignored; an unbalanced
    ``)`` clamps at zero and records a warning.
    """
    depths: list[int] = []
    warnings: list[str] = []
    depth = 0
    state = _NORMAL
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        depths.append(depth)
        if state == _NORMAL:
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    warnings.append(f"unbalanced ')' at position {i}")
                else:
                    depth -= 1
            elif ch == "'":
                state = _SINGLE
            elif ch == '"':
                state = _DOUBLE
            elif ch == "-" and sql[i : i + 2] == "--":
                state = _LINE_COMMENT
            elif ch == "/" and sql[i : i + 2] == "/*":
                depths.append(depth)  # consume the '*' so "/*/" cannot self-close
                i += 1
                state = _BLOCK_COMMENT
        elif state == _SINGLE:
            if ch == "'":
                if sql[i + 1 : i + 2] == "'":  # doubled quote stays inside the literal
                    depths.append(depth)
                    i += 1
                else:
                    state = _NORMAL
        elif state == _DOUBLE:
            if ch == '"':
                if sql[i + 1 : i + 2] == '"':
                    depths.append(depth)
                    i += 1
                else:
                    state = _NORMAL
        elif state == _LINE_COMMENT:
            if ch == "\n":
                state = _NORMAL
        elif state == _BLOCK_COMMENT:
            if ch == "*" and sql[i : i + 2] == "*/":
                depths.append(depth)
                i += 1
                state = _NORMAL
        i += 1
    if state == _SINGLE or state == _DOUBLE:
        warnings.append("unterminated quoted region")
    spans = []
    start = 0
    for pos in range(1, len(depths)):
        if depths[pos] != depths[start]:
            spans.append(DepthSpan(start, pos, depths[start]))
            start = pos
    if depths:
        spans.append(DepthSpan(start, len(depths), depths[start]))
    return spans, warnings


# -- normalization with an index map ---------------------------------------------

def _normalize(sql: str) -> tuple[str, list[int]]:
    """Whitespace-collapsed, case-folded (outside quotes) text plus an index map.

    ``map[i]`` is the original position of normalized character ``i``. The
    trailing statement terminator and surrounding whitespace are stripped.
    """
    out: list[str] = []
    idx: list[int] = []
    quoted: list[bool] = []
    state = _NORMAL
    pending_space_at = -1
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        if state == _NORMAL:
            if ch.isspace():
                if pending_space_at < 0:
                    pending_space_at = i
                i += 1
                continue
            if pending_space_at >= 0 and out:
                out.append(" ")
                idx.append(pending_space_at)
                quoted.append(False)
            pending_space_at = -1
            if ch == "'":
                state = _SINGLE
            elif ch == '"':
                state = _DOUBLE
            out.append(ch if state != _NORMAL else ch.lower())
            idx.append(i)
            quoted.append(state != _NORMAL)
        elif state == _SINGLE or state == _DOUBLE:
            quote = "'" if state == _SINGLE else '"'
            out.append(ch)
            idx.append(i)
            quoted.append(True)
            if ch == quote:
                if sql[i + 1 : i + 2] == quote:
                    out.append(sql[i + 1])
                    idx.append(i + 1)
                    quoted.append(True)
                    i += 1
                else:
                    state = _NORMAL
        i += 1
    # Strip trailing separators and spaces emitted outside quoted regions.
    while out and not quoted[-1] and out[-1] in (" ", ";"):
        out.pop()
        idx.pop()
        quoted.pop()
    return "".join(out), idx


# -- step attribution -------------------------------------------------------------

def attribute_steps(final_sql: str, plan: Plan) -> tuple[list[StepSpan], list[tuple[int, int]]]:
    """Claim character ranges of ``final_sql`` for the steps that produced them.

    Steps claim in descending ordinal order so outer shells claim before the
    sub-queries nested inside them; an earlier step matching inside an outer
    claim splits it. Each step claims at most its first compatible occurrence.
    """
    norm_final, index_map = _normalize(final_sql)
    claims: list[tuple[int, int, str]] = []  # (start, end) over normalized text
    for step in sorted(plan.steps, key=lambda s: s.ordinal, reverse=True):
        norm_step, _ = _normalize(step.sql)
        if not norm_step:
            continue
        pos = 0
        while True:
            pos = norm_final.find(norm_step, pos)
            if pos == -1:
                break
            candidate = (pos, pos + len(norm_step))
            if _compatible(candidate, claims):
                claims.append((candidate[0], candidate[1], step.id))
                break
            pos += 1

    segments = _innermost_segments(claims)
    step_spans = [
        StepSpan(index_map[s], index_map[e - 1] + 1, step_id) for s, e, step_id in segments
    ]
    step_spans.sort(key=lambda s: s.char_start)
    gaps = _complement(step_spans, len(final_sql))
    return step_spans, gaps


def _compatible(candidate: tuple[int, int], claims: list[tuple[int, int, str]]) -> bool:
    """A new claim must be disjoint from or strictly nested with every prior claim."""
    c_start, c_end = candidate
    for start, end, _sid in claims:
        if c_end <= start or end <= c_start:
            continue  # disjoint
        if c_start == start and c_end == end:
            return False  # already claimed exactly
        if (start <= c_start and c_end <= end) or (c_start <= start and end <= c_end):
            continue  # nested
        return False  # partial overlap
    return True


def _innermost_segments(claims: list[tuple[int, int, str]]) -> list[tuple[int, int, str]]:
    """Flatten a laminar claim family: each position goes to its innermost claim."""
    if not claims:
        return []
    boundaries = sorted({p for s, e, _ in claims for p in (s, e)})
    segments: list[tuple[int, int, str]] = []
    for lo, hi in zip(boundaries, boundaries[1:]):
        covering = [c for c in claims if c[0] <= lo and hi <= c[1]]
        if not covering:
            continue
        innermost = min(covering, key=lambda c: c[1] - c[0])
        if segments and segments[-1][2] == innermost[2] and segments[-1][1] == lo:
            segments[-1] = (segments[-1][0], hi, innermost[2])
        else:
            segments.append((lo, hi, innermost[2]))
    return segments


def _complement(spans: list[StepSpan], length: int) -> list[tuple[int, int]]:
    gaps = []
    cursor = 0
    for span in spans:
        if span.char_start > cursor:
            gaps.append((cursor, span.char_start))
        cursor = max(cursor, span.char_end)
    if cursor < length:
        gaps.append((cursor, length))
    return gaps


def annotate(final_sql: str, plan: Plan) -> AnnotatedSql:
    """Combine the depth scan and step attribution into one annotated value."""
    depth_spans, warnings = depth_scan(final_sql)
    step_spans, gaps = attribute_steps(final_sql, plan)
    return AnnotatedSql(
        sql=final_sql,
        depth_spans=tuple(depth_spans),
        step_spans=tuple(step_spans),
        unattributed=tuple(gaps),
        warnings=tuple(warnings),
    )


def annotated_from_dict(doc: dict) -> AnnotatedSql:
    return AnnotatedSql(
        sql=doc["sql"],
        depth_spans=tuple(DepthSpan(s["start"], s["end"], s["depth"]) for s in doc["depth_spans"]),
        step_spans=tuple(StepSpan(s["start"], s["end"], s["step_id"]) for s in doc["step_spans"]),
        unattributed=tuple((s, e) for s, e in doc["unattributed"]),
        warnings=tuple(doc.get("warnings", [])),
    )
