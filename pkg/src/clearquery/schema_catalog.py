"""SQLite schema extraction and the focused-subset machinery.

A :class:`SchemaSnapshot` is an immutable picture of one database file:
tables, columns, keys, declared relationships, and a few sample values per
column. A :class:`SchemaSubset` narrows a snapshot to the tables (and
optionally columns) a querying task actually needs; it is what gets rendered
into model prompts.

Lookups are case-insensitive, display is case-preserving.
"""

from __future__ import annotations

import sqlite3
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .errors import (
    EmptySelectionError,
    IntrospectionError,
    NotADatabaseError,
    UnknownFieldError,
    UnknownTableError,
)

#: Distinct non-null sample values collected per column.
DEFAULT_SAMPLE_LIMIT = 3

#: Rows scanned (at most) when collecting sample values; keeps introspection
#: bounded on large tables.
SAMPLE_SCAN_CAP = 1000

#: Sample values longer than this are truncated for display.
SAMPLE_DISPLAY_CAP = 80


@dataclass(frozen=True)
class ForeignKeyRef:
    local_column: str
    target_table: str
    target_column: str

    def __post_init__(self):
        if not (self.local_column and self.target_table and self.target_column):
            raise IntrospectionError("foreign key reference with empty identifier")


@dataclass(frozen=True)
class ColumnDef:
    name: str
    declared_type: str
    is_primary_key: bool = False
    is_nullable: bool = True
    sample_values: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise IntrospectionError("column with empty name")


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]
    foreign_keys: tuple[ForeignKeyRef, ...] = ()

    def __post_init__(self):
        names = [c.name.casefold() for c in self.columns]
        if len(names) != len(set(names)):
            raise IntrospectionError(f"duplicate column names in table {self.name!r}")
        for fk in self.foreign_keys:
            if fk.local_column.casefold() not in names:
                raise IntrospectionError(
                    f"foreign key on {self.name}.{fk.local_column} references a missing local column"
                )

    def column(self, name: str) -> ColumnDef | None:
        wanted = name.casefold()
        for col in self.columns:
            if col.name.casefold() == wanted:
                return col
        return None

    @property
    def primary_key_columns(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.is_primary_key)


@dataclass(frozen=True)
class SchemaSnapshot:
    database_label: str
    tables: tuple[TableDef, ...]
    captured_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def __post_init__(self):
        names = [t.name.casefold() for t in self.tables]
        if len(names) != len(set(names)):
            raise IntrospectionError("duplicate table names in snapshot")
        for table in self.tables:
            for fk in table.foreign_keys:
                if fk.target_table.casefold() not in names:
                    raise IntrospectionError(
                        f"foreign key {table.name}.{fk.local_column} targets "
                        f"unknown table {fk.target_table!r}"
                    )

    def table(self, name: str) -> TableDef | None:
        wanted = name.casefold()
        for t in self.tables:
            if t.name.casefold() == wanted:
                return t
        return None

    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]


@dataclass(frozen=True)
class SchemaSubset:
    """A validated (table, retained columns) selection over a snapshot.

    The constructor checks every name against the source snapshot, so an
    invalid subset cannot be built through public operations.
    """

    source: SchemaSnapshot
    tables: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        seen_tables: set[str] = set()
        resolved = []
        for table_name, columns in self.tables:
            table = self.source.table(table_name)
            if table is None:
                raise UnknownTableError(table_name)
            key = table.name.casefold()
            if key in seen_tables:
                raise IntrospectionError(f"table {table.name!r} listed twice in subset")
            seen_tables.add(key)
            seen_cols: set[str] = set()
            kept = []
            for col_name in columns:
                col = table.column(col_name)
                if col is None:
                    raise UnknownFieldError(table.name, col_name)
                if col.name.casefold() in seen_cols:
                    raise IntrospectionError(
                        f"column {col.name!r} listed twice for table {table.name!r}"
                    )
                seen_cols.add(col.name.casefold())
                kept.append(col.name)
            resolved.append((table.name, tuple(kept)))
        # Normalize to display-case names from the catalog.
        object.__setattr__(self, "tables", tuple(resolved))

    def table_names(self) -> list[str]:
        return [name for name, _ in self.tables]

    def columns_for(self, table_name: str) -> tuple[str, ...] | None:
        wanted = table_name.casefold()
        for name, cols in self.tables:
            if name.casefold() == wanted:
                return cols
        return None

    def has_field(self, table_name: str, column_name: str) -> bool:
        cols = self.columns_for(table_name)
        if cols is None:
            return False
        return column_name.casefold() in {c.casefold() for c in cols}


def introspect_database(
    db_path: str | Path,
    sample_limit: int = DEFAULT_SAMPLE_LIMIT,
    clock: Callable[[], float] = time.time,
) -> SchemaSnapshot:
    """Extract tables, columns, keys and sample values from a SQLite file.

    Internal ``sqlite_*`` tables are excluded. Foreign keys whose target table
    does not exist in the file are dropped so the snapshot invariant (no
    dangling targets) always holds.

    Raises FileNotFoundError, NotADatabaseError, or IntrospectionError.
    """
    path = Path(db_path)
    if not path.is_file():
        raise FileNotFoundError(f"database file not found: {path}")
    conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
    try:
        try:
            rows = conn.execute(
                "SELECT name FROM sqlite_master WHERE type='table' "
                "AND name NOT LIKE 'sqlite_%' ORDER BY name"
            ).fetchall()
        except sqlite3.DatabaseError as exc:
            raise NotADatabaseError(f"{path} is not a readable SQLite database: {exc}") from exc
        table_names = [r[0] for r in rows]
        known = {n.casefold() for n in table_names}
        tables = []
        for name in table_names:
            try:
                col_rows = conn.execute(f'PRAGMA table_info({_quote_ident(name)})').fetchall()
                fk_rows = conn.execute(f'PRAGMA foreign_key_list({_quote_ident(name)})').fetchall()
            except sqlite3.DatabaseError as exc:
                raise IntrospectionError(f"catalog query failed for table {name!r}: {exc}") from exc
            columns = tuple(
                ColumnDef(
                    name=col_name,
                    declared_type=declared or "",
                    is_primary_key=bool(pk),
                    is_nullable=not notnull and not pk,
                    sample_values=_sample_values(conn, name, col_name, sample_limit),
                )
                for _cid, col_name, declared, notnull, _default, pk in col_rows
            )
            foreign_keys = []
            for _id, _seq, target, local_col, target_col, *_rest in fk_rows:
                if target.casefold() not in known:
                    continue  # dangling target: drop the ref, keep the snapshot valid
                if target_col is None:
                    # References the target's implicit primary key.
                    target_col = _implicit_pk(conn, target)
                foreign_keys.append(ForeignKeyRef(local_col, target, target_col))
            tables.append(TableDef(name=name, columns=columns, foreign_keys=tuple(foreign_keys)))
        captured = datetime.fromtimestamp(clock(), tz=timezone.utc).isoformat()
        return SchemaSnapshot(
            database_label=path.name, tables=tuple(tables), captured_at=captured
        )
    finally:
        conn.close()


def _quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _sample_values(conn: sqlite3.Connection, table: str, column: str, limit: int) -> tuple[str, ...]:
    if limit <= 0:
        return ()
    q = (
        f"SELECT DISTINCT v FROM (SELECT {_quote_ident(column)} AS v "
        f"FROM {_quote_ident(table)} WHERE {_quote_ident(column)} IS NOT NULL "
        f"LIMIT {SAMPLE_SCAN_CAP}) LIMIT {int(limit)}"
    )
    try:
        rows = conn.execute(q).fetchall()
    except sqlite3.DatabaseError as exc:
        raise IntrospectionError(f"sampling {table}.{column} failed: {exc}") from exc
    out = []
    for (value,) in rows:
        text = str(value)
        if len(text) > SAMPLE_DISPLAY_CAP:
            text = text[:SAMPLE_DISPLAY_CAP] + "..."
        out.append(text)
    return tuple(out)


def _implicit_pk(conn: sqlite3.Connection, table: str) -> str:
    for _cid, col_name, _type, _notnull, _default, pk in conn.execute(
        f"PRAGMA table_info({_quote_ident(table)})"
    ):
        if pk:
            return col_name
    return "rowid"


def select_tables(snapshot: SchemaSnapshot, names: list[str]) -> SchemaSubset:
    """Build a subset holding the named tables with all their columns, in request order."""
    if not names:
        raise EmptySelectionError("at least one table must be selected")
    entries = []
    for name in names:
        table = snapshot.table(name)
        if table is None:
            raise UnknownTableError(name)
        entries.append((table.name, tuple(c.name for c in table.columns)))
    return SchemaSubset(source=snapshot, tables=tuple(entries))


def filter_keyword(snapshot: SchemaSnapshot, keyword: str) -> list[tuple[str, list[str]]]:
    """Case-insensitive substring filter over table and column names.

    A table whose own name matches keeps all its columns; otherwise only the
    matching columns are listed. The empty keyword returns everything.
    """
    needle = keyword.casefold()
    result: list[tuple[str, list[str]]] = []
    for table in snapshot.tables:
        if needle in table.name.casefold():
            result.append((table.name, [c.name for c in table.columns]))
            continue
        matching = [c.name for c in table.columns if needle in c.name.casefold()]
        if matching:
            result.append((table.name, matching))
    return result


def render_schema_prompt(subset: SchemaSubset) -> str:
    """Deterministic compact rendering of a subset for model prompts.

    One line per table: ``name(col TYPE PK -> target.col, ...)`` followed by
    a ``-- samples:`` suffix when any retained column has sample values.
    """
    lines = []
    for table_name, columns in subset.tables:
        table = subset.source.table(table_name)
        assert table is not None  # subset construction guarantees it
        fk_by_local = {fk.local_column.casefold(): fk for fk in table.foreign_keys}
        parts = []
        samples = []
        for col_name in columns:
            col = table.column(col_name)
            assert col is not None
            piece = col.name
            if col.declared_type:
                piece += f" {col.declared_type}"
            if col.is_primary_key:
                piece += " PK"
            fk = fk_by_local.get(col.name.casefold())
            if fk is not None:
                piece += f" -> {fk.target_table}.{fk.target_column}"
            parts.append(piece)
            if col.sample_values:
                samples.append(f"{col.name}={'|'.join(col.sample_values)}")
        line = f"{table.name}({', '.join(parts)})"
        if samples:
            line += f" -- samples: {'; '.join(samples)}"
        lines.append(line)
    return "\n".join(lines)


@dataclass(frozen=True)
class RelationshipEdge:
    source_table: str
    target_table: str
    local_column: str
    target_column: str


def relationship_edges(snapshot: SchemaSnapshot) -> list[RelationshipEdge]:
    """One edge per declared foreign key, in table order then key order."""
    edges = []
    for table in snapshot.tables:
        for fk in table.foreign_keys:
            edges.append(
                RelationshipEdge(
                    source_table=table.name,
                    target_table=fk.target_table,
                    local_column=fk.local_column,
                    target_column=fk.target_column,
                )
            )
    return edges


# -- serialization ------------------------------------------------------------

def snapshot_to_dict(snapshot: SchemaSnapshot) -> dict:
    return {
        "database_label": snapshot.database_label,
        "captured_at": snapshot.captured_at,
        "tables": [
            {
                "name": t.name,
                "columns": [
                    {
                        "name": c.name,
                        "declared_type": c.declared_type,
                        "is_primary_key": c.is_primary_key,
                        "is_nullable": c.is_nullable,
                        "sample_values": list(c.sample_values),
                    }
                    for c in t.columns
                ],
                "foreign_keys": [
                    {
                        "local_column": fk.local_column,
                        "target_table": fk.target_table,
                        "target_column": fk.target_column,
                    }
                    for fk in t.foreign_keys
                ],
            }
            for t in snapshot.tables
        ],
    }


def snapshot_from_dict(doc: dict) -> SchemaSnapshot:
    return SchemaSnapshot(
        database_label=doc["database_label"],
        captured_at=doc["captured_at"],
        tables=tuple(
            TableDef(
                name=t["name"],
                columns=tuple(
                    ColumnDef(
                        name=c["name"],
                        declared_type=c["declared_type"],
                        is_primary_key=c["is_primary_key"],
                        is_nullable=c["is_nullable"],
                        sample_values=tuple(c["sample_values"]),
                    )
                    for c in t["columns"]
                ),
                foreign_keys=tuple(
                    ForeignKeyRef(fk["local_column"], fk["target_table"], fk["target_column"])
                    for fk in t["foreign_keys"]
                ),
            )
            for t in doc["tables"]
        ),
    )


def subset_to_list(subset: SchemaSubset) -> list:
    return [[name, list(cols)] for name, cols in subset.tables]


def subset_from_list(snapshot: SchemaSnapshot, doc: list) -> SchemaSubset:
    return SchemaSubset(source=snapshot, tables=tuple((name, tuple(cols)) for name, cols in doc))
