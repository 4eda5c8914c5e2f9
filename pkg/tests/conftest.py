from __future__ import annotations

from pathlib import Path

import pytest

from clearquery.errors import NoScriptEntryError
from clearquery.llm_gateway import request_digest
from clearquery.sample_db import create_sample_database
from clearquery.schema_catalog import introspect_database, select_tables

FIXTURE_DB = Path(__file__).resolve().parent.parent / "fixtures" / "schools.sqlite"


@pytest.fixture(scope="session")
def schools_db() -> Path:
    if not FIXTURE_DB.is_file():
        create_sample_database(FIXTURE_DB)
    return FIXTURE_DB


@pytest.fixture(scope="session")
def snapshot(schools_db):
    return introspect_database(schools_db)


@pytest.fixture(scope="session")
def subset_all(snapshot):
    return select_tables(snapshot, snapshot.table_names())


@pytest.fixture(scope="session")
def subset_satscores(snapshot):
    return select_tables(snapshot, ["satscores"])


class FnProvider:
    """Queue-backed provider test double with the standard call log."""

    label = "fn"

    def __init__(self, responses: list[str] | None = None):
        self.queue: list[str] = list(responses or [])
        self.calls: list[tuple[str, str]] = []

    def push(self, text: str) -> "FnProvider":
        self.queue.append(text)
        return self

    def fetch(self, request) -> str:
        digest = request_digest(request)
        self.calls.append((request.purpose_tag, digest))
        if not self.queue:
            raise NoScriptEntryError(digest, request.purpose_tag)
        return self.queue.pop(0)


@pytest.fixture()
def fn_provider():
    return FnProvider()
