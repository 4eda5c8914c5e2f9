"""Capture serialized API responses for the browser UI's test fixtures.

Walks the scripted scenario against the bundled sample database and saves
each response envelope under frontend/test/fixtures/. Regenerate after any
change to the session document shape:

    python3 scripts/export_ui_fixtures.py
"""

from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import scenario  # noqa: E402

from clearquery.http_api import ServiceConfig, create_app  # noqa: E402
from clearquery.sample_db import create_sample_database  # noqa: E402
from clearquery.session_engine import SessionEngine  # noqa: E402

FIXTURE_DIR = ROOT / "frontend" / "test" / "fixtures"


def main() -> int:
    db = ROOT / "fixtures" / "schools.sqlite"
    if not db.is_file():
        create_sample_database(db)
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)

    ticks = itertools.count()
    ids = itertools.count(1)
    engine = SessionEngine(
        scenario.build_script(db),
        clock=lambda: 1755000000.0 + next(ticks),
        id_factory=lambda: f"fixture{next(ids)}",
    )
    config = ServiceConfig(db_path=str(db))
    app = create_app(config, engine=engine)

    saved = {}

    def save(name: str, body: dict) -> None:
        saved[name] = body
        path = FIXTURE_DIR / f"{name}.json"
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {path.relative_to(ROOT)}")

    with TestClient(app) as client:
        # Correction round trip on its own session, so the main walk's
        # transcript digests stay untouched.
        body = client.post("/sessions", json={"tables": scenario.TABLES}).json()
        sid = body["session"]["id"]
        client.post(f"/sessions/{sid}/question", json={"question": scenario.QUESTION})
        body = client.post(
            f"/sessions/{sid}/mappings/m1",
            json={"fields": [{"table": "satscores", "column": "AvgScrMath"}]},
        ).json()
        save("session_corrected", body)

        # Main walk.
        body = client.post("/sessions", json={"tables": scenario.TABLES}).json()
        sid = body["session"]["id"]
        save("session_created", body)

        body = client.post(
            f"/sessions/{sid}/question", json={"question": scenario.QUESTION}
        ).json()
        save("session_intent_review", body)

        body = client.post(f"/sessions/{sid}/confirm").json()
        save("session_plan_review", body)

        save("schema_panel", client.get(f"/sessions/{sid}/schema").json())

        for step_id in ("s1", "s2", "s3", "s4", "s5"):
            body = client.post(f"/sessions/{sid}/steps/{step_id}/execute").json()
        save("session_executed", body)

        save("tree", client.get(f"/sessions/{sid}/tree").json())

        body = client.post(f"/sessions/{sid}/finalize").json()
        save("session_finalized", body)

        client.post(f"/sessions/{sid}/reopen")
        body = client.post(
            f"/sessions/{sid}/steps/s4/edit",
            json={"explanation": scenario.EDITED_S4_EXPLANATION},
        ).json()
        save("session_edited", body)

        body = client.post(f"/sessions/{sid}/steps/s4/regenerate").json()
        save("session_regenerated", body)

    return 0


if __name__ == "__main__":
    raise SystemExit(main())
