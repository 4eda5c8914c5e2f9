"""Deterministic sample database for demos and tests.

Three tables shaped after a public-education dataset: ``schools`` (one row
per school), ``frpm`` (meal-program counts, foreign key to schools), and
``satscores`` (average scores, foreign key to schools). Regenerate with::

    python -m clearquery.sample_db fixtures/schools.sqlite
"""

from __future__ import annotations

import sqlite3
import sys
from pathlib import Path

_SCHEMA = """
CREATE TABLE schools (
    CDSCode TEXT PRIMARY KEY,
    School TEXT NOT NULL,
    District TEXT,
    County TEXT,
    City TEXT,
    Charter INTEGER
);
CREATE TABLE frpm (
    id INTEGER PRIMARY KEY,
    CDSCode TEXT NOT NULL,
    SchoolType TEXT,
    Enrollment REAL,
    FreeMealCount REAL,
    FOREIGN KEY (CDSCode) REFERENCES schools(CDSCode)
);
CREATE TABLE satscores (
    cds TEXT PRIMARY KEY,
    sname TEXT,
    NumTstTakr INTEGER,
    AvgScrRead INTEGER,
    AvgScrMath INTEGER,
    AvgScrWrite INTEGER,
    FOREIGN KEY (cds) REFERENCES schools(CDSCode)
);
"""

_SCHOOLS = [
    ("01100170109835", "Alameda Science Academy", "Alameda Unified", "Alameda", "Alameda", 1),
    ("01100170112607", "Bayfront Charter High", "Alameda Unified", "Alameda", "Oakland", 1),
    ("01611190130229", "Cedar Grove High", "Berkeley Unified", "Alameda", "Berkeley", 0),
    ("19642121284712", "Downtown Magnet School", "Los Angeles Unified", "Los Angeles", "Los Angeles", 0),
    ("19647331932340", "Eastside Polytechnic", "Los Angeles Unified", "Los Angeles", "Los Angeles", 0),
    ("19650941935121", "Foothill Preparatory", "Pasadena Unified", "Los Angeles", "Pasadena", 1),
    ("37680023731239", "Gaslamp Academy", "San Diego Unified", "San Diego", "San Diego", 0),
    ("37682961937483", "Harborview High", "San Diego Unified", "San Diego", "San Diego", 0),
    ("38684783830437", "Inner Sunset High", "San Francisco Unified", "San Francisco", "San Francisco", 0),
    ("38684786040687", "Junction Charter School", "San Francisco Unified", "San Francisco", "San Francisco", 1),
    ("43693936047541", "Knollwood Senior High", "San Jose Unified", "Santa Clara", "San Jose", 0),
    ("43696664332904", "Live Oak Academy", "San Jose Unified", "Santa Clara", "San Jose", 1),
]

_FRPM = [
    (1, "01100170109835", "High Schools (Public)", 412.0, 98.0),
    (2, "01100170112607", "High Schools (Public)", 655.0, 240.0),
    (3, "01611190130229", "High Schools (Public)", 1320.0, 310.0),
    (4, "19642121284712", "High Schools (Public)", 980.0, 640.0),
    (5, "19647331932340", "High Schools (Public)", 1511.0, 890.0),
    (6, "19650941935121", "High Schools (Public)", 720.0, 160.0),
    (7, "37680023731239", "High Schools (Public)", 860.0, 395.0),
    (8, "37682961937483", "High Schools (Public)", 1104.0, 470.0),
    (9, "38684783830437", "High Schools (Public)", 1430.0, 520.0),
    (10, "38684786040687", "High Schools (Public)", 390.0, 75.0),
    (11, "43693936047541", "High Schools (Public)", 1688.0, 430.0),
    (12, "43696664332904", "High Schools (Public)", 540.0, 120.0),
]

_SATSCORES = [
    ("01100170109835", "Alameda Science Academy", 98, 512, 538, 509),
    ("01100170112607", "Bayfront Charter High", 154, 487, 499, 481),
    ("01611190130229", "Cedar Grove High", 310, 544, 561, 540),
    ("19642121284712", "Downtown Magnet School", 243, 468, 474, 463),
    ("19647331932340", "Eastside Polytechnic", 388, 452, 466, 449),
    ("19650941935121", "Foothill Preparatory", 165, 559, 583, 556),
    ("37680023731239", "Gaslamp Academy", 201, 498, 507, 492),
    ("37682961937483", "Harborview High", 275, 521, 533, 518),
    ("38684783830437", "Inner Sunset High", 347, 536, 571, 531),
    ("38684786040687", "Junction Charter School", 88, 505, 512, None),
    ("43693936047541", "Knollwood Senior High", 412, 528, 549, 524),
    ("43696664332904", "Live Oak Academy", 119, 547, 562, 543),
]


def create_sample_database(path: str | Path) -> Path:
    """Write the sample database to ``path``, replacing any existing file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    conn = sqlite3.connect(path)
    try:
        conn.executescript(_SCHEMA)
        conn.executemany("INSERT INTO schools VALUES (?,?,?,?,?,?)", _SCHOOLS)
        conn.executemany("INSERT INTO frpm VALUES (?,?,?,?,?)", _FRPM)
        conn.executemany("INSERT INTO satscores VALUES (?,?,?,?,?,?)", _SATSCORES)
        conn.commit()
    finally:
        conn.close()
    return path


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    target = args[0] if args else "fixtures/schools.sqlite"
    out = create_sample_database(target)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
