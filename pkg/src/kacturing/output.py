"""Deterministic CSV / JSON writers.

CSV files keep their column header in row 1; the metadata block for a CSV
file goes to a ``<name>.csv.meta.json`` sidecar. JSON files embed the same
block under ``"meta"``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__

SCHEMA_VERSION = 1


def meta_block(subcommand: str, config_hash: str, seed: int | None) -> dict:
    return {
        "tool": "kacturing",
        "tool_version": __version__,
        "subcommand": subcommand,
        "config_hash": config_hash,
        "seed": seed,
        "schema_version": SCHEMA_VERSION,
    }


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    write_json(path.with_name(path.name + ".meta.json"), {}, meta)
    return path


def write_json(path: Path, payload: dict, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION, "meta": meta, **payload}
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
