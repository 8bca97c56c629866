"""CSV / JSON emitters.

CSV schema, one row per round, header always written::

    round,f,grad_l1,mixed_norm,n_high_snr,vote_disagreement,bits

Floats are written with ``repr`` so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from ..telemetry import RoundRecord

COLUMNS = RoundRecord.columns()


def emit_csv(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, c) for c in COLUMNS)])
    return path


def read_csv(path) -> list[RoundRecord]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    types = {c: (float if c in ("f", "grad_l1", "mixed_norm") else int) for c in COLUMNS}
    return [RoundRecord(**{c: types[c](row[c]) for c in COLUMNS}) for row in rows]


def emit_json(records, path, summary: dict | None = None) -> Path:
    path = Path(path)
    doc = {"columns": COLUMNS, "records": [r.as_dict() for r in records]}
    if summary is not None:
        doc["summary"] = summary
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")
    return path


def read_json(path) -> tuple[list[RoundRecord], dict | None]:
    doc = json.loads(Path(path).read_text())
    return [RoundRecord(**r) for r in doc["records"]], doc.get("summary")
