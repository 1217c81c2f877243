"""Experiment reports with matching CSV and JSON serializations.

Floats are rounded to 6 significant digits when a row is added, so the CSV
text and the JSON document carry the same values. CSV cells are typed on
the way back in: empty means ``None``, ``true``/``false`` are booleans,
integers have no decimal point and floats always carry one (or an exponent,
``inf`` or ``nan``).
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

SIG_DIGITS = 6
_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$|^[+-]?(inf|nan)$")


def round_sig(x: float) -> float:
    if not math.isfinite(x) or x == 0.0:
        return float(x)
    return float(f"{x:.{SIG_DIGITS}g}")


def _clean(value):
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int) or (hasattr(value, "dtype") and value.dtype.kind in "iu"):
        return int(value)
    if isinstance(value, float) or (hasattr(value, "dtype") and value.dtype.kind == "f"):
        return round_sig(float(value))
    if hasattr(value, "dtype") and value.dtype.kind == "b":
        return bool(value)
    raise TypeError(f"unsupported report value {value!r}")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        text = f"{value:.{SIG_DIGITS}g}"
        if _INT.match(text):
            text += ".0"
        return text
    return str(value)


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if _INT.match(text):
        return int(text)
    if _FLOAT.match(text):
        return float(text)
    return text


@dataclass
class ExperimentReport:
    experiment: str
    seed: int | None
    config: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.config = {key: _clean_config(v) for key, v in self.config.items()}
        rows, self.rows = self.rows, []
        for row in rows:
            self.add(**row)

    def add(self, **row) -> None:
        self.rows.append({key: _clean(v) for key, v in row.items()})

    def columns(self) -> list:
        cols = {}
        for row in self.rows:
            for key in row:
                cols.setdefault(key, None)
        return list(cols)

    def select(self, **match) -> list:
        return [r for r in self.rows if all(r.get(key) == v for key, v in match.items())]

    # -- serialization ---------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        writer.writerow(cols)
        for row in self.rows:
            writer.writerow([_format_cell(row.get(col)) for col in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"experiment": self.experiment, "seed": self.seed, "config": self.config,
               "rows": [{col: row.get(col) for col in self.columns()} for row in self.rows]}
        return json.dumps(doc, indent=2) + "\n"

    def write(self, path, as_json: bool = False) -> None:
        Path(path).write_text(self.to_json() if as_json else self.to_csv(), encoding="utf-8")

    @staticmethod
    def rows_from_csv(text: str) -> list:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, [])
        return [dict(zip(header, (_parse_cell(c) for c in line))) for line in reader]

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        doc = json.loads(text)
        rep = cls(doc["experiment"], doc["seed"], doc["config"])
        rep.rows = doc["rows"]
        return rep

    def padded_rows(self) -> list:
        """Rows with every column present (absent cells as ``None``)."""
        cols = self.columns()
        return [{col: row.get(col) for col in cols} for row in self.rows]


def _clean_config(value):
    if isinstance(value, (list, tuple)):
        return [_clean_config(v) for v in value]
    return _clean(value)
