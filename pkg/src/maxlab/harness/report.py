"""Structured experiment reports.

A report holds per-case rows (plain dicts of scalars) and a list of bands,
each the pass/fail verdict of one asserted inequality.  ``report.csv`` is
written with fixed float formatting and in row order, so identical inputs
give byte-identical files; wall-clock data only goes into ``report.json``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

FLOAT_FMT = "{:.10g}"


def fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FMT.format(v)
    if isinstance(v, (list, tuple)):
        return "(" + " ".join(fmt(x) for x in v) + ")"
    if v is None:
        return ""
    if hasattr(v, "item"):
        return fmt(v.item())
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class Band:
    """One asserted inequality: ``lo <= value <= hi``.

    ``anchor`` names the invariant being instantiated.
    """

    name: str
    anchor: str
    value: float
    lo: float = -math.inf
    hi: float = math.inf
    note: str = ""

    @property
    def passed(self) -> bool:
        v = self.value
        return bool(isinstance(v, (int, float)) and not math.isnan(v) and self.lo <= v <= self.hi)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: {fmt(float(self.value))} in "
                f"[{fmt(float(self.lo))}, {fmt(float(self.hi))}]"
                + (f"  ({self.note})" if self.note else ""))


@dataclass
class ExperimentReport:
    name: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    bands: List[Band] = field(default_factory=list)
    runtime: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    def add_table_row(self, table: str, **values) -> None:
        """Append a row to the auxiliary table ``table`` (written as ``<table>.csv``)."""
        self.tables.setdefault(table, []).append(dict(values))

    def add_row(self, anchor: str, **values) -> None:
        row = {"anchor": anchor}
        row.update(values)
        self.rows.append(row)

    def add_band(self, name: str, anchor: str, value: float, lo: float = -math.inf,
                 hi: float = math.inf, note: str = "", replay: Optional[dict] = None) -> Band:
        b = Band(name, anchor, float(value), float(lo), float(hi), note)
        self.bands.append(b)
        if not b.passed and replay is not None:
            self.failures.append({"band": name, "anchor": anchor, **replay})
        return b

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.bands)

    def columns(self, rows: Optional[List[Dict[str, Any]]] = None) -> List[str]:
        cols: List[str] = []
        for r in (self.rows if rows is None else rows):
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols

    def write_csv(self, path, rows: Optional[List[Dict[str, Any]]] = None) -> Path:
        path = Path(path)
        rows = self.rows if rows is None else rows
        cols = self.columns(rows)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([fmt(r.get(c)) for c in cols])
        return path

    def write_bands_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["band", "anchor", "value", "lo", "hi", "passed", "note"])
            for b in self.bands:
                w.writerow([b.name, b.anchor, fmt(b.value), fmt(b.lo), fmt(b.hi),
                            fmt(b.passed), b.note])
        return path

    def to_dict(self) -> dict:
        return _jsonable({
            "experiment": self.name,
            "passed": self.passed,
            "runtime_seconds": self.runtime,
            "bands": [dict(asdict(b), passed=b.passed) for b in self.bands],
            "meta": self.meta,
            "rows": self.rows,
            "failures": self.failures,
            "artifacts": self.artifacts,
        })

    def write(self, out_dir, config: Optional[dict] = None) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.write_csv(out / "report.csv")
        self.write_bands_csv(out / "bands.csv")
        for name, rows in self.tables.items():
            self.write_csv(out / f"{name}.csv", rows)
        for i, fail in enumerate(self.failures):
            rec = {"experiment": self.name, "config": config or {}, **fail}
            (out / f"failure_{i:03d}.json").write_text(
                json.dumps(_jsonable(rec), indent=2, sort_keys=True))
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2))
        return out

    def summary(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'} "
                 f"({len(self.bands)} bands, {self.runtime:.1f} s)"]
        lines += ["  " + b.line() for b in self.bands]
        return "\n".join(lines)
