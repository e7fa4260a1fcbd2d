"""Check rows, reports, and their CSV / JSON writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("check", "reference", "inputs", "value", "bound", "slack", "relation", "passed")


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else repr(v)


@dataclass
class Row:
    """One check: ``value <= bound`` (relation ``"le"``) or ``value >= bound`` (``"ge"``).

    ``relation="info"`` rows carry a number without a test and always pass.
    """

    check: str
    reference: str
    inputs: dict
    value: float
    bound: float | None = None
    relation: str = "le"
    slack: float | None = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.value = float(self.value)
        if self.relation == "info" or self.bound is None:
            self.relation, self.slack, self.passed = "info", None, True
            return
        self.bound = float(self.bound)
        self.slack = self.bound - self.value if self.relation == "le" else self.value - self.bound
        self.passed = bool(self.slack >= 0)


@dataclass
class Report:
    experiment: str
    seed: int
    rows: list[Row] = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def add(self, *args, **kw) -> Row:
        row = Row(*args, **kw)
        self.rows.append(row)
        return row

    def write(self, out_dir: str | Path, config: dict | None = None) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(COLUMNS)
            for r in self.rows:
                wr.writerow([
                    r.check, r.reference, json.dumps(r.inputs, sort_keys=True),
                    repr(r.value), "" if r.bound is None else repr(r.bound),
                    "" if r.slack is None else repr(r.slack), r.relation, r.passed,
                ])
        for name, (header, data) in self.tables.items():
            with open(out / name, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(header)
                for line in np.asarray(data, dtype=float):
                    wr.writerow([repr(float(v)) for v in line])
        summary = {
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "n_rows": len(self.rows),
            "n_failed": sum(not r.passed for r in self.rows),
            "meta": self.meta,
            "config": config,
            "rows": [{k: _num(v) if k in ("value", "bound", "slack") else v for k, v in asdict(r).items()}
                     for r in self.rows],
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
