"""Experiment reports: named checks, summary statistics and per-replication rows."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

__all__ = ["Check", "ExperimentReport", "jsonable"]

GATE = "gate"
DIAGNOSTIC = "diagnostic"
EXPECTED_FAILURE = "expected_failure"


def jsonable(x: Any) -> Any:
    """Convert numpy scalars and arrays (recursively) into plain Python values."""
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    return x


@dataclass
class Check:
    """``lower <= value <= upper`` with either bound optional.

    Only ``gate`` checks decide the report outcome; ``diagnostic`` and
    ``expected_failure`` checks are informational.
    """

    name: str
    value: float
    lower: float | None = None
    upper: float | None = None
    kind: str = GATE
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        self.value = float(self.value)
        self.passed = self.evaluate()

    def evaluate(self) -> bool:
        if math.isnan(self.value):
            return False
        if self.lower is not None and self.value < self.lower:
            return False
        if self.upper is not None and self.value > self.upper:
            return False
        return True

    def line(self) -> str:
        lo = "-inf" if self.lower is None else f"{self.lower:.6g}"
        hi = "inf" if self.upper is None else f"{self.upper:.6g}"
        tag = "PASS" if self.passed else "FAIL"
        if self.kind != GATE:
            tag = f"{tag} ({self.kind})"
        return f"{tag} {self.name}: {self.value:.6g} in [{lo}, {hi}]"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Check:
        c = cls(d["name"], d["value"], d.get("lower"), d.get("upper"), d.get("kind", GATE))
        if "passed" in d and bool(d["passed"]) != c.passed:
            raise ValueError(f"check {c.name!r}: stored flag disagrees with its bounds")
        return c


@dataclass
class ExperimentReport:
    experiment: str
    config: dict[str, Any]
    summary: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    table: list[dict[str, Any]] = field(default_factory=list)
    records: list[tuple[int, int, float]] = field(default_factory=list)
    wall_clock: float | None = None

    def check(self, name: str, value: float, lower=None, upper=None, kind: str = GATE) -> Check:
        c = Check(name, value, lower, upper, kind)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.kind == GATE)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "experiment": self.experiment,
            "passed": self.passed,
            "config": jsonable(self.config),
            "summary": jsonable(self.summary),
            "checks": [asdict(c) for c in self.checks],
            "notes": list(self.notes),
            "table": jsonable(self.table),
            "records": [[int(r), int(c), float(v)] for r, c, v in self.records],
        }
        if self.wall_clock is not None:
            out["wall_clock"] = self.wall_clock
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ExperimentReport:
        return cls(
            experiment=d["experiment"],
            config=d["config"],
            summary=d.get("summary", {}),
            checks=[Check.from_dict(c) for c in d.get("checks", [])],
            notes=list(d.get("notes", [])),
            table=list(d.get("table", [])),
            records=[(int(r), int(c), float(v)) for r, c, v in d.get("records", [])],
            wall_clock=d.get("wall_clock"),
        )

    @classmethod
    def from_json(cls, text: str) -> ExperimentReport:
        return cls.from_dict(json.loads(text))

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def write_csv(self, path: str | Path) -> None:
        """Write the summary table if there is one, else ``rep,coord,value`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.table:
                cols = list(self.table[0])
                w.writerow(cols)
                w.writerows([[jsonable(row[c]) for c in cols] for row in self.table])
            else:
                w.writerow(["rep", "coord", "value"])
                w.writerows([[r, c, repr(float(v))] for r, c, v in self.records])
