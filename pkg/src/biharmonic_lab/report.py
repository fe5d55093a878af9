"""Experiment reports: tabulated samples, fits, checks, and a versioned JSON schema."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SCHEMA_VERSION = 1

REPORT_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": f"biharmonic_lab/experiment_report/v{SCHEMA_VERSION}",
    "title": "ExperimentReport",
    "type": "object",
    "required": ["schema_version", "experiment", "inputs", "columns", "fit", "checks", "passed"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"type": "string"},
        "inputs": {"type": "object"},
        "columns": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": ["number", "string", "null"]}},
        },
        "fit": {"type": "object"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "value": {},
                    "target": {},
                    "tolerance": {},
                    "passed": {"type": "boolean"},
                    "reason": {"type": "string"},
                },
            },
        },
        "passed": {"type": "boolean"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "config_hash": {"type": "string"},
        "versions": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}

# Bump SCHEMA_VERSION whenever this changes; a test pins the pair.
SCHEMA_FINGERPRINT = "4c03229c"


def schema_fingerprint(schema: dict = REPORT_SCHEMA) -> str:
    body = {k: v for k, v in schema.items() if k != "$id"}
    body["properties"] = {k: v for k, v in body["properties"].items() if k != "schema_version"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:8]


def report_schema() -> dict:
    return json.loads(json.dumps(REPORT_SCHEMA))


class FitError(ValueError):
    """Not enough (or degenerate) data for a fit."""


def _clean(x: Any):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def fit_power_law(x, y) -> dict:
    """Least squares of log y against log x; returns slope, intercept, r2, residual."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs >= 2 strictly positive samples")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    # a flat series has ss_tot at roundoff level; it is then fitted exactly
    flat = ss_tot <= 1e-24 * max(1.0, float(np.sum(ly**2)))
    r2 = 1.0 if flat else 1.0 - ss_res / ss_tot
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "r2": float(r2),
        "residual": float(np.sqrt(ss_res / x.size)),
    }


@dataclass
class ExperimentReport:
    experiment: str
    columns: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def check(self, name: str, value, target=None, tolerance=None, passed: bool | None = None, reason=None):
        """Record a check. If `passed` is omitted it is |value - target| <= tolerance."""
        if passed is None:
            passed = bool(abs(value - target) <= tolerance)
        item = {"name": name, "value": value, "target": target, "tolerance": tolerance, "passed": bool(passed)}
        if reason is not None:
            item["reason"] = reason
        self.checks.append(item)
        return bool(passed)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self, config_hash: str | None = None, versions: dict | None = None) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "inputs": _clean(self.inputs),
            "columns": _clean(self.columns),
            "fit": _clean(self.fit),
            "checks": _clean(self.checks),
            "passed": self.passed,
            "notes": list(self.notes),
        }
        if config_hash is not None:
            d["config_hash"] = config_hash
        if versions is not None:
            d["versions"] = dict(versions)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """Columns as CSV with full float precision; deterministic for identical inputs."""
        names = list(self.columns)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        rows = zip(*[self.columns[k] for k in names]) if names else []
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, int, np.floating, np.integer)) else v for v in row])
        return buf.getvalue()


def validate_report(doc: dict) -> None:
    import jsonschema

    jsonschema.validate(doc, REPORT_SCHEMA)
