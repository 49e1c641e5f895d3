"""Scenario reports and their byte-stable JSON serialization."""

import json
import math
from dataclasses import dataclass, field, fields
from typing import Optional


@dataclass
class ScenarioReport:
    """Diagnostics of one scenario run.

    Fields that do not apply to a scenario stay ``None``.  ``runtime`` holds
    wall-clock and host details and is excluded from :meth:`body`, which is
    what determinism checks compare.
    """

    scenario: str
    seed: int
    swap_fraction: Optional[float] = None
    trajectory_record_mismatch: Optional[float] = None
    pointer_shift: Optional[float] = None
    predicted_shift: Optional[float] = None
    shift_relative_error: Optional[float] = None
    max_bohm_displacement: Optional[float] = None
    conditions: Optional[dict] = None
    equivariance_ks: Optional[float] = None
    equivariance: Optional[dict] = None
    symmetry_axis_crossings: Optional[int] = None
    non_crossing: Optional[dict] = None
    n_trajectories: int = 0
    truncated: int = 0
    node_encounters: int = 0
    clamped_steps: int = 0
    pointer_separation: Optional[float] = None
    overlap_time: Optional[float] = None
    branch_pointer_momentum: Optional[dict] = None
    adiabatic_fidelity: Optional[float] = None
    window_occupation: Optional[float] = None
    norm_drift: float = 0.0
    linearity_error: Optional[float] = None
    extra: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)

    def body(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "runtime"}

    def as_dict(self):
        d = self.body()
        d["runtime"] = self.runtime
        return d


def _scalar(v):
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return json.dumps(str(v))
        return format(v, ".17g")
    if isinstance(v, str):
        return json.dumps(v)
    if hasattr(v, "item"):  # numpy scalar
        return _scalar(v.item())
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj, indent=2, _level=0):
    """JSON text with every float written to 17 significant digits and keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    return _scalar(obj)


def write_report(path, report):
    with open(path, "w") as fh:
        fh.write(dumps(report.as_dict()) + "\n")


def read_report(path):
    with open(path) as fh:
        return json.load(fh)
