"""Report containers and deterministic JSON serialization."""
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = "1.0"


def to_jsonable(obj):
    """Convert numpy scalars/arrays, dataclasses and non-finite floats."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def r_squared(y, yhat):
    """Coefficient of determination; 1.0 for a perfect fit of constant data."""
    y = np.asarray(y, float)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res <= 1e-24 else -np.inf
    return 1.0 - ss_res / ss_tot


@dataclass
class FitReport:
    """Fitted constants of a log-scale regression plus diagnostics.

    ``params`` holds the model constants (e.g. ``b`` and ``C``; for decay
    models ``C`` is already inflated to the largest observed ratio, so the
    model certifies every retained sample). ``residual`` is the R^2 of the
    log-scale fit. ``samples`` maps column names to equal-length lists
    (written as a CSV sidecar).
    """

    model: str
    params: dict
    residual: float
    sample_count: int
    worst_ratio: float = 1.0
    flags: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    @property
    def ok(self):
        return not any(f in ("underflow", "degenerate", "insufficient_samples")
                       for f in self.flags)

    def to_dict(self, with_samples=False):
        d = {
            "model": self.model,
            "params": self.params,
            "residual": self.residual,
            "sample_count": self.sample_count,
            "worst_ratio": self.worst_ratio,
            "flags": list(self.flags),
            "extra": self.extra,
        }
        if with_samples:
            d["samples"] = self.samples
        return to_jsonable(d)


@dataclass
class ExperimentReport:
    """Outcome of one end-to-end experiment.

    ``sup_ratio`` is always attained by ``witness``, one of the recorded
    ``samples``.
    """

    experiment: str
    grid: dict
    samples: list
    fitted: dict = field(default_factory=dict)
    sup_ratio: float = float("nan")
    witness: dict = field(default_factory=dict)
    threshold: float = float("inf")
    passed: bool = True
    seed: int = 0
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def status(self):
        return "pass" if self.passed else "fail"

    def to_dict(self):
        return to_jsonable({
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "grid": self.grid,
            "samples": self.samples,
            "fitted": self.fitted,
            "sup_ratio": self.sup_ratio,
            "witness": self.witness,
            "threshold": self.threshold,
            "passed": self.passed,
            "seed": self.seed,
            "flags": list(self.flags),
            "extra": self.extra,
        })

    def to_json(self):
        return dumps(self.to_dict())


def sup_with_witness(samples, key="ratio"):
    """Return ``(sup, witness)`` over samples with a finite ``key`` value."""
    best, witness = -np.inf, {}
    for s in samples:
        v = s.get(key)
        if v is None or not np.isfinite(v):
            continue
        if v > best:
            best, witness = v, s
    if not witness:
        return float("nan"), {}
    return float(best), dict(witness)
