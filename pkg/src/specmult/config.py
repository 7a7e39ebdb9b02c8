"""JSON experiment configuration with schema validation and defaults."""
import copy
import hashlib
import json
from importlib import resources

import jsonschema

from .reports import dumps

DEFAULTS = {
    "space": {"family": "cycle", "n": 128, "weights": "unit"},
    "operator": {"kind": "laplacian"},
    "grids": {
        "t": [1.0, 4.0, 16.0],
        "R": [1.0, 2.0, 4.0],
        "tau": [1.0, 2.0, 4.0, 8.0],
        "z": [[1.0, 4.0], [1.0, 1.0], [4.0, 0.0]],
        "j": [2, 6],
        "l": [-4, 4],
        "N": [2, 4, 8],
        "radii": [1.5, 2.5, 4.5],
    },
    "profiles": [
        {"family": "imaginary_power", "params": {"tau": 1.0}},
        {"family": "imaginary_power", "params": {"tau": 2.0}},
        {"family": "imaginary_power", "params": {"tau": 4.0}},
        {"family": "imaginary_power", "params": {"tau": 8.0}},
    ],
    "params": {"s": 1.1, "q": 2.0, "p": 1.5, "M": 2, "K": 1, "eps": 1.0, "kappa": 1,
               "r": 2.0, "trials": 50, "N": 4},
    "thresholds": {"h1": 10.0, "lp": 10.0, "hp_lp": 100.0},
    "seed": 0,
    "out": "specmult_out",
}

QUICK_MAX_N = 64


def load_schema(name):
    """Load one of the JSON schemas shipped with the package."""
    text = resources.files("specmult").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(document, name):
    """Validate ``document`` against a shipped schema (raises ``ValidationError``)."""
    jsonschema.validate(document, load_schema(name))


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class Config:
    """Validated configuration; missing sections fall back to :data:`DEFAULTS`.

    A user-supplied ``space`` replaces the default one entirely, so size
    keys of the default family never leak into another family.
    """

    def __init__(self, data=None):
        data = {} if data is None else dict(data)
        validate(data, "config")
        merged = _merge(DEFAULTS, {k: v for k, v in data.items() if k != "space"})
        if "space" in data:
            merged["space"] = copy.deepcopy(data["space"])
        self.data = merged
        self._check()

    def _check(self):
        if self.data["operator"].get("m", 2) < 2:
            raise ValueError("operator order m must be >= 2")
        for name, grid in self.data["grids"].items():
            if len(grid) == 0:
                raise ValueError(f"grid {name!r} is empty")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls(json.load(fh))

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self):
        return int(self.data["seed"])

    def with_overrides(self, seed=None, out=None, quick=False):
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["seed"] = int(seed)
        if out is not None:
            data["out"] = str(out)
        if quick:
            data = quick_profile(data)
        new = Config.__new__(Config)
        new.data = data
        new._check()
        return new

    def hash(self):
        return hashlib.sha256(dumps(self.data).encode()).hexdigest()[:16]

    def to_dict(self):
        return copy.deepcopy(self.data)


def quick_profile(data):
    """Cap the space at 64 points and shorten grids for smoke runs."""
    data = copy.deepcopy(data)
    sp = data["space"]
    if "n" in sp:
        sp["n"] = min(int(sp["n"]), QUICK_MAX_N)
    if "nx" in sp:
        sp["nx"] = min(int(sp["nx"]), 8)
        sp["ny"] = min(int(sp.get("ny", 8)), 8)
    if "depth" in sp:
        sp["depth"] = min(int(sp["depth"]), 5)
    if "level" in sp:
        sp["level"] = min(int(sp["level"]), 3)
    g = data["grids"]
    for key in ("t", "R", "tau", "N", "radii", "z"):
        g[key] = g[key][:2]
    data["params"]["trials"] = min(int(data["params"].get("trials", 50)), 10)
    data["profiles"] = data["profiles"][:2]
    return data
