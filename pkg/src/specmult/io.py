"""Reading and writing spaces, operators, reports and CSV sidecars."""
import csv
import json
import os
from pathlib import Path

import numpy as np

from .operator import SpectralDecomposition, WeightedOperator, decompose
from .reports import SCHEMA_VERSION, dumps, to_jsonable
from .space import MetricMeasureSpace


def write_json(path, document):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document))
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _cell(v):
    v = to_jsonable(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def write_csv(path, columns=None, rows=None):
    """Write either a dict of equal-length columns or a list of row dicts.

    Every file starts with a header row naming the columns.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is not None:
        header = list(columns)
        n = len(next(iter(columns.values()))) if columns else 0
        body = ([columns[h][i] for h in header] for i in range(n))
    else:
        rows = rows or []
        header = []
        for r in rows:
            header += [k for k in r if k not in header]
        body = ([r.get(h, "") for h in header] for r in rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in body:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Return ``(header, rows)`` with values as strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        return header, [row for row in reader]


def save_space(space, path):
    return write_json(path, dict(space.to_dict(), schema_version=SCHEMA_VERSION))


def load_space(path):
    return MetricMeasureSpace.from_dict(read_json(path))


def save_operator(op, path):
    return write_json(path, dict(op.to_dict(), schema_version=SCHEMA_VERSION))


def load_operator(path, space):
    return WeightedOperator.from_dict(read_json(path), space)


def cached_decompose(op, cache_dir=None):
    """Decompose ``op``, caching the eigensystem as ``<fingerprint>.npz``.

    ``cache_dir`` defaults to ``$SPECMULT_CACHE``; without either the
    decomposition is computed directly.
    """
    cache_dir = cache_dir or os.environ.get("SPECMULT_CACHE")
    if not cache_dir:
        return decompose(op)
    path = Path(cache_dir) / f"{op.fingerprint()}.npz"
    if path.exists():
        with np.load(path) as z:
            lam, V = z["eigenvalues"], z["vectors"]
            norm = float(z["norm"])
        lam.setflags(write=False)
        V.setflags(write=False)
        return SpectralDecomposition(op.space, lam, V, op.order, norm,
                                     {"fingerprint": op.fingerprint(), "cached": True})
    dec = decompose(op)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, eigenvalues=dec.eigenvalues, vectors=dec.vectors, norm=dec.norm)
    return dec
