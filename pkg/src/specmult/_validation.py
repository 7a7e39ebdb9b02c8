"""Input validation helpers shared by all modules.

sklearn's ``check_array`` rejects complex input, so grid functions and
operator matrices are checked here instead.
"""
import numbers

import numpy as np


class SpecmultError(Exception):
    """Base class for errors raised by this package."""


class ConstructionError(SpecmultError, ValueError):
    pass


class DomainError(SpecmultError, ValueError):
    pass


class ResolutionError(SpecmultError, RuntimeError):
    pass


class NonNegativityError(SpecmultError, ValueError):
    pass


class WitnessMismatchError(SpecmultError, ValueError):
    pass


class EstimatorError(SpecmultError, RuntimeError):
    pass


def check_grid_function(f, n, name="f"):
    """Return ``f`` as a 1-d complex-or-real array of length ``n``."""
    f = np.asarray(f)
    if f.ndim != 1 or f.shape[0] != n:
        raise ValueError(f"{name} must have shape ({n},), got {f.shape}")
    if not np.issubdtype(f.dtype, np.number):
        raise ValueError(f"{name} must be numeric")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")
    if not np.iscomplexobj(f):
        f = f.astype(float)
    return f


def check_square_matrix(a, n=None, name="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} must be {n}x{n}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    if not np.iscomplexobj(a):
        a = a.astype(float)
    return a


def check_exponent(p, name="p", low=1.0):
    """Validate a Lebesgue exponent in ``[low, inf]``."""
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return np.inf
        p = float(p)
    if not isinstance(p, numbers.Real) or np.isnan(p):
        raise ValueError(f"{name} must be a real number, got {p!r}")
    p = float(p)
    if p < low:
        raise ValueError(f"{name} must be >= {low}, got {p}")
    return p


def check_positive(x, name, strict=True):
    if not isinstance(x, numbers.Real) or np.isnan(x):
        raise ValueError(f"{name} must be a real number, got {x!r}")
    if strict and x <= 0:
        raise ValueError(f"{name} must be > 0, got {x}")
    if not strict and x < 0:
        raise ValueError(f"{name} must be >= 0, got {x}")
    return float(x)


def check_order(m):
    if not isinstance(m, numbers.Real) or m < 2:
        raise ValueError(f"order m must be >= 2, got {m!r}")
    return float(m) if not float(m).is_integer() else int(m)


def check_point_set(E, n, name="E"):
    """Return a sorted unique int array of point ids within ``range(n)``."""
    if E is None:
        return np.arange(n)
    E = np.unique(np.asarray(E, dtype=int).ravel())
    if E.size and (E[0] < 0 or E[-1] >= n):
        raise ValueError(f"{name} contains point ids outside 0..{n - 1}")
    return E


def check_random_state(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
