"""Conical square functions, Hardy norms and molecules associated with ``L``.

The square function uses ``psi_0(z) = z exp(-z)``:

``Sf(x)^2 = int_0^inf avg_{B(x,t)} |psi_0(t^m L) f|^2 dt/t``

discretized by the midpoint rule in ``log t``. Functions in the kernel of
``L`` have zero Hardy seminorm, so experiments work on kernel-projected data.
"""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (ConstructionError, EstimatorError, ResolutionError,
                          WitnessMismatchError, check_exponent, check_grid_function,
                          check_positive, check_random_state)
from .operator import SpectralDecomposition, WeightedOperator, decompose
from .reports import to_jsonable
from .space import Ball, dyadic_annulus, fit_dimension, lp_norm, max_dyadic_index

SELF_CHECK_RTOL = 0.01
MOLECULE_RTOL = 1e-8


@dataclass(frozen=True)
class SquareFunctionGrid:
    """Log-spaced ``t`` nodes with midpoint weights for ``dt/t``."""

    t: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, float)
        w = np.asarray(self.weights, float)
        if t.ndim != 1 or t.size < 1 or t.shape != w.shape:
            raise ValueError("t and weights must be 1-d arrays of equal length")
        if np.any(t <= 0) or np.any(w <= 0):
            raise ValueError("t nodes and weights must be positive")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def logspace(cls, t_min, t_max, n_nodes=96):
        t_min = check_positive(float(t_min), "t_min")
        t_max = check_positive(float(t_max), "t_max")
        if not t_min < t_max:
            raise ValueError(f"need t_min < t_max, got {t_min}, {t_max}")
        edges = np.geomspace(t_min, t_max, int(n_nodes) + 1)
        return cls(np.sqrt(edges[:-1] * edges[1:]), np.diff(np.log(edges)))

    @property
    def t_min(self):
        return float(self.t[0] * np.exp(-self.weights[0] / 2))

    @property
    def t_max(self):
        return float(self.t[-1] * np.exp(self.weights[-1] / 2))

    def refined(self):
        """Same range with twice as many nodes."""
        return SquareFunctionGrid.logspace(self.t_min, self.t_max, 2 * self.t.size)


def default_grid(dec, m=None, n_nodes=96):
    """``t^m lambda`` covers ``[1e-3, 1e3]`` over the spectrum, capped at 4 diameters."""
    m = dec.order if m is None else m
    lam_max = dec.lambda_max
    lam_min = dec.lambda_min_positive
    if lam_max <= 0:
        raise ConstructionError("square function needs a non-zero operator")
    t_min = (1e-3 / lam_max) ** (1.0 / m)
    t_max = (1e3 / lam_min) ** (1.0 / m)
    diam = dec.space.diameter
    if diam > 0:
        t_max = min(t_max, 4.0 * diam)
    if t_max <= t_min:
        t_max = 2.0 * t_min
    return SquareFunctionGrid.logspace(t_min, t_max, n_nodes)


def _columns(f, n):
    f = np.asarray(f)
    if f.ndim == 1:
        return check_grid_function(f, n)[:, None], True
    if f.ndim != 2 or f.shape[0] != n:
        raise ValueError(f"expected shape ({n},) or ({n}, k), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("f contains non-finite values")
    return f, False


def _square_sums(dec, F, grid, m, kernel=None):
    """Unnormalized squared integrals per point for the columns of ``F``."""
    space = dec.space
    mu = space.weights
    coef = dec.vectors.conj().T @ (mu[:, None] * F)
    out = np.zeros(F.shape, dtype=float)
    for t, w in zip(grid.t, grid.weights):
        x = t ** m * dec.eigenvalues
        g = dec.vectors @ ((x * np.exp(-x))[:, None] * coef)
        dens = (np.abs(g) ** 2) * mu[:, None]
        vol = space.ball_volumes(t)
        if kernel is None:
            cone = (space.dist < t).astype(float)
        else:
            cone = kernel(t)
        out += w * (cone @ dens) / vol[:, None]
    return out


def _unit_columns(F):
    # S is positively homogeneous; normalizing keeps |psi f|^2 out of underflow
    scale = np.abs(F).max(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return F / scale, scale


def _check_resolution(base, fine, mu):
    nb = np.sqrt(np.sum(base * mu[:, None], axis=0))
    nf = np.sqrt(np.sum(fine * mu[:, None], axis=0))
    scale = np.maximum(nf, np.finfo(float).tiny)
    rel = np.abs(nb - nf) / scale
    rel = np.where(nf > 0, rel, 0.0)
    if np.any(rel > SELF_CHECK_RTOL):
        raise ResolutionError(f"square function changed by {rel.max():.2%} when the "
                              "t-grid was refined; widen or densify the grid")
    return float(rel.max()) if rel.size else 0.0


def square_function(dec, f, grid=None, m=None, self_check=True):
    """Conical square function ``Sf`` at every point.

    ``f`` may be one grid function or an ``(n, k)`` stack of columns. With
    ``self_check`` the value of ``||Sf||_2`` is recomputed on a grid with
    twice the nodes and must agree within 1%.
    """
    m = dec.order if m is None else m
    grid = default_grid(dec, m) if grid is None else grid
    F, single = _columns(f, dec.n)
    F, scale = _unit_columns(F)
    sq = _square_sums(dec, F, grid, m)
    if self_check:
        fine = _square_sums(dec, F, grid.refined(), m)
        _check_resolution(sq, fine, dec.weights)
    S = np.sqrt(np.maximum(sq, 0.0)) * scale
    return S[:, 0] if single else S


def hardy_norm(dec, f, p=1, grid=None, m=None, self_check=True):
    """``||Sf||_{L^p}`` for ``p`` in ``[1, 2]`` (vectorized over columns)."""
    p = check_exponent(p, "p")
    if p > 2:
        raise ValueError(f"hardy_norm needs p in [1, 2], got {p}")
    S = square_function(dec, f, grid, m, self_check)
    if S.ndim == 1:
        return lp_norm(dec.space, S, p)
    return np.array([lp_norm(dec.space, S[:, i], p) for i in range(S.shape[1])])


def g_star(dec, f, lam_param=2.0, grid=None, m=None, D=None):
    """Littlewood-Paley-Stein ``g*_lambda`` with ``psi(u) = u exp(-u)`` and ``s = t^m``.

    ``D`` defaults to the slope-fit doubling dimension of the space.
    """
    lam_param = check_positive(lam_param, "lam_param")
    if lam_param <= 1:
        raise ValueError("g_star needs lam_param > 1")
    m = dec.order if m is None else m
    grid = default_grid(dec, m) if grid is None else grid
    if D is None:
        D = fit_dimension(dec.space).params["D"] if dec.n > 1 else 0.0
    dist = dec.space.dist

    def kernel(t):
        return (t / (dist + t)) ** (D * lam_param)

    F, single = _columns(f, dec.n)
    # ds/s = m dt/t
    sgrid = SquareFunctionGrid(grid.t, m * grid.weights)
    F, scale = _unit_columns(F)
    G = np.sqrt(np.maximum(_square_sums(dec, F, sgrid, m, kernel), 0.0)) * scale
    return G[:, 0] if single else G


@dataclass
class MoleculeCertificate:
    """Ratio table of the molecule inequalities for ``k <= M`` and every non-empty annulus."""

    ball: Ball
    M: int
    eps: float
    b: np.ndarray
    table: list
    max_ratio: float
    order: float = 2
    a: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def valid(self):
        return bool(self.max_ratio <= 1 + MOLECULE_RTOL)

    def to_dict(self):
        return to_jsonable({
            "ball": {"center": self.ball.center, "radius": self.ball.radius},
            "M": self.M, "eps": self.eps, "m": self.order,
            "max_ratio": self.max_ratio, "valid": self.valid,
            "table": self.table, "b": self.b, "a": self.a,
        })


def _power_apply(dec, k, f, scale=1.0):
    return dec.apply_values((scale * dec.eigenvalues) ** k, f)


def _ratio_table(dec, b, B, M, eps):
    space = dec.space
    m = dec.order
    r = B.radius
    J = max_dyadic_index(space, B)
    rows = []
    for k in range(M + 1):
        v = _power_apply(dec, k, b, r ** m) if k else b
        dens = np.abs(v) ** 2 * space.weights
        for j in range(J + 1):
            U = dyadic_annulus(space, B, j)
            lhs = float(np.sqrt(dens[U].sum())) if U.size else 0.0
            vol = space.volume(np.flatnonzero(space.dist[B.center] < 2 ** j * r))
            rhs = r ** (m * M) * 2.0 ** (-j * eps) * vol ** -0.5
            rows.append({"k": k, "j": j, "lhs": lhs, "rhs": float(rhs),
                         "ratio": lhs / rhs})
    return rows


def make_molecule(dec, B, M=1, eps=1.0):
    """Build an ``(M, eps)``-molecule ``a = L^M b`` adapted to the ball ``B``.

    ``b`` starts as ``r^(mM) exp(-r^m L) g`` with ``g`` the normalized,
    kernel-projected indicator of ``B``; it is then divided by the largest
    ratio in the molecule table so that every inequality holds.
    """
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    eps = check_positive(eps, "eps")
    M = int(M)
    space = dec.space
    m = dec.order
    r = check_positive(float(B.radius), "radius")
    chi = (space.dist[B.center] < r).astype(float)
    g = dec.project_out_kernel(chi / np.sqrt(np.sum(chi * space.weights)))
    b0 = r ** (m * M) * dec.apply_values(np.exp(-r ** m * dec.eigenvalues), g)
    if np.sqrt(np.sum(np.abs(b0) ** 2 * space.weights)) < 1e-14 * r ** (m * M):
        raise ConstructionError("ball lies in the kernel shadow of L; b would vanish")
    b0 = np.real_if_close(b0)
    rows = _ratio_table(dec, b0, B, M, eps)
    top = max(row["ratio"] for row in rows)
    b = b0 / top
    a = _power_apply(dec, M, b)
    return a, check_molecule(dec, a, b, B, M, eps)


def check_molecule(dec, a, b, B, M, eps):
    """Re-evaluate every molecule inequality for a given pair ``(a, b)``.

    Raises :class:`WitnessMismatchError` unless ``a = L^M b`` to ``1e-9``
    relative in ``L^2``.
    """
    a = check_grid_function(a, dec.n, "a")
    b = check_grid_function(b, dec.n, "b")
    M = int(M)
    LMb = _power_apply(dec, M, b)
    mu = dec.weights
    err = np.sqrt(np.sum(np.abs(a - LMb) ** 2 * mu))
    scale = max(np.sqrt(np.sum(np.abs(LMb) ** 2 * mu)), np.finfo(float).tiny)
    if err > 1e-9 * scale:
        raise WitnessMismatchError(f"a != L^M b (relative error {err / scale:.2e})")
    rows = _ratio_table(dec, b, B, M, eps)
    top = max(row["ratio"] for row in rows)
    return MoleculeCertificate(B, M, float(eps), b, rows, float(top), dec.order, a)


def molecule_family(dec, centers=None, radii=(1.5, 2.5, 4.5, 8.5), Ms=(1, 2), eps=1.0):
    """Molecules over a grid of centres, radii and orders; returns ``[(a, cert), ...]``."""
    n = dec.n
    if centers is None:
        centers = sorted({0, n // 3, (2 * n) // 3})
    out = []
    for c in centers:
        for r in radii:
            for M in Ms:
                out.append(make_molecule(dec, Ball(int(c), float(r)), M, eps))
    return out


def random_family(dec, k=8, seed=0):
    """``k`` random real grid functions with the kernel component removed (columns)."""
    rng = check_random_state(seed)
    F = rng.standard_normal((dec.n, k))
    return np.stack([dec.project_out_kernel(F[:, i]) for i in range(k)], axis=1).real


def h1_operator_norm_estimate(dec, T, test_family=None, grid=None, seed=0,
                              return_details=False):
    """Family-sup lower estimate of ``||T||_{H^1_L -> H^1_L}``.

    The default family is a set of molecules plus eight kernel-projected
    random functions. Members with Hardy norm below ``1e-12`` are dropped.
    """
    if isinstance(T, WeightedOperator):
        Tm = T.matrix
    else:
        Tm = np.asarray(T)
    if test_family is None:
        mols = np.stack([a for a, _ in molecule_family(dec)], axis=1)
        test_family = np.hstack([mols, random_family(dec, 8, seed)])
    Fam = np.asarray(test_family)
    if Fam.ndim == 1:
        Fam = Fam[:, None]
    grid = default_grid(dec) if grid is None else grid
    den = np.atleast_1d(hardy_norm(dec, Fam, 1, grid))
    keep = den > 1e-12
    if not np.any(keep):
        raise EstimatorError("no usable test functions (all Hardy norms vanish)")
    num = np.atleast_1d(hardy_norm(dec, Tm @ Fam[:, keep], 1, grid))
    ratios = num / den[keep]
    i = int(np.argmax(ratios))
    est = float(ratios[i])
    if return_details:
        idx = np.flatnonzero(keep)
        return est, {"label": "est-LB", "witness": int(idx[i]), "family_size": int(keep.sum()),
                     "ratios": ratios.tolist()}
    return est


class SquareFunction(TransformerMixin, BaseEstimator):
    """Transformer mapping grid functions (rows) to their square functions.

    Examples
    --------
    >>> from specmult.space import build_space
    >>> from specmult.operator import build_operator
    >>> sf = SquareFunction().fit(build_operator(build_space("cycle", n=16)))
    >>> float(sf.transform(np.zeros((2, 16))).max())
    0.0
    """

    def __init__(self, n_nodes=96, m=None, self_check=True):
        self.n_nodes = n_nodes
        self.m = m
        self.self_check = self_check

    def fit(self, op, y=None):
        dec = op if isinstance(op, SpectralDecomposition) else decompose(op)
        self.decomposition_ = dec
        self.grid_ = default_grid(dec, self.m, self.n_nodes)
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        X = np.asarray(X)
        cols = X.T if X.ndim == 2 else X
        S = square_function(self.decomposition_, cols, self.grid_, self.m, self.self_check)
        return S.T if X.ndim == 2 else S
