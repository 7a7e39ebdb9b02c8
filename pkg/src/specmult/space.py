"""Finite spaces of homogeneous type.

A :class:`MetricMeasureSpace` is a finite point set with a dense metric
matrix and positive point masses. Balls are open (``d < r``), so on integer
metrics the default radius grids use half-integers.
"""
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from sklearn.base import BaseEstimator

from ._validation import (ConstructionError, check_exponent, check_grid_function,
                          check_positive, check_random_state)
from .reports import FitReport, r_squared

FAMILIES = ("path", "cycle", "grid2d", "binary_tree", "sierpinski", "custom")


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite metric measure space ``(X, d, mu)``.

    Parameters
    ----------
    dist : (n, n) array
        Symmetric metric matrix.
    weights : (n,) array
        Positive point masses ``mu(x)``.
    adjacency : (n, n) array, optional
        Edge weights of the underlying graph, used to build Laplacians.
    name : str
        Label used in reports.
    """

    dist: np.ndarray
    weights: np.ndarray
    adjacency: np.ndarray = None
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        w = np.array(self.weights, dtype=float).ravel()
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] < 1:
            raise ConstructionError("dist must be a non-empty square matrix")
        n = dist.shape[0]
        if w.shape != (n,):
            raise ConstructionError(f"weights must have shape ({n},)")
        if not np.all(np.isfinite(dist)):
            raise ConstructionError("dist must be finite (is the graph connected?)")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ConstructionError("weights must be positive and finite")
        _check_metric(dist)
        dist.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "weights", w)
        if self.adjacency is not None:
            a = np.array(self.adjacency, dtype=float)
            if a.shape != (n, n) or not np.allclose(a, a.T):
                raise ConstructionError("adjacency must be symmetric n x n")
            a.setflags(write=False)
            object.__setattr__(self, "adjacency", a)

    @property
    def n(self):
        return self.dist.shape[0]

    @property
    def diameter(self):
        return float(self.dist.max())

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def volume(self, E):
        """``mu(E)`` for a point set ``E`` (0 for the empty set)."""
        E = np.asarray(E, dtype=int)
        return float(self.weights[E].sum()) if E.size else 0.0

    def ball_volumes(self, r):
        """``mu(B(x, r))`` for every centre ``x``."""
        return (self.dist < r) @ self.weights

    def to_dict(self):
        return {
            "name": self.name,
            "points": list(range(self.n)),
            "dist": self.dist.ravel().tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        n = len(d["points"])
        dist = np.asarray(d["dist"], dtype=float).reshape(n, n)
        adj = (dist == 1.0).astype(float)
        return cls(dist, d["weights"], adjacency=adj, name=d.get("name", "custom"))


def _check_metric(dist, exhaustive_max=64, n_samples=20000, seed=0):
    n = dist.shape[0]
    if np.any(np.diag(dist) != 0):
        raise ConstructionError("dist(x, x) must be 0")
    if not np.allclose(dist, dist.T, rtol=0, atol=1e-12):
        raise ConstructionError("dist must be symmetric")
    off = dist[~np.eye(n, dtype=bool)]
    if off.size and off.min() <= 0:
        raise ConstructionError("dist(x, y) must be > 0 for x != y")
    tol = 1e-9 * max(1.0, dist.max())
    if n <= exhaustive_max:
        # d(x,z) <= d(x,y) + d(y,z) for every triple
        viol = dist[:, None, :] - (dist[:, :, None] + dist[None, :, :])
        if viol.max() > tol:
            raise ConstructionError("triangle inequality violated")
    else:
        rng = np.random.default_rng(seed)
        x, y, z = rng.integers(0, n, size=(3, n_samples))
        if np.max(dist[x, z] - dist[x, y] - dist[y, z]) > tol:
            raise ConstructionError("triangle inequality violated")


def _graph_space(adj, weights, name, meta=None):
    adj = np.asarray(adj, dtype=float)
    n = adj.shape[0]
    if n == 1:
        dist = np.zeros((1, 1))
    else:
        dist = shortest_path(csr_matrix(adj), method="D", unweighted=True,
                             directed=False)
    w = _make_weights(weights, n, adj)
    return MetricMeasureSpace(dist, w, adjacency=adj, name=name, meta=meta or {})


def _make_weights(scheme, n, adj=None):
    if scheme is None or (isinstance(scheme, str) and scheme == "unit"):
        return np.ones(n)
    if isinstance(scheme, str):
        if scheme == "degree":
            deg = adj.sum(axis=1) if adj is not None else np.ones(n)
            return np.where(deg > 0, deg, 1.0)
        if scheme.startswith("random"):
            seed = int(scheme.split(":")[1]) if ":" in scheme else 0
            return np.random.default_rng(seed).uniform(0.5, 2.0, size=n)
        raise ConstructionError(f"unknown weight scheme {scheme!r}")
    w = np.asarray(scheme, dtype=float)
    if w.shape != (n,):
        raise ConstructionError(f"explicit weights must have length {n}")
    if np.any(w <= 0):
        raise ConstructionError("weights must be positive")
    return w


def _path_adjacency(n):
    a = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = a[i + 1, i] = 1.0
    return a


def _sierpinski_adjacency(level):
    # triangles in integer lattice coordinates; vertices deduplicated by coordinate
    tris = [((0, 0), (2 ** level, 0), (0, 2 ** level))]
    for _ in range(level):
        new = []
        for a, b, c in tris:
            ab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            ac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
            bc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
            new += [(a, ab, ac), (ab, b, bc), (ac, bc, c)]
        tris = new
    verts = sorted({v for t in tris for v in t})
    index = {v: i for i, v in enumerate(verts)}
    a = np.zeros((len(verts), len(verts)))
    for t in tris:
        for u, v in itertools.combinations(t, 2):
            a[index[u], index[v]] = a[index[v], index[u]] = 1.0
    return a


def build_space(family, weights="unit", **size):
    """Instantiate a space from a named family.

    Parameters
    ----------
    family : {'path', 'cycle', 'grid2d', 'binary_tree', 'sierpinski', 'custom'}
    weights : 'unit', 'degree', 'random[:seed]' or an explicit array
    **size
        ``n`` for path/cycle, ``nx``/``ny`` for grid2d, ``depth`` for
        binary_tree, ``level`` for sierpinski, ``dist`` (and optionally
        ``adjacency``) for custom.

    Examples
    --------
    >>> float(build_space("path", n=5).dist[0, 4])
    4.0
    """
    if family not in FAMILIES:
        raise ConstructionError(f"unknown family {family!r}; expected one of {FAMILIES}")

    def _size(key):
        v = size.get(key)
        if v is None:
            raise ConstructionError(f"family {family!r} needs size parameter {key!r}")
        if int(v) != v or v < 1:
            raise ConstructionError(f"{key} must be a positive integer, got {v!r}")
        return int(v)

    if family == "path":
        n = _size("n")
        return _graph_space(_path_adjacency(n), weights, f"path({n})", {"n": n})
    if family == "cycle":
        n = _size("n")
        a = _path_adjacency(n)
        if n >= 3:
            a[0, n - 1] = a[n - 1, 0] = 1.0
        return _graph_space(a, weights, f"cycle({n})", {"n": n})
    if family == "grid2d":
        nx = _size("nx")
        ny = size.get("ny", nx)
        ny = int(ny)
        if ny < 1:
            raise ConstructionError("ny must be positive")
        a = np.kron(_path_adjacency(nx), np.eye(ny)) + np.kron(np.eye(nx), _path_adjacency(ny))
        return _graph_space(a, weights, f"grid2d({nx}x{ny})", {"nx": nx, "ny": ny})
    if family == "binary_tree":
        depth = size.get("depth")
        if depth is None or int(depth) != depth or depth < 0:
            raise ConstructionError("binary_tree needs depth >= 0")
        n = 2 ** (int(depth) + 1) - 1
        a = np.zeros((n, n))
        for i in range(n):
            for c in (2 * i + 1, 2 * i + 2):
                if c < n:
                    a[i, c] = a[c, i] = 1.0
        return _graph_space(a, weights, f"binary_tree({depth})", {"depth": int(depth)})
    if family == "sierpinski":
        level = size.get("level")
        if level is None or int(level) != level or level < 0:
            raise ConstructionError("sierpinski needs level >= 0")
        a = _sierpinski_adjacency(int(level))
        return _graph_space(a, weights, f"sierpinski({level})", {"level": int(level)})
    # custom
    dist = size.get("dist")
    if dist is None:
        raise ConstructionError("custom family needs 'dist'")
    dist = np.asarray(dist, dtype=float)
    adj = size.get("adjacency")
    if adj is None:
        adj = (dist == 1.0).astype(float)
    w = _make_weights(weights, dist.shape[0], adj)
    return MetricMeasureSpace(dist, w, adjacency=adj, name="custom")


def product_space(a, b):
    """Cartesian product with the sum metric and product measure."""
    dist = a.dist[:, None, :, None] + b.dist[None, :, None, :]
    n = a.n * b.n
    adj = None
    if a.adjacency is not None and b.adjacency is not None:
        adj = np.kron(a.adjacency, np.eye(b.n)) + np.kron(np.eye(a.n), b.adjacency)
    return MetricMeasureSpace(dist.reshape(n, n), np.kron(a.weights, b.weights),
                              adjacency=adj, name=f"{a.name}x{b.name}")


@dataclass(frozen=True)
class Ball:
    """Open ball ``B(center, radius)``; ``dilate(lam)`` gives ``lam * B``."""

    center: int
    radius: float

    def dilate(self, lam):
        return Ball(self.center, lam * self.radius)

    def points(self, space):
        return ball(space, self.center, self.radius)


def ball(space, x, r):
    """Points at distance strictly less than ``r`` from ``x``."""
    if not 0 <= x < space.n:
        raise IndexError(f"point {x} outside 0..{space.n - 1}")
    return np.flatnonzero(space.dist[x] < r)


def annulus(space, x, r, k):
    """``A(x, r, k) = B(x, (k+1) r) minus B(x, k r)``."""
    check_positive(r, "r")
    if k < 0:
        raise ValueError("k must be >= 0")
    d = space.dist[x]
    return np.flatnonzero((d < (k + 1) * r) & ~(d < k * r))


def dyadic_annulus(space, B, j):
    """``U_0(B) = B`` and ``U_j(B) = 2^j B minus 2^(j-1) B`` for ``j >= 1``."""
    if j < 0:
        raise ValueError("j must be >= 0")
    d = space.dist[B.center]
    if j == 0:
        return np.flatnonzero(d < B.radius)
    return np.flatnonzero((d < 2.0 ** j * B.radius) & ~(d < 2.0 ** (j - 1) * B.radius))


def max_dyadic_index(space, B):
    """Largest ``j`` for which ``2^(j-1) B`` is not yet all of ``X``."""
    far = space.dist[B.center].max()
    j = 0
    while 2.0 ** j * B.radius <= far:
        j += 1
    return j


def lp_norm(space, f, p):
    """Weighted ``L^p(X, mu)`` norm; ``p = inf`` gives ``max |f|``."""
    p = check_exponent(p)
    f = check_grid_function(f, space.n)
    a = np.abs(f)
    if p == np.inf:
        return float(a.max()) if a.size else 0.0
    return float(np.sum(a ** p * space.weights) ** (1.0 / p))


def default_radii(space, n_radii=8):
    """Half-integer radii on a geometric grid between 1.5 and the diameter / 2."""
    hi = max(space.diameter / 2.0, 2.0)
    r = np.unique(np.floor(np.geomspace(1.0, hi, n_radii))) + 0.5
    return r


def fit_dimension(space, radii=None, centers=None, max_centers=64, seed=0,
                  max_ratio_C=8.0):
    """Fit the homogeneity exponent ``D`` in ``mu(B(x, lam r)) <= C lam^D mu(B(x, r))``.

    Every pair of radii ``r < r'`` and every sampled centre gives one sample
    ``(log lam, log mu(B(x, lam r)) - log mu(B(x, r)))``. The slope of the
    least-squares line is reported as ``D``; ``C`` is the smallest constant
    for which the slope-``D`` bound holds on all samples. ``D_max_ratio`` is
    the smallest exponent for which the bound holds with
    ``C <= max_ratio_C``.
    """
    radii = default_radii(space) if radii is None else np.unique(np.asarray(radii, float))
    if centers is None:
        if space.n <= max_centers:
            centers = np.arange(space.n)
        else:
            rng = check_random_state(seed)
            centers = np.sort(rng.choice(space.n, size=max_centers, replace=False))
    centers = np.asarray(centers, dtype=int)
    logvol = np.log(np.stack([space.ball_volumes(r)[centers] for r in radii]))
    cols = {"x": [], "r": [], "lam": [], "log_ratio": []}
    for i, j in itertools.combinations(range(len(radii)), 2):
        lam = radii[j] / radii[i]
        cols["x"].extend(centers.tolist())
        cols["r"].extend([float(radii[i])] * centers.size)
        cols["lam"].extend([float(lam)] * centers.size)
        cols["log_ratio"].extend((logvol[j] - logvol[i]).tolist())
    xs, ys = np.log(np.asarray(cols["lam"])), np.asarray(cols["log_ratio"])
    samples = cols
    flags = []
    if xs.size < 2 or np.ptp(ys) == 0 and np.all(ys == 0):
        flags.append("degenerate")
        if xs.size >= 2:
            warnings.warn("all ball volumes are equal; reporting D = 0", RuntimeWarning)
        return FitReport("doubling_dimension",
                         {"D": 0.0, "C": 1.0, "D_max_ratio": 0.0, "log_C": 0.0},
                         residual=1.0, sample_count=int(xs.size), flags=flags,
                         samples=samples)
    A = np.column_stack([np.ones_like(xs), xs])
    (intercept, slope), *_ = np.linalg.lstsq(A, ys, rcond=None)
    D = max(float(slope), 0.0)
    resid = r_squared(ys, intercept + slope * xs)
    C = float(np.exp(np.max(ys - D * xs)))
    D_max = float(max(0.0, np.max((ys - np.log(max_ratio_C)) / xs)))
    return FitReport("doubling_dimension",
                     {"D": D, "C": max(C, 1.0), "D_max_ratio": D_max,
                      "log_C": float(intercept)},
                     residual=resid, sample_count=int(xs.size), flags=flags,
                     samples=samples)


class DoublingDimension(BaseEstimator):
    """Estimator wrapper around :func:`fit_dimension`.

    ``fit(space)`` sets ``dimension_``, ``constant_`` and ``report_``.
    """

    def __init__(self, radii=None, max_centers=64, seed=0, variant="slope"):
        self.radii = radii
        self.max_centers = max_centers
        self.seed = seed
        self.variant = variant

    def fit(self, space, y=None):
        self.report_ = fit_dimension(space, radii=self.radii,
                                     max_centers=self.max_centers, seed=self.seed)
        key = "D" if self.variant == "slope" else "D_max_ratio"
        self.dimension_ = self.report_.params[key]
        self.constant_ = self.report_.params["C"]
        return self


def covering_net(space, y, r, s):
    """Greedy maximal ``s/2``-separated subset of ``B(y, r)``.

    Points are inserted farthest-first starting from ``y``; the loop stops
    once every point of the ball is within ``s/2`` of the net, so the
    ``s``-balls around the net cover ``B(y, r)`` and distinct net points are
    more than ``s/2`` apart.
    """
    check_positive(s, "s")
    if r < s:
        raise ValueError(f"covering_net needs r >= s, got r={r}, s={s}")
    members = ball(space, y, r)
    if members.size == 0:
        return np.array([], dtype=int)
    net = [int(y)]
    gap = space.dist[y, members].copy()
    while True:
        k = int(np.argmax(gap))
        if gap[k] <= s / 2.0:
            break
        p = int(members[k])
        net.append(p)
        gap = np.minimum(gap, space.dist[p, members])
    return np.array(net, dtype=int)


def covering_report(space, y, r, s, net=None, dim_fit=None):
    """Check properties (i)-(iii) of a covering net and measure its overlap."""
    net = covering_net(space, y, r, s) if net is None else np.asarray(net, int)
    members = ball(space, y, r)
    sub = space.dist[np.ix_(net, net)]
    sep = sub[~np.eye(len(net), dtype=bool)]
    separated = bool(np.all(sep > s / 2.0)) if sep.size else True
    inside = space.dist[np.ix_(net, members)] < s
    covered = bool(np.all(inside.any(axis=0))) if members.size else True
    multiplicity = int(inside.sum(axis=0).max()) if members.size else 0
    rep = {"K": int(len(net)), "separated": separated, "covers": covered,
           "multiplicity": multiplicity, "in_ball": bool(np.all(space.dist[y, net] < r))}
    if dim_fit is not None:
        bound = dim_fit.params["C"] * (r / s) ** dim_fit.params["D"]
        rep["count_bound"] = float(bound)
        rep["count_ok"] = bool(len(net) <= bound)
    return rep


def check_volume_comparability(space, r, C=None):
    """Evaluate ``sum_{y in B(x,r)} mu(y) / mu(B(y,r))`` for every ``x``.

    If ``C`` is None the doubling constant ``mu(B(x,2r)) / mu(B(x,r))``
    maximised over ``x`` is used.
    """
    check_positive(r, "r")
    mask = space.dist < r
    vol = mask @ space.weights
    integrals = mask @ (space.weights / vol)
    if C is None:
        C = float(np.max(space.ball_volumes(2 * r) / vol))
    lo, hi = float(integrals.min()), float(integrals.max())
    return {"r": float(r), "min": lo, "max": hi, "C": float(C),
            "within": bool(lo >= 1.0 / C - 1e-12 and hi <= C + 1e-12),
            "integrals": integrals}
