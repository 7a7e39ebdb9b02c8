"""Localized operator norms and fitted off-diagonal decay constants.

All norms are taken between weighted spaces ``L^p(E, mu)``. For a matrix
``M`` acting on coordinates, the restriction ``chi_E1 M chi_E2`` from
``L^p(mu)`` to ``L^q(mu)`` has the same norm as the plain matrix
``diag(mu_E1^(1/q)) M[E1, E2] diag(mu_E2^(-1/p))`` between ``l^p`` and ``l^q``.
"""
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (check_exponent, check_order, check_point_set, check_positive,
                          check_random_state)
from .funcspace import OMEGA, SampledProfile, as_function, bessel_norm
from .operator import SpectralDecomposition, WeightedOperator, complex_heat, decompose
from .reports import ExperimentReport, FitReport, r_squared, sup_with_witness
from .space import annulus, ball, covering_net, fit_dimension

UNDERFLOW = 1e-14
SATURATION = 1e-10


@dataclass
class NormBracket:
    """Two-sided estimate ``lower <= ||T|| <= upper``.

    ``lower`` is attained by ``witness`` (a grid function); ``upper`` comes
    from an exact formula or from interpolation between exact endpoints.
    """

    lower: float
    upper: float
    method: dict = field(default_factory=dict)
    witness: np.ndarray = None

    @property
    def exact(self):
        return self.lower == self.upper

    @property
    def gap(self):
        if self.upper == 0:
            return 1.0
        return self.upper / self.lower if self.lower > 0 else np.inf

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "method": self.method}


def _as_operator(op):
    if isinstance(op, WeightedOperator):
        return op
    raise TypeError("expected a WeightedOperator")


def restricted_norm_22(op, E1, E2):
    """``||chi_E1 T chi_E2||`` on ``L^2(mu)``; empty sets give 0."""
    op = _as_operator(op)
    E1 = check_point_set(E1, op.n, "E1")
    E2 = check_point_set(E2, op.n, "E2")
    if E1.size == 0 or E2.size == 0:
        return 0.0
    block = op.symmetrized()[np.ix_(E1, E2)]
    return float(np.linalg.norm(block, 2))


def _inv(p):
    return 0.0 if np.isinf(p) else 1.0 / p


def _conj_exp(p):
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _vec_norm(v, p, axis=None):
    return np.linalg.norm(v, ord=p, axis=axis) if axis is not None else \
        float(np.linalg.norm(np.ravel(v), ord=p))


def _exact_lp(A, p, q):
    """Exact ``||A||_{l^p -> l^q}`` where a closed form exists, else None."""
    if A.size == 0:
        return 0.0
    if p == 2 and q == 2:
        return float(np.linalg.norm(A, 2))
    if p == 1:
        return float(np.max(np.linalg.norm(A, ord=q, axis=0)))
    if np.isinf(q):
        return float(np.max(np.linalg.norm(A, ord=_conj_exp(p), axis=1)))
    return None


def _norming(v, r):
    """Unit vector ``w`` of ``l^(r')`` with ``sum(w * v) = ||v||_r``."""
    a = np.abs(v)
    phase = np.where(a > 0, np.conj(v) / np.where(a > 0, a, 1.0), 0.0)
    if np.isinf(r):
        w = np.zeros_like(v, dtype=complex if np.iscomplexobj(v) else float)
        k = int(np.argmax(a))
        w[k] = phase[k] if a[k] > 0 else 1.0
        return w
    if r == 1:
        return np.where(a > 0, phase, 1.0)
    nv = np.linalg.norm(a, ord=r)
    if nv == 0:
        return np.zeros_like(phase)
    return phase * (a / nv) ** (r - 1)


def _ascent(A, p, q, rng, restarts=8, iters=50):
    """Dual-norm power iteration; returns ``(value, x)`` with ``||x||_p = 1``."""
    k = A.shape[1]
    cplx = np.iscomplexobj(A)
    starts = [np.ones(k)]
    for _ in range(restarts):
        x = rng.standard_normal(k)
        if cplx:
            x = x + 1j * rng.standard_normal(k)
        starts.append(x)
    if k <= 12:
        # exhaustive sign patterns for small blocks: a cheap floor for the bound
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=k - 1)))
        signs = np.hstack([np.ones((len(signs), 1)), signs])
        vals = np.linalg.norm(signs @ A.T, ord=q, axis=1) / np.linalg.norm(signs, ord=p, axis=1)
        starts.append(signs[int(np.argmax(vals))])
    best, best_x = -1.0, None
    for x in starts:
        x = x / np.linalg.norm(x, ord=p)
        val = _vec_norm(A @ x, q)
        for _ in range(iters):
            w = _norming(A @ x, q)
            z = A.T @ w
            if not np.any(z):
                break
            x_new = _norming(z, _conj_exp(p))
            x_new = x_new / np.linalg.norm(x_new, ord=p)
            new = _vec_norm(A @ x_new, q)
            if new <= val * (1 + 1e-13):
                if new > val:
                    x, val = x_new, new
                break
            x, val = x_new, new
        if val > best:
            best, best_x = val, x
    return float(best), best_x


def _interpolated_upper(A, p, q):
    """Riesz-Thorin bound from exact endpoint norms around ``(1/p, 1/q)``."""
    pts = {(1.0, 1.0): (1, 1), (0.0, 0.0): (np.inf, np.inf), (1.0, 0.0): (1, np.inf),
           (0.5, 0.5): (2, 2), (1.0, _inv(q)): (1, q), (_inv(p), 0.0): (p, np.inf)}
    vals = {xy: _exact_lp(A, *pq) for xy, pq in pts.items()}
    target = np.array([_inv(p), _inv(q)])
    keys = list(vals)
    best, used = np.inf, None
    for tri in itertools.combinations(keys, 3):
        a, b, c = tri
        P = np.array([[a[0], b[0], c[0]], [a[1], b[1], c[1]], [1.0, 1.0, 1.0]])
        if abs(np.linalg.det(P)) < 1e-12:
            continue
        theta = np.linalg.solve(P, np.append(target, 1.0))
        if np.any(theta < -1e-12):
            continue
        theta = np.clip(theta, 0.0, None)
        bound = float(np.prod([vals[k] ** th if th > 0 else 1.0 for k, th in zip(tri, theta)]))
        if bound < best:
            best, used = bound, [pts[k] for k in tri]
    return best, used


def _weighted_block(op, E1, E2, p, q):
    mu = op.space.weights
    return (mu[E1] ** _inv(q))[:, None] * op.matrix[np.ix_(E1, E2)] \
        / (mu[E2] ** _inv(p))[None, :]


def restricted_norm_pq(op, E1, E2, p, q, seed=0, ascent=True):
    """Bracket ``||chi_E1 T chi_E2||_{L^p(mu) -> L^q(mu)}``.

    Exact whenever ``p = 1``, ``q = inf`` or ``p = q = 2``; otherwise the
    upper bound interpolates exact endpoints and the lower bound comes from
    dual-norm ascent with seeded random restarts. ``ascent=False`` skips the
    lower bound (reported as 0) when only the upper bound is needed.
    """
    op = _as_operator(op)
    p = check_exponent(p, "p")
    q = check_exponent(q, "q")
    E1 = check_point_set(E1, op.n, "E1")
    E2 = check_point_set(E2, op.n, "E2")
    if E1.size == 0 or E2.size == 0:
        return NormBracket(0.0, 0.0, {"upper": "empty", "lower": "empty"},
                           np.zeros(op.n))
    A = _weighted_block(op, E1, E2, p, q)
    exact = _exact_lp(A, p, q)
    if exact is not None:
        return NormBracket(exact, exact, {"upper": "exact", "lower": "exact"})
    if p <= q:
        upper, used = _interpolated_upper(A, p, q)
        method = {"upper": "riesz-thorin", "endpoints": used}
    else:
        warnings.warn(f"no upper bound for p={p} > q={q}; bracket is (lower, inf)",
                      stacklevel=2)
        upper, method = np.inf, {"upper": "none"}
    if not ascent:
        method["lower"] = "trivial"
        return NormBracket(0.0, upper, method)
    lower, x = _ascent(A, p, q, check_random_state(seed))
    lower = min(lower, upper)
    witness = np.zeros(op.n, dtype=x.dtype)
    witness[E2] = x / op.space.weights[E2] ** _inv(p)
    method["lower"] = "dual-ascent"
    return NormBracket(lower, upper, method, witness)


def sample_pairs(space, n_pairs=512, seed=0, all_below=128):
    """All ordered pairs for small spaces, else pairs stratified by distance decade."""
    n = space.n
    if n <= all_below:
        xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return np.stack([xs.ravel(), ys.ravel()], axis=1)
    rng = check_random_state(seed)
    cand = rng.integers(0, n, size=(40 * n_pairs, 2))
    d = space.dist[cand[:, 0], cand[:, 1]]
    pos = d[d > 0]
    scale = pos.min() if pos.size else 1.0
    bins = np.where(d > 0, 1 + np.floor(np.log10(np.maximum(d, scale) / scale)), 0).astype(int)
    labels = np.unique(bins)
    per = int(np.ceil(n_pairs / labels.size))
    out = []
    for b in labels:
        idx = np.flatnonzero(bins == b)[:per]
        out.append(cand[idx])
    out = np.concatenate(out)[:n_pairs]
    return out[np.lexsort((out[:, 1], out[:, 0]))]


def _two_ball_norms(S, dist, r, xs, ys, r_y=None, reduce="spectral"):
    """Batched ``||S[B(x,r), B(y,r_y)]||_2`` grouped by block shape.

    ``reduce='maxabs'`` returns the largest absolute entry instead.
    """
    r_y = r if r_y is None else r_y
    in_x = dist < r
    in_y = dist < r_y
    sx, sy = in_x.sum(axis=1), in_y.sum(axis=1)
    out = np.zeros(len(xs))
    keys = sx[xs] * (dist.shape[0] + 1) + sy[ys]
    for key in np.unique(keys):
        sel = np.flatnonzero(keys == key)
        a, b = sx[xs[sel[0]]], sy[ys[sel[0]]]
        if a == 0 or b == 0:
            continue
        rows = np.stack([np.flatnonzero(in_x[x]) for x in xs[sel]])
        cols = np.stack([np.flatnonzero(in_y[y]) for y in ys[sel]])
        blocks = S[rows[:, :, None], cols[:, None, :]]
        if reduce == "maxabs":
            out[sel] = np.abs(blocks).reshape(len(sel), -1).max(axis=1)
        elif a == 1 or b == 1:
            out[sel] = np.linalg.norm(blocks.reshape(len(sel), -1), axis=1)
        else:
            out[sel] = np.linalg.svd(blocks, compute_uv=False)[:, 0]
    return out


def _symbol(family, K=1):
    if callable(family):
        return family
    if family == "heat":
        return lambda lam, t: np.exp(-t * lam)
    if family == "power_heat":
        return lambda lam, t: (t * lam) ** K * np.exp(-t * lam)
    raise ValueError(f"unknown semigroup family {family!r}")


def _saturated(dec, vals):
    ker = dec.eigenvalues <= dec.kernel_tol
    pos = np.abs(vals[~ker])
    return bool(pos.size == 0 or pos.max() <= SATURATION)


def _decay_fit(z, norms, model, params_extra, samples, flags):
    """Fit ``log norm = log C - b z`` and inflate C to the worst ratio."""
    y = np.log(norms)
    order = np.lexsort((y, z))
    z, y = z[order], y[order]
    if z.size < 2 or np.ptp(z) == 0:
        flags = flags + ["degenerate"]
        C = float(np.exp(y.max())) if y.size else 0.0
        return FitReport(model, dict(params_extra, b=0.0, C=C, log_C=float(np.log(C)) if C else
                                     -np.inf, C_regression=C),
                         1.0, int(z.size), 1.0, flags, samples)
    slope, intercept = np.polyfit(z, y, 1)
    b = float(-slope)
    resid = r_squared(y, intercept + slope * z)
    log_ratio = y - (intercept - b * z)
    worst = float(np.exp(log_ratio.max()))
    log_C = float(intercept + log_ratio.max())
    params = dict(params_extra, b=b, C=float(np.exp(log_C)), log_C=log_C,
                  C_regression=float(np.exp(intercept)))
    if b <= 0:
        flags = flags + ["no_decay"]
    return FitReport(model, params, float(resid), int(z.size), worst, flags, samples)


def _pair_table(dec, m, t_grid, pairs, symbol, norm_fn):
    space = dec.space
    xs, ys = pairs[:, 0], pairs[:, 1]
    d = space.dist[xs, ys]
    cols = {k: [] for k in ("t", "x", "y", "d", "z", "norm", "status")}
    omega = m / (m - 1.0)
    saturated_t = []
    for t in t_grid:
        r = t ** (1.0 / m)
        vals = symbol(dec.eigenvalues, t)
        op = WeightedOperator(space, dec.multiplier_matrix(vals), dec.order)
        norms = norm_fn(op, r, xs, ys)
        sat = _saturated(dec, vals)
        if sat:
            saturated_t.append(float(t))
        cols["t"].append(np.full(len(xs), float(t)))
        cols["x"].append(xs)
        cols["y"].append(ys)
        cols["d"].append(d)
        cols["z"].append((d / r) ** omega)
        cols["norm"].append(norms)
        cols["status"].append(np.full(len(xs), "saturated" if sat else "ok", dtype=object))
    cols = {k: np.concatenate(v) for k, v in cols.items()}
    return cols, saturated_t


def _finish_fit(cols, saturated_t, model, params_extra):
    flags = []
    norms = cols["norm"]
    top = norms.max() if norms.size else 0.0
    if top < UNDERFLOW:
        warnings.warn("all sampled norms underflow; fit skipped", stacklevel=3)
        samples = {k: v.tolist() for k, v in cols.items()}
        return FitReport(model, dict(params_extra, b=np.nan, C=np.nan), np.nan,
                         int(norms.size), np.nan, ["underflow"], samples)
    floor = UNDERFLOW * top
    status = cols["status"].copy()
    status[(status == "ok") & (norms < floor)] = "underflow"
    cols["status"] = status
    keep = status == "ok"
    if saturated_t:
        flags.append("saturation")
    if np.any(status == "underflow"):
        flags.append("excluded_underflow")
    samples = {k: v.tolist() for k, v in cols.items()}
    if keep.sum() < 2:
        flags.append("insufficient_samples")
        rep = FitReport(model, dict(params_extra, b=np.nan, C=np.nan), np.nan,
                        int(keep.sum()), np.nan, flags, samples)
    else:
        rep = _decay_fit(cols["z"][keep], norms[keep], model, params_extra, samples, flags)
    rep.extra.update({"saturated_t": saturated_t,
                      "excluded": int((~keep).sum())})
    zpos = cols["d"][keep] / cols["t"][keep] ** (1.0 / params_extra["m"])
    zpos = zpos[zpos > 0]
    if zpos.size and np.log10(zpos.max() / zpos.min()) < 1:
        rep.flags.append("narrow_distance_range")
    return rep


def fit_davies_gaffney(dec, m=None, t_grid=(1.0, 4.0, 16.0), pairs=None, family="heat",
                       K=1, seed=0):
    """Fit Davies-Gaffney constants ``(b, C)`` from two-ball norms.

    For each ``t`` and pair ``(x, y)`` the norm of
    ``chi_B(x,r) S_t chi_B(y,r)`` with ``r = t^(1/m)`` is computed, and
    ``log(norm) = log C - b (d(x,y)/r)^(m/(m-1))`` is fitted by least
    squares. ``C`` is then raised to the largest observed ratio, so the
    reported bound holds on every retained sample. Norms below ``1e-14``
    times the largest norm, and all samples at saturated times, are
    excluded from the fit but kept in ``samples``.

    Parameters
    ----------
    dec : SpectralDecomposition
    m : float, optional
        Order; defaults to ``dec.order``.
    t_grid : sequence of float
    pairs : (k, 2) int array, optional
        Defaults to :func:`sample_pairs`.
    family : {'heat', 'power_heat'} or callable ``(lam, t) -> values``
    """
    m = check_order(dec.order if m is None else m)
    t_grid = [check_positive(float(t), "t") for t in t_grid]
    if not t_grid:
        raise ValueError("t_grid must be non-empty")
    pairs = sample_pairs(dec.space, seed=seed) if pairs is None else np.asarray(pairs, int)
    dist = dec.space.dist

    def norm_fn(op, r, xs, ys):
        return _two_ball_norms(op.symmetrized(), dist, r, xs, ys)

    cols, sat = _pair_table(dec, m, t_grid, pairs, _symbol(family, K), norm_fn)
    name = family if isinstance(family, str) else "custom"
    return _finish_fit(cols, sat, "davies_gaffney", {"m": m, "family": name,
                                                     "exponent": m / (m - 1.0)})


def fit_gge(dec, m=None, p=1, q=np.inf, t_grid=(1.0, 4.0, 16.0), pairs=None, seed=0):
    """Fit generalized Gaussian ``(p, q)`` constants.

    Uses the upper end of :func:`restricted_norm_pq` multiplied by
    ``mu(B(x, r))^(1/p - 1/q)``, so a certified ``C`` also certifies the
    true norms. ``p = q = 2`` is exactly :func:`fit_davies_gaffney`.
    """
    p = check_exponent(p, "p")
    q = check_exponent(q, "q")
    if not p <= 2 <= q:
        raise ValueError(f"fit_gge needs p <= 2 <= q, got p={p}, q={q}")
    if p == 2 and q == 2:
        rep = fit_davies_gaffney(dec, m, t_grid, pairs, seed=seed)
        rep.model = "gge"
        rep.params.update(p=2.0, q=2.0)
        return rep
    m = check_order(dec.order if m is None else m)
    pairs = sample_pairs(dec.space, seed=seed) if pairs is None else np.asarray(pairs, int)
    space = dec.space
    alpha = _inv(p) - _inv(q)

    def norm_fn(op, r, xs, ys):
        vols = space.ball_volumes(r)
        if p == 1 and np.isinf(q):
            # exact (1, inf) norm: largest entry of the mu-kernel
            K = op.matrix / space.weights[None, :]
            return _two_ball_norms(K, space.dist, r, xs, ys, reduce="maxabs") * vols[xs]
        out = np.empty(len(xs))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for i, (x, y) in enumerate(zip(xs, ys)):
                br = restricted_norm_pq(op, ball(space, x, r), ball(space, y, r), p, q,
                                        seed=seed, ascent=False)
                out[i] = br.upper * vols[x] ** alpha
        return out

    cols, sat = _pair_table(dec, m, [float(t) for t in t_grid], pairs,
                            _symbol("heat"), norm_fn)
    return _finish_fit(cols, sat, "gge", {"m": m, "p": p, "q": q,
                                          "exponent": m / (m - 1.0)})


def check_annular_equivalence(dec, t, x, k_max, fit=None, m=None):
    """Compare annular heat norms with the bound derived from two-ball constants.

    The annulus ``A(x, r, k)`` is covered by ``r``-balls around a covering
    net, disjointified, and the two-ball bound is summed over the pieces.
    The closed form ``g(k) = C' exp(-b' k^(m/(m-1)))`` uses
    ``C' = C * (number of net balls)`` and ``b' = b / 2^(m/(m-1))``.
    """
    t = check_positive(t, "t")
    m = check_order(dec.order if m is None else m)
    space = dec.space
    r = t ** (1.0 / m)
    omega = m / (m - 1.0)
    if fit is None:
        pairs = np.stack([np.full(space.n, x), np.arange(space.n)], axis=1)
        fit = fit_davies_gaffney(dec, m, [t], pairs)
    b, C = fit.params["b"], fit.params["C"]
    S = WeightedOperator(space, dec.multiplier_matrix(np.exp(-t * dec.eigenvalues)),
                         dec.order).symmetrized()
    Bx = ball(space, x, r)
    rows = []
    for k in range(int(k_max) + 1):
        A = annulus(space, x, r, k)
        norm = float(np.linalg.norm(S[np.ix_(Bx, A)], 2)) if A.size and Bx.size else 0.0
        derived, count = 0.0, 0
        if A.size:
            outer = max((k + 1) * r, r)
            net = covering_net(space, x, outer, r)
            # each annulus point goes to its nearest net point (within r/2)
            owner = np.argmin(space.dist[np.ix_(net, A)], axis=0)
            used = net[np.unique(owner)]
            count = int(used.size)
            dz = space.dist[x, used]
            derived = float(np.sum(C * np.exp(-b * (dz / r) ** omega)))
        closed = C * max(count, 1) * np.exp(-(b / 2 ** omega) * k ** omega)
        rows.append({"k": k, "size": int(A.size), "norm": norm, "derived_bound": derived,
                     "net_balls": count, "closed_bound": float(closed),
                     "ratio": norm / derived if derived > 0 else (0.0 if norm == 0 else np.inf)})
    sup, wit = sup_with_witness(rows)
    return ExperimentReport("annular_equivalence", {"t": t, "x": int(x), "k_max": int(k_max),
                                                    "m": m},
                            rows, {"b": b, "C": C}, sup, wit)


def check_complex_time(dec, m=None, z_grid=(1 + 4j,), r_grid=None, pairs=None, fit=None,
                       D=None, p=2, q=2, seed=0):
    """Two-ball bounds for ``exp(-zL)`` against the complex-time right-hand side.

    The allowed bound is
    ``C' mu(B(x,r))^-a (1 + r/r_z)^(D a) (|z|/Re z)^(D a) exp(-b' (d/r_z)^w)``
    with ``a = 1/p - 1/q``, ``r_z = (Re z)^(1/m - 1) |z|`` and
    ``w = m/(m-1)``. ``(b', C')`` default to a real-time fit on the same
    pairs at ``t = r^m``; ``D`` defaults to the slope-fit doubling dimension.
    """
    m = check_order(dec.order if m is None else m)
    space = dec.space
    p, q = check_exponent(p, "p"), check_exponent(q, "q")
    z_grid = [complex(z) for z in z_grid]
    if any(z.real <= 0 for z in z_grid):
        raise ValueError("check_complex_time needs Re z > 0 on the grid")
    if r_grid is None:
        r_grid = [abs(z) ** (1.0 / m) for z in z_grid]
    pairs = sample_pairs(space, seed=seed) if pairs is None else np.asarray(pairs, int)
    if fit is None:
        if p == 2 and q == 2:
            fit = fit_davies_gaffney(dec, m, [r ** m for r in r_grid], pairs)
        else:
            fit = fit_gge(dec, m, p, q, [r ** m for r in r_grid], pairs)
    if D is None:
        D = fit_dimension(space).params["D"]
    b, C = fit.params["b"], fit.params["C"]
    a = _inv(p) - _inv(q)
    omega = m / (m - 1.0)
    xs, ys = pairs[:, 0], pairs[:, 1]
    d = space.dist[xs, ys]
    rows = []
    for z in z_grid:
        op = complex_heat(dec, z)
        rz = z.real ** (1.0 / m - 1.0) * abs(z)
        for r in r_grid:
            if p == 2 and q == 2:
                norms = _two_ball_norms(op.symmetrized(), space.dist, r, xs, ys)
            else:
                norms = np.array([restricted_norm_pq(op, ball(space, x, r), ball(space, y, r),
                                                     p, q, ascent=False).upper
                                  for x, y in zip(xs, ys)])
            vol = space.ball_volumes(r)[xs]
            rhs = C * vol ** (-a) * (1 + r / rz) ** (D * a) * (abs(z) / z.real) ** (D * a) \
                * np.exp(-b * (d / rz) ** omega)
            ratio = np.where(rhs > 0, norms / np.where(rhs > 0, rhs, 1.0), np.inf)
            i = int(np.argmax(ratio))
            rows.append({"z": z, "r": float(r), "r_z": float(rz), "x": int(xs[i]),
                         "y": int(ys[i]), "norm": float(norms[i]), "bound": float(rhs[i]),
                         "ratio": float(ratio[i])})
    sup, wit = sup_with_witness(rows)
    return ExperimentReport("complex_time", {"z": z_grid, "r": list(map(float, r_grid)),
                                             "m": m, "p": p, "q": q},
                            rows, {"b": b, "C": C, "D": D}, sup, wit)


def weighted_restricted_norm(op, y, R, s):
    """``||T chi_B(y,1/R)||`` from ``L^2(mu)`` into ``L^2((1 + R d(., y))^s mu)``."""
    op = _as_operator(op)
    R = check_positive(R, "R")
    s = check_positive(s, "s", strict=False)
    space = op.space
    B = ball(space, y, 1.0 / R)
    if B.size == 0:
        return 0.0
    w = (1.0 + R * space.dist[:, y]) ** s
    block = np.sqrt(w)[:, None] * op.symmetrized()[:, B]
    return float(np.linalg.norm(block, 2))


def _default_centres(space, max_centres=64, seed=0):
    if space.n <= max_centres:
        return np.arange(space.n)
    return np.sort(check_random_state(seed).choice(space.n, max_centres, replace=False))


def check_heat_weighted(dec, m=None, R=1.0, tau_grid=(0, 1, 2, 4, 8), s=1.0, ys=None,
                        seed=0):
    """Sup over ``y`` of the weighted norm of ``exp(-(1 + i tau) R^-m L)``
    divided by ``(1 + tau^2)^(s/4)``, for each ``tau``."""
    m = check_order(dec.order if m is None else m)
    ys = _default_centres(dec.space, seed=seed) if ys is None else np.asarray(ys, int)
    rows = []
    for tau in tau_grid:
        op = complex_heat(dec, (1 + 1j * tau) * R ** (-m))
        for y in ys:
            v = weighted_restricted_norm(op, int(y), R, s)
            rows.append({"tau": float(tau), "y": int(y), "norm": v,
                         "ratio": v / (1 + tau ** 2) ** (s / 4.0)})
    sup, wit = sup_with_witness(rows)
    return ExperimentReport("heat_weighted", {"R": R, "tau": list(map(float, tau_grid)),
                                              "s": s, "m": m}, rows, {}, sup, wit)


def check_windowed_sobolev(dec, m=None, F=None, s=1.0, eps=0.1, R=1.0, y=0, resolution=4096):
    """Ratio of the weighted norm of ``G(L^(1/m))`` to ``||G(R .)||_{H^((s+1)/2+eps)_2}``.

    ``G = omega(./R) F`` is ``F`` windowed to ``[R/4, R]``. Returns
    ``(ratio, details)``; ``ratio`` is NaN when ``G`` vanishes.
    """
    m = check_order(dec.order if m is None else m)
    R = check_positive(R, "R")
    f = as_function(F if F is not None else (lambda lam: np.ones_like(lam)))

    def windowed(lam):
        lam = np.asarray(lam, dtype=float)
        return OMEGA(lam / R) * f(lam)

    g = SampledProfile.sample(lambda u: windowed(R * u), 0.25, 1.0, resolution)
    details = {"R": R, "s": s, "eps": eps, "y": int(y), "m": m}
    if not np.any(np.abs(g.values) > 0):
        details["flag"] = "vanishing"
        return float("nan"), details
    vals = windowed(np.maximum(dec.eigenvalues, 0.0) ** (1.0 / m))
    op = WeightedOperator(dec.space, dec.multiplier_matrix(vals), dec.order)
    left = weighted_restricted_norm(op, y, R, s)
    right = bessel_norm(g, (s + 1) / 2.0 + eps, 2)
    details.update(left=left, right=right)
    return left / right, details


class DaviesGaffney(BaseEstimator):
    """Estimator wrapper around :func:`fit_davies_gaffney`.

    Examples
    --------
    >>> from specmult.space import build_space
    >>> from specmult.operator import build_operator
    >>> dg = DaviesGaffney(t_grid=(1.0, 4.0)).fit(build_operator(build_space("cycle", n=32)))
    >>> dg.b_ > 0
    True
    """

    def __init__(self, m=None, t_grid=(1.0, 4.0, 16.0), family="heat", seed=0):
        self.m = m
        self.t_grid = t_grid
        self.family = family
        self.seed = seed

    def fit(self, op, y=None):
        dec = op if isinstance(op, SpectralDecomposition) else decompose(op)
        self.report_ = fit_davies_gaffney(dec, self.m, self.t_grid, family=self.family,
                                          seed=self.seed)
        self.b_ = self.report_.params["b"]
        self.C_ = self.report_.params["C"]
        return self

    def bound(self, d, t):
        """Certified bound ``C exp(-b (d / t^(1/m))^(m/(m-1)))``."""
        check_is_fitted(self, "report_")
        m = self.report_.params["m"]
        return self.C_ * np.exp(-self.b_ * (np.asarray(d) / t ** (1.0 / m)) ** (m / (m - 1.0)))
