"""End-to-end checks: annular decay criteria, Plancherel conditions and
bounded-spread multiplier experiments.

Experiments compare computed quantities with the right-hand sides of the
corresponding inequalities. Since those carry non-explicit constants, the
multiplier experiments report the spread ``max/min`` of the ratios over a
family and pass when it stays under a configured threshold.
"""
import warnings

import numpy as np

from ._validation import check_exponent, check_order, check_positive, check_random_state
from .estimates import fit_gge, restricted_norm_pq, sample_pairs
from .funcspace import OMEGA, MultiplierProfile, as_function, hoermander_norm, nq_norm
from .hardy import default_grid, hardy_norm, molecule_family, random_family
from .operator import WeightedOperator, regularizer_symbol
from .reports import ExperimentReport, FitReport, r_squared, sup_with_witness
from .space import Ball, ball, dyadic_annulus, fit_dimension, lp_norm, max_dyadic_index

UNDERFLOW = 1e-14
H1_THRESHOLD = 10.0
LP_THRESHOLD = 10.0
HPLP_THRESHOLD = 100.0


def _dimension(space, D):
    if D is not None:
        return float(D)
    return float(fit_dimension(space).params["D"]) if space.n > 1 else 0.0


def _value_at_zero(F):
    if isinstance(F, MultiplierProfile):
        return F.value_at_zero
    return complex(as_function(F)(np.zeros(1))[0])


def _sym_op(dec, values):
    return WeightedOperator(dec.space, dec.multiplier_matrix(values), dec.order).symmetrized()


def _block_norm(S, rows, cols):
    if rows.size == 0 or cols.size == 0:
        return 0.0
    return float(np.linalg.norm(S[np.ix_(rows, cols)], 2))


def _annuli(space, B):
    return [dyadic_annulus(space, B, j) for j in range(max_dyadic_index(space, B) + 1)]


def default_balls(space, radii=(1.5, 2.5, 4.5), center=0):
    return [Ball(center, float(r)) for r in radii]


def _regularized_values(dec, F, m, M, r):
    f = as_function(F)
    lam = dec.eigenvalues
    return np.asarray(f(lam), dtype=complex) * (1.0 - np.exp(-r ** m * lam)) ** M


def _log_fit(x, y, base):
    slope, intercept = np.polyfit(x, y, 1)
    resid = r_squared(y, intercept + slope * x)
    excess = float(np.max(y - (intercept + slope * x)))
    return float(slope), float(intercept + excess), float(resid), base ** excess


def check_multiplier_decay(dec, F, m=None, M=2, balls=None, j_range=None, D=None):
    """Decay of ``||chi_U_j(B) F(L)(I - exp(-r^m L))^M chi_B||`` in ``j``.

    ``j = 1`` is skipped. ``log2(norm) = log2(C_F) - delta j`` is fitted
    over all balls and ``C_F`` is raised to the largest observed ratio.
    ``params['delta_gt_half_D']`` records whether ``delta > D/2``.
    """
    m = check_order(dec.order if m is None else m)
    space = dec.space
    D = _dimension(space, D)
    if not M > D / m:
        warnings.warn(f"M={M} does not exceed D/m={D / m:.3g}", stacklevel=2)
    balls = default_balls(space) if balls is None else balls
    cols = {"center": [], "radius": [], "j": [], "norm": [], "status": []}
    for B in balls:
        S = _sym_op(dec, _regularized_values(dec, F, m, M, B.radius))
        U = _annuli(space, B)
        js = range(len(U)) if j_range is None else j_range
        for j in js:
            if j == 1:
                continue
            Uj = dyadic_annulus(space, B, j)
            v = _block_norm(S, Uj, U[0])
            cols["center"].append(B.center)
            cols["radius"].append(B.radius)
            cols["j"].append(int(j))
            cols["norm"].append(v)
            cols["status"].append("empty" if Uj.size == 0 else "ok")
    norms = np.asarray(cols["norm"])
    top = norms.max() if norms.size else 0.0
    status = np.asarray(cols["status"], dtype=object)
    status[(status == "ok") & (norms < UNDERFLOW * max(top, UNDERFLOW))] = "underflow"
    cols["status"] = status.tolist()
    keep = status == "ok"
    params = {"D": D, "M": M, "m": m}
    flags = []
    if keep.sum() < 2 or np.ptp(np.asarray(cols["j"])[keep]) == 0:
        flags.append("underflow" if top < UNDERFLOW else "insufficient_samples")
        params.update(delta=np.nan, C_F=np.nan, delta_gt_half_D=False)
        return FitReport("multiplier_decay", params, np.nan, int(keep.sum()), np.nan, flags, cols)
    j = np.asarray(cols["j"], float)[keep]
    slope, log2C, resid, worst = _log_fit(j, np.log2(norms[keep]), 2.0)
    delta = -slope
    params.update(delta=delta, C_F=2.0 ** log2C, log2_C_F=log2C,
                  delta_gt_half_D=bool(delta > D / 2.0))
    return FitReport("multiplier_decay", params, resid, int(keep.sum()), worst, flags, cols)


def check_multiplier_annular(dec, F, m=None, M=2, ball=None, ij_range=None, fit=None, D=None):
    """Annulus-to-annulus norms against ``C_F 2^(iD) 2^(-|j-i| delta)``.

    ``(C_F, delta)`` come from :func:`check_multiplier_decay` unless ``fit`` is given.
    The reported ``sup_ratio`` is the constant ``C`` this data certifies.
    """
    m = check_order(dec.order if m is None else m)
    space = dec.space
    D = _dimension(space, D)
    B = ball if ball is not None else Ball(0, 2.5)
    if fit is None:
        fit = check_multiplier_decay(dec, F, m, M, [B], D=D)
    C_F, delta = fit.params["C_F"], fit.params["delta"]
    S = _sym_op(dec, _regularized_values(dec, F, m, M, B.radius))
    U = _annuli(space, B)
    idx = range(len(U)) if ij_range is None else ij_range
    idx = [i for i in idx if i != 1]
    rows = []
    for i in idx:
        Ui = dyadic_annulus(space, B, i)
        for j in idx:
            v = _block_norm(S, dyadic_annulus(space, B, j), Ui)
            bound = C_F * 2.0 ** (i * D) * 2.0 ** (-abs(j - i) * delta)
            rows.append({"i": int(i), "j": int(j), "norm": v, "bound": float(bound),
                         "ratio": v / bound if bound > 0 else np.inf})
    sup, wit = sup_with_witness(rows)
    return ExperimentReport("multiplier_annular", {"ball": [B.center, B.radius], "M": M, "m": m,
                                             "ij": idx},
                            rows, {"C_F": C_F, "delta": delta, "D": D, "C": sup}, sup, wit,
                            passed=bool(np.isfinite(sup)))


def check_regularizer_decay(dec, m=None, M=2, K=1, r=2.0, ball=None, ij_range=None):
    """Annular norms of ``P_{m,M,r}(L)^K`` fitted against ``exp(-b 2^|j-i|)``.

    The ball defaults to ``B(0, r)``. ``extra['gap_max']`` lists the largest
    norm per gap ``|j-i|`` and ``extra['l2_bound']`` is ``(2^M/m)^K``.
    """
    m = check_order(dec.order if m is None else m)
    r = check_positive(r, "r")
    space = dec.space
    B = ball if ball is not None else Ball(0, r)
    vals = regularizer_symbol(dec.eigenvalues, m, int(M), r) ** int(K)
    S = _sym_op(dec, vals)
    U = _annuli(space, B)
    idx = list(range(len(U)) if ij_range is None else ij_range)
    cols = {"i": [], "j": [], "gap": [], "norm": [], "status": []}
    for i in idx:
        Ui = dyadic_annulus(space, B, i)
        for j in idx:
            Uj = dyadic_annulus(space, B, j)
            cols["i"].append(i)
            cols["j"].append(j)
            cols["gap"].append(abs(j - i))
            cols["norm"].append(_block_norm(S, Uj, Ui))
            cols["status"].append("ok" if Ui.size and Uj.size else "empty")
    norms = np.asarray(cols["norm"])
    gaps = np.asarray(cols["gap"])
    top = norms.max() if norms.size else 0.0
    status = np.asarray(cols["status"], dtype=object)
    status[(status == "ok") & (norms < UNDERFLOW * max(top, UNDERFLOW))] = "underflow"
    cols["status"] = status.tolist()
    keep = status == "ok"
    gap_max = {int(g): float(norms[gaps == g].max()) for g in np.unique(gaps)}
    l2_bound = (2.0 ** M / m) ** K
    extra = {"gap_max": gap_max, "l2_bound": l2_bound,
             "l2_ok": bool(gap_max.get(0, 0.0) <= l2_bound),
             "ball": [B.center, B.radius], "r": r}
    params = {"m": m, "M": M, "K": K}
    if keep.sum() < 2 or np.ptp(gaps[keep]) == 0:
        params.update(b=np.nan, C=np.nan)
        return FitReport("regularizer_decay", params, np.nan, int(keep.sum()), np.nan,
                         ["insufficient_samples"], cols, extra)
    x = 2.0 ** gaps[keep].astype(float)
    slope, logC, resid, worst = _log_fit(x, np.log(norms[keep]), np.e)
    params.update(b=-slope, C=float(np.exp(logC)), log_C=logC)
    flags = [] if -slope > 0 else ["no_decay"]
    return FitReport("regularizer_decay", params, resid, int(keep.sum()), worst, flags, cols,
                     extra)


def _window(G, scale, lo, hi):
    """``lam -> G(lam/scale)`` on ``lo <= lam/scale < hi``, zero elsewhere."""
    g = as_function(G)

    def F(lam):
        u = np.asarray(lam, dtype=float) / scale
        inside = (u >= lo) & (u < hi)
        out = np.zeros(u.shape, dtype=complex)
        if np.any(inside):
            out[inside] = g(u[inside])
        return out

    return F


def _lq_on_unit(g, q, n=4097):
    u = np.linspace(0.0, 1.0, n)
    v = np.abs(g(u))
    if np.isinf(q):
        return float(v.max())
    return float(np.trapezoid(v ** q, u) ** (1.0 / q))


def default_plancherel_family():
    return [MultiplierProfile.dyadic_random(seed=k) for k in range(3)]


def check_plancherel(dec, m=None, q=np.inf, family=None, R_grid=(1.0, 2.0, 4.0), ys=None,
                     seed=0):
    """Sup over ``(G, R, y)`` of ``||F(L^(1/m)) chi_B(y,1/R)|| / ||G||_{L^q[0,1]}``.

    ``F(lam) = G(lam/R)`` on ``[0, R]``, zero elsewhere, so ``F(R .) = G``
    on ``[0, 1]``. For ``q = inf`` the denominator also includes ``|F|`` at
    the spectral points, and the experiment passes iff the sup is at most
    ``1 + 1e-10``.
    """
    m = check_order(dec.order if m is None else m)
    q = check_exponent(q, "q")
    space = dec.space
    family = default_plancherel_family() if family is None else family
    if ys is None:
        rng = check_random_state(seed)
        ys = np.sort(rng.choice(space.n, min(5, space.n), replace=False))
    root = dec.eigenvalues ** (1.0 / m)
    rows = []
    for fi, G in enumerate(family):
        for R in R_grid:
            F = _window(G, R, 0.0, 1.0)
            vals = F(root)
            den = _lq_on_unit(lambda u: F(R * u), q)
            if np.isinf(q) and vals.size:
                den = max(den, float(np.abs(vals).max()))
            if den == 0:
                continue
            S = _sym_op(dec, vals)
            for y in ys:
                B = ball(space, int(y), 1.0 / R)
                num = _block_norm(S, np.arange(space.n), B)
                rows.append({"family": fi, "R": float(R), "y": int(y), "numerator": num,
                             "denominator": den, "ratio": num / den})
    sup, wit = sup_with_witness(rows)
    threshold = 1 + 1e-10 if np.isinf(q) else np.inf
    return ExperimentReport("plancherel", {"q": q, "R": list(map(float, R_grid)),
                                           "y": [int(y) for y in ys], "m": m,
                                           "family": len(family)},
                            rows, {}, sup, wit, threshold,
                            bool(not rows or sup <= threshold), seed)


def check_plancherel_variant(dec, m=None, q=2.0, kappa=1, N_grid=(2, 4, 8), family=None,
                             ys=None, seed=0):
    """Sup over ``(G, N, y)`` of ``||F(L^(1/m)) chi_B(y,1/N)|| / ||F(N .)||_{N^kappa, q}``.

    ``F(lam) = G(lam/N)`` for ``lam/N`` in ``[-1/N, 1 + 1/N)``, so that
    ``supp F`` lies in ``[-1, N+1]``.
    """
    m = check_order(dec.order if m is None else m)
    q = check_exponent(q, "q")
    if not 2 <= q < np.inf or int(kappa) != kappa or kappa < 1:
        raise ValueError("need q in [2, inf) and a positive integer kappa")
    space = dec.space
    family = default_plancherel_family() if family is None else family
    if ys is None:
        rng = check_random_state(seed)
        ys = np.sort(rng.choice(space.n, min(5, space.n), replace=False))
    root = dec.eigenvalues ** (1.0 / m)
    rows = []
    for fi, G in enumerate(family):
        for N in N_grid:
            F = _window(G, N, -1.0 / N, 1.0 + 1.0 / N)
            den = nq_norm(lambda u: F(N * np.asarray(u)), int(N) ** int(kappa), q)
            if den == 0:
                continue
            S = _sym_op(dec, F(root))
            for y in ys:
                B = ball(space, int(y), 1.0 / N)
                num = _block_norm(S, np.arange(space.n), B)
                rows.append({"family": fi, "N": int(N), "y": int(y), "numerator": num,
                             "denominator": den, "ratio": num / den})
    sup, wit = sup_with_witness(rows)
    return ExperimentReport("plancherel_variant", {"q": q, "kappa": int(kappa),
                                                   "N": [int(N) for N in N_grid],
                                                   "y": [int(y) for y in ys], "m": m},
                            rows, {}, sup, wit, np.inf, True, seed)


def check_piecewise_bound(dec, F, m=None, M=2, s=1.2, ball=None, j_range=(2, 6),
                          l_range=(-4, 4), D=None):
    """Dyadic pieces ``omega(2^-l lam) F(lam) (1 - exp(-(r lam)^m))^M`` of ``F(L^(1/m))``.

    Each annular norm is divided by
    ``C_{omega,s} 2^(-j s') (2^l r)^(-s') min{1, (2^l r)^(mM)} max{1, (2^l r)^(D/2)}``
    with ``s' = (D/2 + s)/2`` and ``C_{omega,s} = sup_n ||omega F(2^n .)||_{H^(s+1/2)_2}``.
    The sup ratio is the smallest certifying constant ``C``.
    """
    m = check_order(dec.order if m is None else m)
    space = dec.space
    D = _dimension(space, D)
    if not s > D / 2.0:
        warnings.warn(f"s={s} does not exceed D/2={D / 2:.3g}", stacklevel=2)
    sp = (D / 2.0 + s) / 2.0
    B = ball if ball is not None else Ball(0, 2.5)
    r = B.radius
    f = as_function(F)
    C_ws = hoermander_norm(F, s + 0.5, 2)
    root = dec.eigenvalues ** (1.0 / m)
    base = np.asarray(f(root), dtype=complex) * (1.0 - np.exp(-(r * root) ** m)) ** M
    B0 = dyadic_annulus(space, B, 0)
    J = max_dyadic_index(space, B)
    rows = []
    for l in range(int(l_range[0]), int(l_range[1]) + 1):
        S = _sym_op(dec, OMEGA(root * 2.0 ** (-l)) * base)
        x = 2.0 ** l * r
        factor = x ** (-sp) * min(1.0, x ** (m * M)) * max(1.0, x ** (D / 2.0))
        for j in range(int(j_range[0]), min(int(j_range[1]), J) + 1):
            v = _block_norm(S, dyadic_annulus(space, B, j), B0)
            bound = C_ws * 2.0 ** (-j * sp) * factor
            ratio = v / bound if bound > 0 else (0.0 if v == 0 else np.inf)
            rows.append({"l": l, "j": j, "norm": v, "bound": float(bound), "ratio": ratio})
    sup, wit = sup_with_witness(rows)
    if not rows:
        sup = 0.0
    return ExperimentReport("piecewise_bound", {"l": list(l_range), "j": list(j_range),
                                                "s": s, "M": M, "m": m,
                                                "ball": [B.center, r]},
                            rows, {"C": sup, "C_omega_s": C_ws, "s_prime": sp, "D": D},
                            sup, wit, np.inf, bool(np.isfinite(sup)))


def default_multiplier_family(taus=(1, 2, 4, 8)):
    return [MultiplierProfile.imaginary_power(t) for t in taus]


def _spread(ratios):
    r = np.asarray([x for x in ratios if np.isfinite(x) and x > 0])
    return float(r.max() / r.min()) if r.size else np.nan


def _spread_report(name, rows, grid, fitted, threshold, seed, flags):
    spread = _spread([row["ratio"] for row in rows])
    sup, wit = sup_with_witness(rows)
    fitted = dict(fitted, spread=spread)
    passed = bool(np.isfinite(spread) and spread <= threshold)
    return ExperimentReport(name, grid, rows, fitted, sup, wit, threshold, passed, seed, flags)


def _hoermander_denominator(F, s, q):
    return hoermander_norm(F, s, q) + abs(_value_at_zero(F))


def experiment_h1_multiplier(dec, family=None, s=1.1, q=2, D=None, threshold=H1_THRESHOLD,
                             seed=0):
    """Ratios ``est ||F(L)||_{H^1 -> H^1} / (||F||_{Hoermander} + |F(0)|)``.

    The numerator is a family-sup lower estimate over molecules and random
    kernel-projected functions; the test family and its Hardy norms are
    shared by every multiplier.
    """
    q = check_exponent(q, "q")
    space = dec.space
    D = _dimension(space, D)
    flags = []
    need = (D + 1) / 2.0 if q == 2 else max(D / 2.0, 1.0 / q)
    if not s > need:
        warnings.warn(f"s={s} does not exceed the regularity threshold {need:.3g}",
                      stacklevel=2)
        flags.append("regularity_below_threshold")
    family = default_multiplier_family() if family is None else family
    grid = default_grid(dec)
    mols = np.stack([a for a, _ in molecule_family(dec)], axis=1)
    tests = np.hstack([mols, random_family(dec, 8, seed)])
    den_h = np.atleast_1d(hardy_norm(dec, tests, 1, grid))
    keep = den_h > 1e-12
    tests, den_h = tests[:, keep], den_h[keep]
    rows = []
    for k, F in enumerate(family):
        vals = np.asarray(as_function(F)(dec.eigenvalues), dtype=complex)
        T = dec.multiplier_matrix(vals)
        num_h = np.atleast_1d(hardy_norm(dec, T @ tests, 1, grid))
        est = float(np.max(num_h / den_h))
        den = _hoermander_denominator(F, s, q)
        if den == 0:
            continue
        rows.append({"index": k, "profile": _describe(F), "h1_estimate": est,
                     "hoermander": den, "ratio": est / den})
    return _spread_report("h1_multiplier", rows, {"s": s, "q": q, "family": len(family)},
                          {"D": D, "test_functions": int(keep.sum()), "label": "est-LB"},
                          threshold, seed, flags)


def _describe(F):
    return F.describe() if isinstance(F, MultiplierProfile) else "callable"


def gge_exponent(dec, seed=0, n_pairs=512):
    """``p0`` from a ``(1, inf)`` generalized Gaussian fit: 1 if certified, else 2."""
    pairs = sample_pairs(dec.space, n_pairs, seed, all_below=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = fit_gge(dec, None, 1, np.inf, (1.0, 4.0, 16.0), pairs)
    ok = rep.ok and np.isfinite(rep.params.get("b", np.nan)) and rep.params["b"] > 0
    return (1.0 if ok else 2.0), rep


def experiment_lp_multiplier(dec, family=None, p=1.5, s=1.1, q=2, D=None,
                             threshold=LP_THRESHOLD, seed=0):
    """Ratios ``||F(L)||_{p -> p} (lower bracket) / (||F||_{Hoermander} + |F(0)|)``.

    The exact ``p = 2`` ratio ``max |F(lambda_i)| / (...)`` is recorded per
    multiplier as an anchor, and the ``p0`` of a fitted ``(1, inf)``
    estimate is embedded in the report.
    """
    p = check_exponent(p, "p")
    q = check_exponent(q, "q")
    if not 1 < p <= 2:
        raise ValueError(f"experiment_lp_multiplier needs p in (1, 2], got {p}")
    space = dec.space
    D = _dimension(space, D)
    flags = []
    need = (D + 1) * abs(1.0 / p - 0.5)
    if not s > need:
        warnings.warn(f"s={s} does not exceed (D+1)|1/p-1/2|={need:.3g}", stacklevel=2)
        flags.append("regularity_below_threshold")
    p0, gge = gge_exponent(dec, seed)
    if not p > p0 and p0 > 1:
        flags.append("p_not_above_p0")
    family = default_multiplier_family() if family is None else family
    everything = np.arange(space.n)
    rows = []
    for k, F in enumerate(family):
        vals = np.asarray(as_function(F)(dec.eigenvalues), dtype=complex)
        op = WeightedOperator(space, dec.multiplier_matrix(vals), dec.order)
        br = restricted_norm_pq(op, everything, everything, p, p, seed=seed)
        den = _hoermander_denominator(F, s, q)
        if den == 0:
            continue
        rows.append({"index": k, "profile": _describe(F), "lower": br.lower,
                     "upper": br.upper, "hoermander": den, "ratio": br.lower / den,
                     "ratio_p2": float(np.abs(vals).max()) / den})
    return _spread_report("lp_multiplier", rows, {"p": p, "s": s, "q": q,
                                                  "family": len(family)},
                          {"D": D, "p0": p0, "gge_b": gge.params.get("b")},
                          threshold, seed, flags)


def check_hp_lp(dec, p=1.5, trials=50, seed=0, threshold=HPLP_THRESHOLD):
    """Spread of ``hardy_norm(f, p) / ||f||_p`` over random kernel-projected ``f``."""
    p = check_exponent(p, "p")
    flags = []
    if p < 2:
        p0, _ = gge_exponent(dec, seed)
    else:
        p0 = 1.0
    if not p > p0:
        warnings.warn(f"p={p} is not above the fitted p0={p0}", stacklevel=2)
        flags.append("p_not_above_p0")
    F = random_family(dec, int(trials), seed)
    h = np.atleast_1d(hardy_norm(dec, F, p))
    rows = []
    for i in range(F.shape[1]):
        lpn = lp_norm(dec.space, F[:, i], p)
        if lpn == 0:
            continue
        rows.append({"trial": i, "hardy": float(h[i]), "lp": lpn, "ratio": float(h[i]) / lpn})
    return _spread_report("hp_lp", rows, {"p": p, "trials": int(trials)}, {"p0": p0},
                          threshold, seed, flags)
