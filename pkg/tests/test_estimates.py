import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specmult import (DaviesGaffney, MultiplierProfile, WeightedOperator, build_operator,
                      build_space, decompose, heat)
from specmult.estimates import (NormBracket, check_annular_equivalence, check_complex_time,
                                check_heat_weighted, check_windowed_sobolev, fit_davies_gaffney,
                                fit_gge, restricted_norm_22, restricted_norm_pq, sample_pairs)


@pytest.fixture(scope="module")
def cyc32():
    return decompose(build_operator(build_space("cycle", n=32)))


def block(op, E1, E2, p, q):
    """Weighted matrix of chi_E1 T chi_E2 from L^p to L^q."""
    w = op.space.weights
    E1, E2 = np.asarray(E1), np.asarray(E2)
    return (w[E1] ** (1 / q))[:, None] * op.matrix[np.ix_(E1, E2)] * (w[E2] ** (-1 / p))[None, :]


def test_restricted_22_diagonal():
    sp = build_space("path", n=3, weights=[1.0, 4.0, 2.0])
    op = WeightedOperator(sp, np.diag([1.0, 2.0, 3.0]))
    assert restricted_norm_22(op, [0, 1], [0, 1]) == pytest.approx(2.0)
    assert restricted_norm_22(op, [0], [2]) == 0


def test_restricted_22_is_weighted_singular_value():
    rng = np.random.default_rng(0)
    sp = build_space("path", n=6, weights="random:0")
    op = WeightedOperator(sp, rng.standard_normal((6, 6)))
    E1, E2 = [0, 2, 5], [1, 3]
    ref = np.linalg.svd(block(op, E1, E2, 2, 2), compute_uv=False)[0]
    assert restricted_norm_22(op, E1, E2) == pytest.approx(ref)


def test_pq_exact_column_norms_for_p1():
    rng = np.random.default_rng(1)
    sp = build_space("path", n=5, weights="random:2")
    op = WeightedOperator(sp, rng.standard_normal((5, 5)))
    A = block(op, [0, 1, 2], [2, 3, 4], 1, 3)
    ref = np.max(np.sum(np.abs(A) ** 3, axis=0) ** (1 / 3))
    br = restricted_norm_pq(op, [0, 1, 2], [2, 3, 4], 1, 3)
    assert br.exact and br.lower == pytest.approx(ref) and br.upper == pytest.approx(ref)


def test_pq_exact_row_norms_for_q_inf():
    rng = np.random.default_rng(3)
    sp = build_space("path", n=5)
    op = WeightedOperator(sp, rng.standard_normal((5, 5)))
    A = op.matrix[:3][:, 1:]
    ref = np.max(np.sum(np.abs(A) ** 3, axis=1) ** (1 / 3))  # dual exponent of 1.5
    br = restricted_norm_pq(op, [0, 1, 2], [1, 2, 3, 4], 1.5, np.inf)
    assert br.exact and br.lower == pytest.approx(ref)


def test_pq_bracket_fields():
    br = NormBracket(1.0, 2.0, "interpolated", None)
    assert not br.exact and br.gap == pytest.approx(2.0)
    assert set(br.to_dict()) >= {"lower", "upper", "method"}


def test_pq_p_greater_than_q_warns():
    op = WeightedOperator(build_space("path", n=3), np.eye(3))
    with pytest.warns(UserWarning):
        br = restricted_norm_pq(op, [0, 1], [0, 1], 3, 1.5)
    assert br.upper == np.inf


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.floats(1.05, 3.0), q=st.floats(1.05, 6.0))
def test_pq_bracket_contains_random_ratios(seed, p, q):
    if p > q:
        p, q = q, p
    rng = np.random.default_rng(seed)
    sp = build_space("path", n=6, weights="random:%d" % (seed % 97))
    op = WeightedOperator(sp, rng.standard_normal((6, 6)))
    E1, E2 = [0, 1, 2, 3], [2, 3, 4, 5]
    br = restricted_norm_pq(op, E1, E2, p, q, seed=seed)
    assert br.lower <= br.upper * (1 + 1e-9)
    w = sp.weights
    for _ in range(20):
        x = rng.standard_normal(len(E2))
        num = np.sum(w[E1] * np.abs(op.matrix[np.ix_(E1, E2)] @ x) ** q) ** (1 / q)
        den = np.sum(w[E2] * np.abs(x) ** p) ** (1 / p)
        assert num / den <= br.upper * (1 + 1e-9)


def test_sample_pairs_small_space_is_exhaustive(cyc32):
    pairs = sample_pairs(cyc32.space)
    assert len(pairs) == 32 * 32


def test_sample_pairs_deterministic():
    sp = build_space("cycle", n=200)
    a, b = sample_pairs(sp, 100, seed=4), sample_pairs(sp, 100, seed=4)
    np.testing.assert_array_equal(a, b)
    assert len(a) <= 100 + 200


def test_dg_fit_certifies_every_sample(cyc32):
    rep = fit_davies_gaffney(cyc32, 2)
    b, C = rep.params["b"], rep.params["C"]
    assert b > 0 and rep.residual >= 0.9 and rep.flags == []
    cols = rep.samples
    ok = np.array(cols["status"]) == "ok"
    z, norm = np.array(cols["z"])[ok], np.array(cols["norm"])[ok]
    assert np.all(norm <= C * np.exp(-b * z) * (1 + 1e-9))


def test_dg_estimator(cyc32):
    est = DaviesGaffney(m=2).fit(cyc32)
    assert est.b_ == pytest.approx(est.report_.params["b"])
    assert est.bound(0.0, 1.0) == pytest.approx(est.C_)
    assert est.bound(10.0, 1.0) < est.bound(5.0, 1.0)


def test_dg_single_point_degenerate():
    sp = build_space("path", n=1)
    dec = decompose(build_operator(sp, "schroedinger", [1.0]))
    assert "degenerate" in fit_davies_gaffney(dec, 2).flags


def test_dg_saturation_flag(cyc32):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = fit_davies_gaffney(cyc32, 2, (1e5,))
    assert "saturation" in rep.flags


def test_gge_one_to_inf(cyc32):
    rep = fit_gge(cyc32, 2, 1, np.inf)
    assert rep.model == "gge" and rep.params["b"] > 0


def test_gge_22_is_davies_gaffney(cyc32):
    a, b = fit_gge(cyc32, 2, 2, 2), fit_davies_gaffney(cyc32, 2)
    assert a.model == "gge"
    assert a.params["b"] == pytest.approx(b.params["b"])


def test_annular_equivalence(cyc32):
    rep = check_annular_equivalence(cyc32, 1.0, 0, 6)
    assert rep.passed and rep.sup_ratio <= 1 + 1e-12
    assert all(s["norm"] <= s["closed_bound"] * (1 + 1e-12) for s in rep.samples)


def test_complex_time(cyc32):
    rep = check_complex_time(cyc32, 2)
    assert rep.passed and np.isfinite(rep.sup_ratio)


def test_heat_weighted(cyc32):
    rep = check_heat_weighted(cyc32, 2)
    assert rep.passed
    assert all(np.isfinite(s["ratio"]) for s in rep.samples)


def test_windowed_sobolev(cyc32):
    ratio, det = check_windowed_sobolev(cyc32, 2, MultiplierProfile.heat(1.0))
    assert 0 < ratio < np.inf and det["left"] <= det["right"]


def test_heat_two_ball_norm_bounded_by_one(cyc32):
    assert restricted_norm_22(heat(cyc32, 2.0), [0, 1], [10, 11]) <= 1
