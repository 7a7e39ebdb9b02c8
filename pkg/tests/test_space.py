import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specmult import Ball, ConstructionError, DoublingDimension, build_space, product_space
from specmult.space import (MetricMeasureSpace, annulus, ball, check_volume_comparability,
                            covering_net, covering_report, dyadic_annulus, fit_dimension,
                            lp_norm, max_dyadic_index)


def test_path_distances_are_index_gaps():
    sp = build_space("path", n=6)
    i = np.arange(6)
    np.testing.assert_array_equal(sp.dist, np.abs(i[:, None] - i[None, :]))
    assert sp.diameter == 5


def test_cycle_distances_wrap():
    sp = build_space("cycle", n=8)
    assert sp.dist[0, 7] == 1
    assert sp.dist[0, 4] == 4
    assert sp.diameter == 4


def test_grid2d_is_manhattan():
    sp = build_space("grid2d", nx=3, ny=4)
    assert sp.n == 12
    assert sp.diameter == 2 + 3


def test_binary_tree_depth2():
    sp = build_space("binary_tree", depth=2)
    assert sp.n == 7
    # two leaves in different subtrees are four edges apart
    assert sp.diameter == 4


def test_sierpinski_level1_is_three_triangles():
    sp = build_space("sierpinski", level=1)
    assert sp.n == 6
    assert sp.diameter == 2


def test_weights_schemes():
    sp = build_space("path", n=4, weights="degree")
    np.testing.assert_array_equal(sp.weights, [1, 2, 2, 1])
    assert sp.total_mass == 6
    a = build_space("path", n=5, weights="random:3").weights
    b = build_space("path", n=5, weights="random:3").weights
    np.testing.assert_array_equal(a, b)
    assert np.all(a > 0)


@pytest.mark.parametrize("kwargs", [
    {"weights": [1.0, -1.0, 1.0]},
    {"weights": [1.0, 0.0, 1.0]},
    {"weights": [1.0, 2.0]},
])
def test_bad_weights_rejected(kwargs):
    with pytest.raises(ConstructionError):
        build_space("path", n=3, **kwargs)


def test_non_metric_rejected():
    d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float)
    with pytest.raises(ConstructionError):
        MetricMeasureSpace(d, np.ones(3))


def test_unknown_family():
    with pytest.raises(ConstructionError):
        build_space("torus", n=4)


def test_balls_are_open():
    sp = build_space("path", n=10)
    np.testing.assert_array_equal(ball(sp, 5, 2), [4, 5, 6])
    np.testing.assert_array_equal(ball(sp, 5, 2.5), [3, 4, 5, 6, 7])
    np.testing.assert_array_equal(Ball(5, 1.0).points(sp), [5])
    assert Ball(5, 1.5).dilate(2) == Ball(5, 3.0)


def test_annulus_shell():
    sp = build_space("path", n=20)
    # A(x, r, k) = B(x, (k+1) r) minus B(x, k r)
    np.testing.assert_array_equal(annulus(sp, 10, 2, 1), [7, 8, 12, 13])


def test_dyadic_annulus_enumeration():
    sp = build_space("path", n=17)
    B = Ball(8, 1.5)
    np.testing.assert_array_equal(dyadic_annulus(sp, B, 0), [7, 8, 9])
    np.testing.assert_array_equal(dyadic_annulus(sp, B, 1), [6, 10])
    np.testing.assert_array_equal(dyadic_annulus(sp, B, 2), [3, 4, 5, 11, 12, 13])


def test_dyadic_annuli_partition_the_space():
    sp = build_space("cycle", n=40)
    B = Ball(3, 2.5)
    J = max_dyadic_index(sp, B)
    parts = [dyadic_annulus(sp, B, j) for j in range(J + 1)]
    allpts = np.concatenate(parts)
    assert len(allpts) == sp.n
    assert set(allpts.tolist()) == set(range(sp.n))


def test_lp_norm_weighted():
    sp = build_space("path", n=3, weights=[1.0, 2.0, 1.0])
    f = np.array([1.0, -1.0, 2.0])
    assert lp_norm(sp, f, 1) == pytest.approx(1 + 2 + 2)
    assert lp_norm(sp, f, 2) == pytest.approx(np.sqrt(1 + 2 + 4))
    assert lp_norm(sp, f, np.inf) == 2


def test_product_space_sum_metric():
    a, b = build_space("path", n=3), build_space("path", n=4)
    p = product_space(a, b)
    assert p.n == 12
    assert p.diameter == 2 + 3


def test_single_point_dimension_zero():
    rep = fit_dimension(build_space("path", n=1))
    assert rep.params["D"] == 0


def test_path_dimension_close_to_one():
    rep = fit_dimension(build_space("path", n=256), radii=2.0 ** np.arange(1, 6))
    assert 0.9 <= rep.params["D"] <= 1.2
    assert rep.sample_count > 0


def test_doubling_estimator():
    est = DoublingDimension(radii=[2, 4, 8]).fit(build_space("cycle", n=64))
    assert est.dimension_ == pytest.approx(est.report_.params["D"])
    assert 0.8 < est.dimension_ < 1.3


def test_covering_net_properties():
    sp = build_space("grid2d", nx=10, ny=10)
    rep = covering_report(sp, 44, 5.0, 2.0)
    assert rep["separated"] and rep["covers"] and rep["in_ball"]
    net = covering_net(sp, 44, 5.0, 2.0)
    assert net[0] == 44


def test_covering_net_needs_r_at_least_s():
    with pytest.raises(ValueError):
        covering_net(build_space("path", n=5), 0, 1.0, 2.0)


def test_volume_comparability_on_cycle():
    rep = check_volume_comparability(build_space("cycle", n=30), 3.0)
    # translation invariant: every integral is exactly 1
    np.testing.assert_allclose(rep["integrals"], 1.0)
    assert rep["within"]


def test_space_roundtrip():
    sp = build_space("path", n=5, weights="degree")
    back = MetricMeasureSpace.from_dict(sp.to_dict())
    np.testing.assert_array_equal(back.dist, sp.dist)
    np.testing.assert_array_equal(back.weights, sp.weights)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 30), x=st.integers(0, 29), r=st.floats(0.5, 10),
       lam=st.floats(1.0, 4.0))
def test_ball_volumes_monotone_in_radius(n, x, r, lam):
    sp = build_space("cycle", n=max(n, 3))
    x = x % sp.n
    v1 = sp.ball_volumes(r)[x]
    v2 = sp.ball_volumes(lam * r)[x]
    assert v2 >= v1 > 0


@settings(max_examples=20, deadline=None)
@given(n=st.integers(3, 25), y=st.integers(0, 24), r=st.floats(1.0, 8.0),
       frac=st.floats(0.1, 1.0))
def test_covering_net_is_separated_and_covers(n, y, r, frac):
    sp = build_space("path", n=n)
    rep = covering_report(sp, y % n, r, frac * r)
    assert rep["separated"] and rep["covers"]
