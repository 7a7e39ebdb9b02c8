import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specmult import (Ball, ResolutionError, SquareFunction, WitnessMismatchError,
                      WeightedOperator, build_operator, build_space, decompose, hardy_norm,
                      heat, make_molecule, molecule_family, square_function)
from specmult.hardy import (SquareFunctionGrid, check_molecule, default_grid, g_star,
                            h1_operator_norm_estimate, random_family)
from specmult.space import lp_norm


@pytest.fixture(scope="module")
def path20():
    return decompose(build_operator(build_space("path", n=20, weights="random:1")))


WIDE = SquareFunctionGrid.logspace(1e-4, 1e4, 600)


def l2(dec, f):
    return np.sqrt(np.sum(dec.weights * np.abs(f) ** 2))


@pytest.mark.parametrize("m", [2, 4])
def test_single_point_closed_form(m):
    sp = build_space("path", n=1)
    L = build_operator(sp, "schroedinger", [2.0])
    dec = decompose(WeightedOperator(sp, L.matrix, m))
    S = square_function(dec, np.array([1.0]))
    assert S[0] == pytest.approx(1 / (2 * np.sqrt(m)), rel=1e-3)


@pytest.fixture(scope="module")
def cycle20():
    return decompose(build_operator(build_space("cycle", n=20)))


def test_l2_isometry_up_to_constant(cycle20):
    # ball volumes do not depend on the centre, so by Fubini
    # ||Sf||_2 = ||f||_2 / (2 sqrt(m)) for f orthogonal to the kernel
    F = random_family(cycle20, 3, seed=0)
    for i in range(3):
        S = square_function(cycle20, F[:, i], WIDE, self_check=False)
        assert l2(cycle20, S) == pytest.approx(l2(cycle20, F[:, i]) / (2 * np.sqrt(2)), rel=1e-4)


def test_constants_have_zero_square_function():
    dec = decompose(build_operator(build_space("cycle", n=12)))
    np.testing.assert_allclose(square_function(dec, np.ones(12)), 0, atol=1e-12)


def test_column_input(path20):
    F = random_family(path20, 2, seed=1)
    both = square_function(path20, F)
    np.testing.assert_allclose(both[:, 1], square_function(path20, F[:, 1]))


def test_default_grid_bounds(path20):
    g = default_grid(path20)
    assert g.t.size == 96
    assert g.t_max <= 4 * path20.space.diameter * (1 + 1e-12)
    assert g.t_min < g.t_max


def test_coarse_grid_fails_self_check(path20):
    g = default_grid(path20)
    f = random_family(path20, 1, seed=0)[:, 0]
    with pytest.raises(ResolutionError):
        square_function(path20, f, SquareFunctionGrid.logspace(g.t_min, g.t_max, 6))


def test_grid_validation():
    with pytest.raises(ValueError):
        SquareFunctionGrid.logspace(2.0, 1.0)


def test_hardy_norm_p2_matches_l2(cycle20):
    f = random_family(cycle20, 1, seed=2)[:, 0]
    h = hardy_norm(cycle20, f, 2, WIDE, self_check=False)
    assert h == pytest.approx(lp_norm(cycle20.space, f, 2) / (2 * np.sqrt(2)), rel=1e-4)


def test_molecule_certificate(path20):
    a, cert = make_molecule(path20, Ball(5, 2.5), 2, 1.0)
    assert cert.valid and cert.max_ratio <= 1 + 1e-8
    d = cert.to_dict()
    assert d["M"] == 2 and d["valid"] is True


def test_molecule_witness_mismatch(path20):
    a, cert = make_molecule(path20, Ball(5, 2.5), 1, 1.0)
    with pytest.raises(WitnessMismatchError):
        check_molecule(path20, a, cert.b * 1.01, Ball(5, 2.5), 1, 1.0)


def test_molecule_family_size():
    dec = decompose(build_operator(build_space("cycle", n=48)))
    fam = molecule_family(dec)
    assert len(fam) == 3 * 4 * 2
    assert all(c.valid for _, c in fam)


def test_random_family_orthogonal_to_kernel():
    dec = decompose(build_operator(build_space("cycle", n=16)))
    F = random_family(dec, 4, seed=3)
    np.testing.assert_allclose(dec.weights @ F, 0, atol=1e-12)


def test_h1_estimate_of_near_identity(path20):
    est, det = h1_operator_norm_estimate(path20, heat(path20, 1e-4), return_details=True)
    assert det["label"] == "est-LB"
    assert est == pytest.approx(1.0, abs=1e-3)


def test_g_star_nonnegative(path20):
    f = random_family(path20, 1, seed=4)[:, 0]
    g = g_star(path20, f)
    assert g.shape == (20,) and np.all(g >= 0)


def test_transformer_matches_function(path20):
    F = random_family(path20, 2, seed=5)
    sf = SquareFunction().fit(path20)
    np.testing.assert_allclose(sf.transform(F.T), square_function(path20, F).T)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.floats(-5, 5))
def test_square_function_homogeneous_and_subadditive(seed, c):
    dec = decompose(build_operator(build_space("path", n=10)))
    F = random_family(dec, 2, seed=seed)
    f, g = F[:, 0], F[:, 1]
    Sf, Sg = square_function(dec, f), square_function(dec, g)
    np.testing.assert_allclose(square_function(dec, c * f), abs(c) * Sf, atol=1e-12)
    assert np.all(square_function(dec, f + g) <= Sf + Sg + 1e-12)
