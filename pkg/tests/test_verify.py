import warnings

import numpy as np
import pytest

from specmult import Ball, MultiplierProfile
from specmult.config import validate
from specmult.reports import SCHEMA_VERSION, to_jsonable
from specmult.verify import (check_multiplier_decay, check_multiplier_annular, check_hp_lp, check_piecewise_bound,
                             check_plancherel, check_plancherel_variant, check_regularizer_decay,
                             default_multiplier_family, default_plancherel_family,
                             experiment_h1_multiplier, experiment_lp_multiplier, gge_exponent)


def fit_doc(rep):
    return to_jsonable(dict(rep.to_dict(), schema_version=SCHEMA_VERSION))


@pytest.fixture(scope="module")
def decay_fit(cycle64):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return check_multiplier_decay(cycle64, MultiplierProfile.imaginary_power(2.0), 2, M=2)


def test_multiplier_decay(decay_fit):
    p = decay_fit.params
    assert p["delta_gt_half_D"] and np.isfinite(p["C_F"])
    assert p["C_F"] == pytest.approx(2.0 ** p["log2_C_F"])
    assert 1 not in decay_fit.samples["j"]


def test_decay_constant_dominates_samples(decay_fit):
    j = np.array(decay_fit.samples["j"], float)
    norm = np.array(decay_fit.samples["norm"])
    ok = np.array(decay_fit.samples["status"]) == "ok"
    bound = decay_fit.params["C_F"] * 2.0 ** (-decay_fit.params["delta"] * j[ok])
    assert np.all(norm[ok] <= bound * (1 + 1e-9))
    assert decay_fit.worst_ratio >= 1


def test_decay_report_schema(decay_fit):
    validate(fit_doc(decay_fit), "fit_report")


def test_multiplier_annular(cycle64, decay_fit):
    rep = check_multiplier_annular(cycle64, MultiplierProfile.imaginary_power(2.0), 2, 2,
                             Ball(0, 2.5), fit=decay_fit)
    assert np.isfinite(rep.sup_ratio)
    validate(rep.to_dict(), "experiment_report")


def test_regularizer_decay(cycle64):
    rep = check_regularizer_decay(cycle64, 2, M=2, K=1, r=2.0)
    assert rep.params["b"] > 0
    assert rep.extra["gap_max"][0] <= 2.0 ** 2 / 2
    assert rep.extra["l2_ok"]
    gaps = rep.extra["gap_max"]
    assert gaps[4] < gaps[2] < gaps[0]


def test_plancherel_infinity_ceiling(cycle64):
    rep = check_plancherel(cycle64, 2, np.inf, default_plancherel_family(), (1.0, 2.0))
    assert rep.passed and rep.sup_ratio <= 1 + 1e-10


def test_plancherel_variant(cycle64):
    rep = check_plancherel_variant(cycle64, 2, 2.0, 1, (2, 4))
    assert np.isfinite(rep.sup_ratio) and rep.sup_ratio > 0


def test_piecewise_bound(cycle64):
    rep = check_piecewise_bound(cycle64, MultiplierProfile.imaginary_power(1.0), 2, 2, 1.2,
                                j_range=(2, 4), l_range=(-2, 2))
    assert np.isfinite(rep.sup_ratio)


def test_imaginary_power_family():
    fam = default_multiplier_family()
    assert [F.params["tau"] for F in fam] == [1, 2, 4, 8]


def test_h1_experiment_and_threshold(cycle64):
    fam = default_multiplier_family((1, 2))
    rep = experiment_h1_multiplier(cycle64, fam, s=1.1, q=2)
    assert rep.passed and rep.fitted["spread"] >= 1
    strict = experiment_h1_multiplier(cycle64, fam, s=1.1, q=2, threshold=1.0)
    assert strict.passed == (strict.fitted["spread"] <= 1.0)
    validate(rep.to_dict(), "experiment_report")


def test_gge_exponent_on_cycle(cycle64):
    p0, rep = gge_exponent(cycle64)
    assert p0 == 1 and rep.params["b"] > 0


def test_lp_experiment_has_anchor(cycle64):
    rep = experiment_lp_multiplier(cycle64, default_multiplier_family((1, 2)), p=1.5)
    assert rep.passed
    assert all(np.isfinite(s["ratio_p2"]) for s in rep.samples)


def test_hp_lp(cycle64):
    rep = check_hp_lp(cycle64, p=1.5, trials=10, seed=0)
    assert rep.passed and rep.fitted["spread"] <= 100
    again = check_hp_lp(cycle64, p=1.5, trials=10, seed=0)
    assert again.to_json() == rep.to_json()
