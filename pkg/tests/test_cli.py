import json

import pytest

from specmult.cli import main
from specmult.config import validate


@pytest.fixture(autouse=True)
def no_env_out(monkeypatch):
    monkeypatch.delenv("SPECMULT_OUT", raising=False)
    monkeypatch.delenv("SPECMULT_CACHE", raising=False)


def load(path):
    return json.loads(path.read_text())


def test_space_inspect(tmp_path, capsys):
    assert main(["space", "--family", "path", "--n", "5", "--inspect", "--out", str(tmp_path)]) == 0
    assert "n=5 diameter=4" in capsys.readouterr().out
    doc = load(tmp_path / "space.json")
    validate(doc, "space")
    assert doc["summary"]["n"] == 5


def test_space_dimension_and_covering(tmp_path):
    code = main(["space", "--family", "cycle", "--n", "32", "--fit-dimension",
                 "--covering", "0", "4", "2", "--volume", "2", "--out", str(tmp_path)])
    assert code == 0
    dim = load(tmp_path / "dimension.json")
    validate(dim, "fit_report")
    assert (tmp_path / dim["samples_csv"]).exists()
    assert load(tmp_path / "covering.json")["covers"]


def test_fit_dg_writes_report_and_csv(tmp_path):
    assert main(["fit", "dg", "--quick", "--out", str(tmp_path)]) == 0
    doc = load(tmp_path / "fit_dg.json")
    validate(doc, "fit_report")
    assert doc["params"]["b"] > 0
    header = (tmp_path / doc["samples_csv"]).read_text().splitlines()[0]
    assert header.split(",")[:3] == ["t", "x", "y"]


@pytest.mark.parametrize("kind", ["gge", "annular", "complex"])
def test_fit_other_kinds(tmp_path, kind):
    assert main(["fit", kind, "--quick", "--out", str(tmp_path)]) == 0
    assert (tmp_path / f"fit_{kind}.json").exists()


def test_fit_rejects_order_one(tmp_path, capsys):
    assert main(["fit", "dg", "--m", "1", "--out", str(tmp_path)]) == 2
    assert "m must be >= 2" in capsys.readouterr().err


def test_fit_single_point_is_skipped(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"space": {"family": "path", "n": 1}}))
    assert main(["fit", "dg", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    doc = load(tmp_path / "fit_dg.json")
    assert doc["status"] == "skipped" and doc["reason"] == "degenerate space"


def test_norms_table(tmp_path):
    assert main(["norms", "--out", str(tmp_path)]) == 0
    doc = load(tmp_path / "norms.json")
    validate(doc, "norms")
    h = [r["hoermander"] for r in doc["rows"]]
    assert h == sorted(h) and len(h) == 4


def test_norms_nan_tabulated_profile(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profiles": [{"family": "tabulated",
                                             "params": {"grid": [0, 1, 2],
                                                        "values": [1, "NaN", 0]}}]}))
    assert main(["norms", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_verify_subset_and_manifest(tmp_path):
    assert main(["verify", "--quick", "--only", "plancherel", "--only", "hp_lp,multiplier_decay",
                 "--out", str(tmp_path)]) == 0
    man = load(tmp_path / "manifest.json")
    validate(man, "manifest")
    assert set(man["checks"]) == {"plancherel", "hp_lp", "multiplier_decay"}
    for name in man["checks"]:
        validate(load(tmp_path / f"{name}.json"),
                 "fit_report" if name == "multiplier_decay" else "experiment_report")


def test_verify_threshold_one_fails(tmp_path):
    assert main(["verify", "--quick", "--only", "h1", "--threshold", "1",
                 "--out", str(tmp_path)]) == 1
    assert load(tmp_path / "manifest.json")["checks"]["h1"]["status"] == "fail"


def test_verify_plancherel_q_inf(tmp_path):
    assert main(["verify", "--quick", "--only", "plancherel", "--q", "inf",
                 "--out", str(tmp_path)]) == 0
    assert load(tmp_path / "plancherel.json")["sup_ratio"] <= 1 + 1e-10


def test_verify_variant_skipped_for_q_inf(tmp_path):
    assert main(["verify", "--quick", "--only", "plancherel_variant", "--q", "inf",
                 "--out", str(tmp_path)]) == 0
    entry = load(tmp_path / "manifest.json")["checks"]["plancherel_variant"]
    assert entry["status"] == "skipped"


def test_unknown_check_is_usage_error(tmp_path):
    assert main(["verify", "--only", "nope", "--out", str(tmp_path)]) == 2


def test_env_out_overrides_flag(tmp_path, monkeypatch):
    env = tmp_path / "env"
    monkeypatch.setenv("SPECMULT_OUT", str(env))
    assert main(["space", "--family", "path", "--n", "3", "--out", str(tmp_path / "flag")]) == 0
    assert (env / "space.json").exists()
    assert not (tmp_path / "flag").exists()


def test_bad_config_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown_key": 1}')
    assert main(["verify", "--config", str(bad)]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["verify", "--config", str(broken)]) == 2
    assert main(["verify", "--config", str(tmp_path / "missing.json")]) == 2


def test_argparse_errors_map_to_two():
    assert main(["frobnicate"]) == 2
    assert main(["fit", "dg", "--m", "two"]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "verify" in capsys.readouterr().out


def test_plot_is_deterministic(tmp_path):
    out = tmp_path / "r"
    assert main(["verify", "--quick", "--only", "multiplier_decay,h1", "--out", str(out)]) == 0
    plots = tmp_path / "p"
    assert main(["plot", str(out / "multiplier_decay.json"), str(out / "h1.json"), "--out", str(plots)]) == 0
    first = (plots / "multiplier_decay.svg").read_bytes()
    assert first.startswith(b"<?xml")
    assert main(["plot", str(out / "multiplier_decay.json"), "--out", str(plots)]) == 0
    assert (plots / "multiplier_decay.svg").read_bytes() == first


def test_plot_missing_report(tmp_path):
    assert main(["plot", str(tmp_path / "none.json")]) == 2
