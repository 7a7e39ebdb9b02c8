"""Command-line entry point: ``specmult {space,fit,norms,verify,plot}``.

Exit codes: 0 when everything ran and passed, 1 when a configured check
failed, 2 for usage, configuration or input errors.
"""
import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from ._validation import SpecmultError, check_order
from .config import Config, validate
from .estimates import (check_annular_equivalence, check_complex_time, fit_davies_gaffney,
                        fit_gge)
from .funcspace import MultiplierProfile, hoermander_norm, nq_norm
from .io import cached_decompose, read_csv, read_json, write_csv, write_json
from .operator import WeightedOperator, build_operator
from .plot import emit_plot
from .reports import SCHEMA_VERSION, FitReport, to_jsonable
from .space import (Ball, build_space, check_volume_comparability, covering_report,
                    fit_dimension)
from .verify import (check_multiplier_decay, check_multiplier_annular, check_hp_lp, check_piecewise_bound,
                     check_plancherel, check_plancherel_variant, check_regularizer_decay,
                     experiment_h1_multiplier, experiment_lp_multiplier)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SIZE_KEYS = ("n", "nx", "ny", "depth", "level", "dist")


class UsageError(SpecmultError):
    pass


# -- shared plumbing ------------------------------------------------------

def _load_config(args):
    if args.config:
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        cfg = Config.from_file(args.config)
    else:
        cfg = Config()
    return cfg.with_overrides(seed=args.seed, out=args.out, quick=args.quick)


def _out_dir(cfg):
    out = Path(os.environ.get("SPECMULT_OUT") or cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _space(spec):
    spec = dict(spec)
    family = spec.pop("family")
    weights = spec.pop("weights", "unit")
    size = {k: spec[k] for k in SIZE_KEYS if k in spec}
    return build_space(family, weights=weights, **size)


def _operator(space, spec):
    kind = spec.get("kind", "laplacian")
    op = build_operator(space, kind, spec.get("potential"))
    if "m" in spec:
        op = WeightedOperator(space, op.matrix, check_order(spec["m"]), op.label)
    return op


def _setup(cfg):
    space = _space(cfg["space"])
    op = _operator(space, cfg["operator"])
    return space, cached_decompose(op)


def _profiles(cfg):
    return [MultiplierProfile.from_config(p) for p in cfg["profiles"]]


def _write_fit(out, name, rep, extra=None):
    doc = dict(rep.to_dict(), schema_version=SCHEMA_VERSION)
    if rep.samples:
        doc["samples_csv"] = f"{name}_samples.csv"
        write_csv(out / doc["samples_csv"], columns=rep.samples)
    if extra:
        doc.update(extra)
    validate(to_jsonable(doc), "fit_report")
    return write_json(out / f"{name}.json", doc)


def _write_experiment(out, name, rep):
    doc = rep.to_dict()
    doc["samples_csv"] = f"{name}_samples.csv"
    write_csv(out / doc["samples_csv"], rows=doc["samples"])
    validate(doc, "experiment_report")
    return write_json(out / f"{name}.json", doc)


def _skip_report(model, reason):
    return FitReport(model, {}, float("nan"), 0, float("nan"), ["skipped"]), \
        {"status": "skipped", "reason": reason}


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


# -- space ----------------------------------------------------------------

def cmd_space(args):
    cfg = _load_config(args)
    if args.family:
        spec = {"family": args.family, "weights": args.weights}
        for k in ("n", "nx", "ny", "depth", "level"):
            if getattr(args, k) is not None:
                spec[k] = getattr(args, k)
        if args.quick and "n" in spec:
            spec["n"] = min(spec["n"], 64)
    else:
        spec = cfg["space"]
    space = _space(spec)
    out = _out_dir(cfg)
    summary = {"name": space.name, "n": space.n, "diameter": space.diameter,
               "total_mass": space.total_mass}
    doc = dict(space.to_dict(), schema_version=SCHEMA_VERSION, summary=summary)
    validate(to_jsonable(doc), "space")
    write_json(out / "space.json", doc)
    print(f"space {space.name}: n={space.n} diameter={space.diameter:g} "
          f"mass={space.total_mass:g}")
    if args.fit_dimension:
        radii = _floats(args.radii) if args.radii else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = fit_dimension(space, radii, seed=cfg.seed)
        _write_fit(out, "dimension", rep)
        print(f"D={rep.params['D']:.4g} C={rep.params['C']:.4g} "
              f"D_max_ratio={rep.params['D_max_ratio']:.4g} flags={rep.flags}")
    if args.covering:
        y, r, s = args.covering
        rep = covering_report(space, int(y), r, s)
        write_json(out / "covering.json", dict(rep, schema_version=SCHEMA_VERSION))
        print(f"covering net: K={rep['K']} separated={rep['separated']} "
              f"covers={rep['covers']}")
    if args.volume is not None:
        rep = check_volume_comparability(space, args.volume)
        write_json(out / "volume.json", dict(to_jsonable(rep), schema_version=SCHEMA_VERSION))
        print(f"volume comparability: {json.dumps(to_jsonable(rep), sort_keys=True)}")
    return EXIT_OK


# -- fit ------------------------------------------------------------------

def cmd_fit(args):
    cfg = _load_config(args)
    m = check_order(args.m) if args.m is not None else None
    space, dec = _setup(cfg)
    out = _out_dir(cfg)
    name = f"fit_{args.kind}"
    t_grid = _floats(args.t) if args.t else cfg["grids"]["t"]
    if space.n == 1:
        rep, status = _skip_report(args.kind, "degenerate space")
        _write_fit(out, name, rep, status)
        print(f"{args.kind}: skipped (degenerate space)")
        return EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.kind == "dg":
            rep = fit_davies_gaffney(dec, m, t_grid, seed=cfg.seed)
        elif args.kind == "gge":
            rep = fit_gge(dec, m, args.p, args.q, t_grid, seed=cfg.seed)
        elif args.kind == "annular":
            rep = check_annular_equivalence(dec, t_grid[0], args.x, args.k_max, m=m)
        else:
            z = [complex(a, b) for a, b in cfg["grids"]["z"]]
            rep = check_complex_time(dec, m, z, seed=cfg.seed)
    if isinstance(rep, FitReport):
        _write_fit(out, name, rep)
        p = rep.params
        print(f"{args.kind}: b={p.get('b', float('nan')):.4g} C={p.get('C', float('nan')):.4g} "
              f"R2={rep.residual:.4g} flags={rep.flags}")
    else:
        _write_experiment(out, name, rep)
        print(f"{args.kind}: sup ratio={rep.sup_ratio:.4g}")
    return EXIT_OK


# -- norms ----------------------------------------------------------------

def _cli_profile(args):
    params = {}
    for item in args.param or []:
        k, _, v = item.partition("=")
        try:
            params[k] = json.loads(v)
        except json.JSONDecodeError:
            params[k] = v
    return MultiplierProfile.from_config({"family": args.family, "params": params})


def cmd_norms(args):
    cfg = _load_config(args)
    out = _out_dir(cfg)
    profiles = [_cli_profile(args)] if args.family else _profiles(cfg)
    s = args.s if args.s is not None else cfg["params"]["s"]
    q = args.q if args.q is not None else cfg["params"]["q"]
    q = float("inf") if str(q).lower() in ("inf", "infinity") else float(q)
    N = args.N if args.N is not None else int(cfg["params"]["N"])
    rows = []
    for F in profiles:
        value, details = hoermander_norm(F, s, q, return_details=True)
        nq = nq_norm(F, N, q) if np.isfinite(q) else None
        rows.append({"profile": json.dumps(to_jsonable(F.describe()), sort_keys=True),
                     "s": float(s), "q": q, "hoermander": value,
                     "argmax_n": int(details["argmax_n"]), "nq": nq,
                     "value_at_zero": F.value_at_zero})
        print(f"{F.family} {F.describe()['params']}: hoermander={value:.6g}"
              + (f" nq={nq:.6g}" if nq is not None else ""))
    doc = {"schema_version": SCHEMA_VERSION, "rows": rows, "samples_csv": "norms.csv"}
    doc = to_jsonable(doc)
    validate(doc, "norms")
    write_csv(out / "norms.csv", rows=rows)
    write_json(out / "norms.json", doc)
    return EXIT_OK


# -- verify ---------------------------------------------------------------

def _first_profile(cfg):
    return _profiles(cfg)[0]


def _q(cfg):
    q = cfg["params"]["q"]
    return float("inf") if str(q).lower() in ("inf", "infinity") else float(q)


def _run_multiplier_decay(dec, cfg):
    P = cfg["params"]
    balls = [Ball(0, r) for r in cfg["grids"]["radii"]]
    rep = check_multiplier_decay(dec, _first_profile(cfg), None, P["M"], balls)
    ok = rep.params["delta_gt_half_D"] and np.isfinite(rep.params["C_F"])
    return rep, ok, f"delta={rep.params['delta']:.4g} vs D/2={rep.params['D'] / 2:.4g}"


def _run_multiplier_annular(dec, cfg):
    radii = cfg["grids"]["radii"]
    B = Ball(0, radii[1] if len(radii) > 1 else radii[0])
    rep = check_multiplier_annular(dec, _first_profile(cfg), None, cfg["params"]["M"], B)
    return rep, bool(np.isfinite(rep.sup_ratio)), f"certified C={rep.sup_ratio:.4g}"


def _run_regularizer(dec, cfg):
    P = cfg["params"]
    rep = check_regularizer_decay(dec, None, P["M"], P["K"], P["r"])
    b = rep.params.get("b", float("nan"))
    ok = bool(np.isfinite(b) and b > 0 and rep.extra["l2_ok"])
    return rep, ok, f"b={b:.4g}, gap-0 norm within (2^M/m)^K: {rep.extra['l2_ok']}"


def _run_plancherel(dec, cfg):
    rep = check_plancherel(dec, None, _q(cfg), _profiles(cfg), cfg["grids"]["R"],
                           seed=cfg.seed)
    ok = rep.passed and np.isfinite(rep.sup_ratio)
    return rep, ok, f"sup ratio={rep.sup_ratio:.6g}"


def _run_plancherel_variant(dec, cfg):
    q = _q(cfg)
    if not np.isfinite(q):
        return None, None, "needs a finite q >= 2"
    rep = check_plancherel_variant(dec, None, max(q, 2.0), cfg["params"]["kappa"],
                                   cfg["grids"]["N"], _profiles(cfg), seed=cfg.seed)
    return rep, bool(np.isfinite(rep.sup_ratio)), f"sup ratio={rep.sup_ratio:.4g}"


def _run_piecewise(dec, cfg):
    P, G = cfg["params"], cfg["grids"]
    rep = check_piecewise_bound(dec, _first_profile(cfg), None, P["M"], P["s"] + 0.1,
                                None, G["j"], G["l"])
    return rep, bool(np.isfinite(rep.sup_ratio)), f"certified C={rep.sup_ratio:.4g}"


def _run_h1(dec, cfg):
    P = cfg["params"]
    rep = experiment_h1_multiplier(dec, _profiles(cfg), P["s"], _q(cfg),
                                   threshold=cfg["thresholds"]["h1"], seed=cfg.seed)
    return rep, rep.passed, f"spread={rep.fitted['spread']:.4g} (threshold {rep.threshold:g})"


def _run_lp(dec, cfg):
    P = cfg["params"]
    rep = experiment_lp_multiplier(dec, _profiles(cfg), P["p"], P["s"], _q(cfg),
                                   threshold=cfg["thresholds"]["lp"], seed=cfg.seed)
    return rep, rep.passed, f"spread={rep.fitted['spread']:.4g} (threshold {rep.threshold:g})"


def _run_hp_lp(dec, cfg):
    P = cfg["params"]
    rep = check_hp_lp(dec, P["p"], P["trials"], cfg.seed, cfg["thresholds"]["hp_lp"])
    return rep, rep.passed, f"spread={rep.fitted['spread']:.4g} (threshold {rep.threshold:g})"


CHECKS = {
    "multiplier_decay": _run_multiplier_decay,
    "multiplier_annular": _run_multiplier_annular,
    "regularizer": _run_regularizer,
    "plancherel": _run_plancherel,
    "plancherel_variant": _run_plancherel_variant,
    "piecewise": _run_piecewise,
    "h1": _run_h1,
    "lp": _run_lp,
    "hp_lp": _run_hp_lp,
}


def _selected(args, cfg):
    names = []
    for item in args.only or []:
        names += [s.strip() for s in item.split(",") if s.strip()]
    if not names:
        names = list(cfg.data.get("checks") or CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s) {unknown}; available: {sorted(CHECKS)}")
    return names


def cmd_verify(args):
    cfg = _load_config(args)
    for key in ("p", "q", "s"):
        v = getattr(args, key)
        if v is not None:
            cfg.data["params"][key] = v if key == "q" else float(v)
    if args.threshold is not None:
        for key in cfg.data["thresholds"]:
            cfg.data["thresholds"][key] = float(args.threshold)
    names = _selected(args, cfg)
    out = _out_dir(cfg)
    space, dec = _setup(cfg)
    checks = {}
    any_fail = False
    for name in names:
        t0 = time.perf_counter()
        entry = {"report": f"{name}.json"}
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                rep, ok, reason = CHECKS[name](dec, cfg)
            if rep is None:
                entry.update(status="skipped", reason=reason)
                entry.pop("report")
            else:
                if isinstance(rep, FitReport):
                    _write_fit(out, name, rep)
                    flags = rep.flags
                else:
                    _write_experiment(out, name, rep)
                    flags = rep.flags
                if not ok:
                    status = "fail"
                elif flags or caught:
                    status = "warn"
                    notes = list(flags) + [str(w.message) for w in caught]
                    reason = f"{reason}; " + "; ".join(sorted(set(notes)))
                else:
                    status = "pass"
                entry.update(status=status, reason=reason)
        except (SpecmultError, ValueError, np.linalg.LinAlgError) as exc:
            entry.update(status="fail", reason=f"{type(exc).__name__}: {exc}")
            entry.pop("report")
        entry["seconds"] = round(time.perf_counter() - t0, 3)
        any_fail |= entry["status"] == "fail"
        checks[name] = entry
        print(f"{name:20s} {entry['status']:7s} {entry['reason']}")
    manifest = {"schema_version": SCHEMA_VERSION, "config_hash": cfg.hash(),
                "version": __version__, "command": "verify", "seed": cfg.seed,
                "space": {"name": space.name, "n": space.n}, "checks": checks}
    validate(to_jsonable(manifest), "manifest")
    write_json(out / "manifest.json", manifest)
    return EXIT_FAIL if any_fail else EXIT_OK


# -- plot -----------------------------------------------------------------

def _sidecar(report, base):
    name = report.get("samples_csv")
    if not name or not (base / name).exists():
        return None
    header, rows = read_csv(base / name)
    return {h: [r[i] for r in rows] for i, h in enumerate(header)}


def cmd_plot(args):
    out = Path(os.environ.get("SPECMULT_OUT") or args.out or ".")
    for item in args.reports:
        path = Path(item)
        if not path.exists():
            raise UsageError(f"report not found: {path}")
        report = read_json(path)
        samples = _sidecar(report, path.parent)
        if samples is None:
            samples = report.get("samples", [])
        target = emit_plot(report, out / f"{path.stem}.svg", samples)
        print(f"wrote {target}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (SPECMULT_OUT overrides)")
    common.add_argument("--only", action="append", metavar="NAME",
                        help="run only these checks (repeatable or comma separated)")
    common.add_argument("--quick", action="store_true",
                        help="cap spaces at 64 points and shorten grids")

    parser = argparse.ArgumentParser(prog="specmult", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"specmult {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("space", parents=[common], help="build and inspect a space")
    p.add_argument("--family", choices=["path", "cycle", "grid2d", "binary_tree", "sierpinski"])
    for k in ("n", "nx", "ny", "depth", "level"):
        p.add_argument(f"--{k}", type=int)
    p.add_argument("--weights", default="unit")
    p.add_argument("--inspect", action="store_true", help="print a summary (always on)")
    p.add_argument("--fit-dimension", action="store_true")
    p.add_argument("--radii", help="comma-separated radius grid for the dimension fit")
    p.add_argument("--covering", nargs=3, type=float, metavar=("Y", "R", "S"))
    p.add_argument("--volume", type=float, metavar="R")
    p.set_defaults(func=cmd_space)

    p = sub.add_parser("fit", parents=[common], help="fit off-diagonal decay constants")
    p.add_argument("kind", choices=["dg", "gge", "annular", "complex"])
    p.add_argument("--m", type=float)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=float("inf"))
    p.add_argument("--t", help="comma-separated time grid")
    p.add_argument("--x", type=int, default=0, help="centre for the annular check")
    p.add_argument("--k-max", type=int, default=8)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("norms", parents=[common], help="multiplier norm tables")
    p.add_argument("--family", help="profile family (otherwise profiles from the config)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--s", type=float)
    p.add_argument("--q")
    p.add_argument("--N", type=int)
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("verify", parents=[common], help="run end-to-end checks")
    p.add_argument("--p", type=float)
    p.add_argument("--q")
    p.add_argument("--s", type=float)
    p.add_argument("--threshold", type=float, help="override every spread threshold")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", parents=[common], help="render report JSON files to SVG")
    p.add_argument("reports", nargs="+", metavar="REPORT")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, OSError, json.JSONDecodeError, jsonschema.ValidationError,
            ValueError, SpecmultError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"specmult: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
