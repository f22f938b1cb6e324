"""Command line front door.

``nslog run <config.json>`` executes one scenario and writes its artifacts
plus ``manifest.json`` (sha256 of every artifact).  ``nslog families``,
``nslog suite [--filter MODULE]`` and ``nslog version`` are the other verbs.

Exit codes: 0 success, 1 failed property checks, 2 configuration error,
3 gate failure, 4 numerical failure.
"""

import argparse
import copy
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, GateError, NSLogError, SplitError
from .jsonio import _fmt, dumps

__all__ = ["main", "run_scenario", "resolve_config", "dumps", "KINDS"]

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_GATE, EXIT_NUMERICAL = 0, 1, 2, 3, 4

KINDS = (
    "norm_study",
    "estimate_sweep",
    "mild_run",
    "perturbed_run",
    "galerkin_run",
    "composite_run",
    "property_suite",
)

_COMMON = {
    "kind": None,
    "output": None,
    "seed": 0,
    "grid": {"dim": 2, "modes": 16, "period": 1.0},
    "mesh": {"T": 1.0, "J": 128, "gamma_grade": 2.0, "quad_order": 4},
    "initial": {"family": "taylor_green_mixed", "params": {"amplitude": 0.01}},
}

_DEFAULT_NORMS = [
    {"norm": "log", "space": "Linf"},
    {"norm": "besov_lp", "s": -0.5, "q": 2.0, "space": "Linf"},
    {"norm": "besov_heat", "s": -0.5, "q": 2.0, "space": "Linf"},
    {"norm": "xr", "r": 0.5},
]

_KIND_DEFAULTS = {
    "norm_study": {"norms": _DEFAULT_NORMS},
    "estimate_sweep": {
        "estimates": ["pdiv_scaling", "bilinear_x", "bilinear_drift", "logweight_convolution", "beta_operator", "log_embedding"],
        "n_pairs": 30,
        "r": 0.5,
    },
    "mild_run": {
        "solver": {"tol": 1e-10, "max_iter": 60, "eps_ball": None},
        "oracle": {"enabled": False, "steps": 256},
    },
    "perturbed_run": {
        "drift": {"kind": "mild", "initial": {"family": "taylor_green_mixed", "params": {"amplitude": 0.05}}},
        "initial": {"family": "rotated_mode", "params": {"k": [2, 1], "amplitude": 0.001}},
        "solver": {
            "r": 0.5,
            "tol": 1e-10,
            "max_iter": 60,
            "resolvent_tol": 1e-12,
            "n_probes": 12,
            "safety": 1.25,
            "max_halvings": 6,
            "eps_data": None,
        },
    },
    "galerkin_run": {
        "galerkin": {"n": 40, "atol": 1e-10, "rtol": 1e-8, "r": 0.5},
        "drift": {"kind": "none"},
    },
    "composite_run": {
        "grid": {"dim": 2, "modes": 32, "period": 1.0},
        "mesh": {"T": 1.0, "J": 64, "gamma_grade": 2.0, "quad_order": 4},
        "initial": {"family": "three_band", "params": {}},
        "composite": {
            "r": 0.5,
            "eps1": 5e-4,
            "eps2": 1e-3,
            "j_low": 1,
            "n_galerkin": None,
            "n_cap": 240,
            "mild_tol": 1e-12,
            "perturbed_tol": 1e-11,
            "atol": 1e-10,
            "rtol": 1e-8,
            "battery_size": 16,
            "residual_threshold": 1e-4,
        },
    },
    "property_suite": {"filter": []},
}

def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------- configuration


def _merge(defaults, user, path=()):
    if not isinstance(user, dict):
        raise ConfigError(f"{'.'.join(path) or 'config'} must be an object")
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        where = path + (key,)
        if key not in defaults:
            raise ConfigError(f"unknown config key {'.'.join(where)!r}")
        base = defaults[key]
        if isinstance(base, dict) and key not in ("initial", "drift"):
            out[key] = _merge(base, val, where)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(raw):
    """Fill defaults and reject unknown keys; returns the fully resolved config."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {list(KINDS)}, got {kind!r}")
    if not isinstance(raw.get("output"), str) or not raw["output"]:
        raise ConfigError("output must name a directory")
    defaults = copy.deepcopy(_COMMON)
    defaults.update(copy.deepcopy(_KIND_DEFAULTS[kind]))
    return _merge(defaults, raw)


class _Context:
    """Objects built from a resolved config during validation."""

    def __init__(self, cfg, base_dir):
        self.cfg = cfg
        self.base_dir = base_dir


def _field_from_recipe(recipe, grid, base_dir, where):
    from .families import FAMILIES, instantiate
    from .fieldio import read_field

    if not isinstance(recipe, dict):
        raise ConfigError(f"{where} must be an object")
    if "file" in recipe:
        if set(recipe) - {"file"}:
            raise ConfigError(f"{where}: a file recipe takes only 'file'")
        path = Path(recipe["file"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"{where}: field file {str(path)!r} does not exist")
        f = read_field(path)
        if f.grid != grid:
            raise ConfigError(f"{where}: field file grid differs from the configured grid")
        return f
    if set(recipe) - {"family", "params"}:
        raise ConfigError(f"{where}: unknown keys {sorted(set(recipe) - {'family', 'params'})}")
    params = recipe.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{where}.params must be an object")
    try:
        f = instantiate(recipe.get("family"), grid, **params)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"{where}: {err}") from err
    # record the family defaults too, so the resolved config is complete
    recipe["params"] = {**{k: d for k, (_, d) in FAMILIES[recipe["family"]][1].items()}, **params}
    return f


def _space(spec):
    from .spaces import LINF, BaseSpace

    if spec == "Linf":
        return LINF
    kind, _, val = str(spec).partition(":")
    try:
        if kind == "Lp":
            return BaseSpace.Lp(float(val))
        if kind == "Xr":
            return BaseSpace.Xr(float(val))
    except ValueError as err:
        raise ConfigError(f"bad space {spec!r}: {err}") from err
    raise ConfigError(f"bad space {spec!r}; use Linf, Lp:<p> or Xr:<r>")


def _validate(cfg, base_dir):
    """Build every object the run needs; any failure is a ConfigError."""
    from .duhamel import TimeGrid
    from .spectral import make_grid

    ctx = _Context(cfg, base_dir)
    kind = cfg["kind"]
    try:
        g = cfg["grid"]
        ctx.grid = make_grid(int(g["dim"]), int(g["modes"]), float(g["period"]))
        m = cfg["mesh"]
        ctx.tgrid = TimeGrid(float(m["T"]), int(m["J"]), float(m["gamma_grade"]), int(m["quad_order"]))
        if not isinstance(cfg["seed"], int):
            raise ValueError("seed must be an integer")
    except (TypeError, ValueError, KeyError) as err:
        raise ConfigError(f"grid/mesh: {err}") from err
    if kind == "property_suite":
        from .properties import MODULES

        filt = cfg["filter"]
        if not isinstance(filt, list) or set(filt) - set(MODULES):
            raise ConfigError(f"filter must be a list drawn from {list(MODULES)}")
        return ctx
    if kind == "estimate_sweep":
        known = {"pdiv_scaling", "bilinear_x", "bilinear_drift", "logweight_convolution", "beta_operator", "log_embedding"}
        if not isinstance(cfg["estimates"], list) or set(cfg["estimates"]) - known:
            raise ConfigError(f"estimates must be drawn from {sorted(known)}")
        if not (isinstance(cfg["n_pairs"], int) and cfg["n_pairs"] >= 1):
            raise ConfigError("n_pairs must be a positive integer")
        if not 0 < float(cfg["r"]) < 1:
            raise ConfigError("r must lie in (0, 1)")
        return ctx
    ctx.u0 = _field_from_recipe(cfg["initial"], ctx.grid, base_dir, "initial")
    if kind == "norm_study":
        ctx.norms = []
        for i, spec in enumerate(cfg["norms"]):
            if not isinstance(spec, dict) or spec.get("norm") not in ("log", "besov_lp", "besov_heat", "xr"):
                raise ConfigError(f"norms[{i}] must have norm in log, besov_lp, besov_heat, xr")
            ctx.norms.append(spec)
            if spec["norm"] != "xr":
                _space(spec.get("space", "Linf"))
        return ctx
    try:
        if kind == "mild_run":
            from .mild import MildConfig

            s = cfg["solver"]
            ctx.solver = MildConfig(s["eps_ball"], int(s["max_iter"]), float(s["tol"]), ctx.tgrid.T)
            if int(cfg["oracle"]["steps"]) < 64:
                raise ValueError("oracle.steps must be >= 64")
        elif kind == "perturbed_run":
            from .perturbed import PerturbedConfig

            s = cfg["solver"]
            ctx.solver = PerturbedConfig(
                r=float(s["r"]), eps_data=s["eps_data"], tol=float(s["tol"]), max_iter=int(s["max_iter"]),
                resolvent_tol=float(s["resolvent_tol"]), n_probes=int(s["n_probes"]),
                safety=float(s["safety"]), max_halvings=int(s["max_halvings"]), seed=cfg["seed"],
                T=ctx.tgrid.T,
            )
            ctx.drift_recipe = _drift_recipe(cfg["drift"], ctx, required=True)
        elif kind == "galerkin_run":
            gk = cfg["galerkin"]
            if not (isinstance(gk["n"], int) and gk["n"] >= 1):
                raise ValueError("galerkin.n must be a positive integer")
            if not (float(gk["atol"]) > 0 and float(gk["rtol"]) > 0):
                raise ValueError("ODE tolerances must be positive")
            ctx.drift_recipe = _drift_recipe(cfg["drift"], ctx, required=False)
        elif kind == "composite_run":
            from .splitting import CompositeConfig

            c = cfg["composite"]
            ctx.solver = CompositeConfig(
                T=ctx.tgrid.T, r=float(c["r"]), J=ctx.tgrid.J, gamma_grade=ctx.tgrid.gamma_grade,
                quad_order=ctx.tgrid.quad_order, eps1=float(c["eps1"]), eps2=float(c["eps2"]),
                j_low=int(c["j_low"]), n_galerkin=c["n_galerkin"], n_cap=int(c["n_cap"]),
                mild_tol=float(c["mild_tol"]), perturbed_tol=float(c["perturbed_tol"]),
                ode_tol=(float(c["atol"]), float(c["rtol"])), battery_size=int(c["battery_size"]),
                seed=cfg["seed"],
            )
            if ctx.solver.battery_size < 1:
                raise ValueError("battery_size must be >= 1")
    except (TypeError, ValueError, KeyError) as err:
        raise ConfigError(f"{kind}: {err}") from err
    return ctx


def _drift_recipe(spec, ctx, required):
    if not isinstance(spec, dict) or spec.get("kind") not in ("none", "mild", "heat", "file"):
        raise ConfigError("drift.kind must be none, mild, heat or file")
    if spec["kind"] == "none":
        if required:
            raise ConfigError("this run needs a drift path")
        return None
    if spec["kind"] == "file":
        path = Path(spec.get("path", ""))
        if not path.is_absolute():
            path = ctx.base_dir / path
        if not (path / "tgrid.json").is_file():
            raise ConfigError(f"drift path directory {str(path)!r} does not exist")
        return ("file", path)
    field = _field_from_recipe(spec.get("initial"), ctx.grid, ctx.base_dir, "drift.initial")
    return (spec["kind"], field)


def _build_drift(recipe, ctx):
    from .duhamel import PathSample, heat_path
    from .mild import MildConfig, solve_mild

    kind, obj = recipe
    if kind == "heat":
        return heat_path(obj, ctx.tgrid)
    if kind == "mild":
        return solve_mild(obj, MildConfig(T=ctx.tgrid.T, tol=1e-12), ctx.tgrid).path
    path = PathSample.load(obj)
    if path.tgrid != ctx.tgrid or path.grid != ctx.grid:
        raise ConfigError("drift path file does not match the configured grid and mesh")
    return path


# ------------------------------------------------------------- runners


def _run_norm_study(ctx, out):
    from .spaces import BesovIndex, besov_norm_heat, besov_norm_lp, log_besov_norm, lp_blocks, xr_norm

    f = ctx.u0
    results = []
    for spec in ctx.norms:
        kind = spec["norm"]
        if kind == "xr":
            rep = xr_norm(f, float(spec.get("r", 0.5)))
        elif kind == "log":
            rep = log_besov_norm(f, _space(spec.get("space", "Linf")), float(spec.get("T", ctx.tgrid.T)))
        else:
            idx = BesovIndex(float(spec.get("s", -0.5)), float(spec.get("q", 2.0)))
            E = _space(spec.get("space", "Linf"))
            rep = besov_norm_lp(f, idx, E) if kind == "besov_lp" else besov_norm_heat(f, idx, E)
        results.append({"request": spec, "report": rep.to_dict()})
    blocks = [(j, float(np.sqrt(f.grid.volume * np.sum(np.abs(b.coeffs) ** 2)))) for j, b in enumerate(lp_blocks(f))]
    _write_csv(out / "lp_blocks.csv", ["j", "l2_norm"], blocks)
    return {"norms": results}, [out / "lp_blocks.csv"]


def _run_estimate_sweep(ctx, out):
    from .duhamel import lemma33_operator, logweight_convolution_check
    from .estimates import drift_space_estimates, pdiv_scaling, portable_field, x_space_estimates
    from .spaces import LINF, lemma13_embedding_check

    cfg = ctx.cfg
    seed = cfg["seed"]
    arts, summary = [], {}
    for name in cfg["estimates"]:
        path = out / f"{name}.csv"
        if name == "pdiv_scaling":
            res = pdiv_scaling(ctx.grid, np.geomspace(1e-3, 1e-1, 9), seed=seed)
            _write_csv(path, ["t", "sqrt_t_operator_norm"], res["rows"])
            summary[name] = {"band": res["band"]}
        elif name == "bilinear_x":
            res = x_space_estimates(ctx.grid, ctx.tgrid, cfg["n_pairs"], seed)
            _write_csv(path, ["T", "x_bound", "log_bound", "weak_bound"], res["rows"])
            summary[name] = {k: max(res[k]) for k in ("x_bound", "log_bound", "weak_bound")}
        elif name == "bilinear_drift":
            res = drift_space_estimates(ctx.grid, ctx.tgrid, float(cfg["r"]), cfg["n_pairs"], seed)
            _write_csv(path, ["T", "lq_xr", "besov", "sup_xr", "sup_linf"], res["rows"])
            summary[name] = {k: max(res[k]) for k in ("lq_xr", "besov", "sup_xr", "sup_linf")}
        elif name == "logweight_convolution":
            T = ctx.tgrid.T
            rows = [(t,) + tuple(logweight_convolution_check(t, T)) for t in np.geomspace(1e-4 * T, T, 17)]
            _write_csv(path, ["t", "lhs", "rhs", "ratio"], rows)
            summary[name] = {"max_ratio": max(r[3] for r in rows)}
        elif name == "beta_operator":
            rows = []
            for th in (0.1, 0.25, 0.4):
                _, n_in, n_out = lemma33_operator(lambda t: np.cos(3 * t) + 1.5, th, 2.0, T=ctx.tgrid.T)
                rows.append((th, n_in, n_out, n_out / n_in))
            _write_csv(path, ["theta", "input_norm", "output_norm", "ratio"], rows)
            summary[name] = {"max_ratio": max(r[3] for r in rows)}
        elif name == "log_embedding":
            rows = []
            for q in (1.5, 2.0, 4.0):
                for i in range(cfg["n_pairs"]):
                    c = lemma13_embedding_check(portable_field(ctx.grid, 1 + i % 3, seed + i), LINF, q, T=ctx.tgrid.T)
                    rows.append((q, c["lhs"], c["rhs"], c["ratio"], c["constant"]))
            _write_csv(path, ["q", "lhs", "rhs", "ratio", "constant"], rows)
            summary[name] = {"max_ratio_over_constant": max(r[3] / r[4] for r in rows)}
        arts.append(path)
    return {"estimates": summary}, arts


def _run_mild(ctx, out):
    from .mild import oracle_timestep, solve_mild
    from .spectral import l2_norm

    sol = solve_mild(ctx.u0, ctx.solver, ctx.tgrid)
    arts = sol.path.save(out / "solution")
    res = {"mild": sol.record()}
    if ctx.cfg["oracle"]["enabled"]:
        o = oracle_timestep(ctx.u0, ctx.tgrid.T, int(ctx.cfg["oracle"]["steps"]), ctx.tgrid)
        res["oracle_rel_l2_at_T"] = l2_norm(sol.path.final - o.final) / max(l2_norm(o.final), 1e-300)
    return res, arts


def _run_perturbed(ctx, out):
    from .perturbed import solve_perturbed

    a = _build_drift(ctx.drift_recipe, ctx)
    sol = solve_perturbed(a, ctx.u0, ctx.solver, ctx.tgrid)
    return {"perturbed": sol.record()}, sol.path.save(out / "solution")


def _run_galerkin(ctx, out):
    from .galerkin import build_basis, energy_report, integrate_galerkin

    gk = ctx.cfg["galerkin"]
    a = _build_drift(ctx.drift_recipe, ctx) if ctx.drift_recipe else None
    basis = build_basis(ctx.grid, gk["n"])
    st = integrate_galerkin(ctx.u0, a, basis, tgrid=ctx.tgrid, ode_tol=(float(gk["atol"]), float(gk["rtol"])))
    arts = st.to_path().save(out / "solution")
    rep = energy_report(st, a1=a, r=float(gk["r"]))
    _write_csv(out / "energy.csv", ["t", "energy", "dissipation_integral", "rhs_envelope"], rep.pop("rows"))
    np.savetxt(out / "coefficients.csv", np.column_stack([st.times, st.g]), delimiter=",", fmt="%.17g")
    stats = {k: v for k, v in st.stats.items() if k != "message"}
    return {"galerkin": {"n": basis.n, "stats": stats, "energy": rep}}, arts + [out / "energy.csv", out / "coefficients.csv"]


def _run_composite(ctx, out):
    from .splitting import solve_composite, weak_residual, write_composite

    cfg = ctx.solver
    sol = solve_composite(ctx.u0, cfg)
    arts = write_composite(sol, out)
    wr = weak_residual(sol.u, cfg.battery_size, seed=cfg.seed, csv_path=out / "weak_residual.csv",
                       threshold=float(ctx.cfg["composite"]["residual_threshold"]))
    rows = wr.pop("rows")
    arts.append(out / "weak_residual.csv")
    res = {"stages": sol.records, "n_galerkin": sol.n_galerkin, "weak_residual": wr,
           "weak_residual_members": len(rows)}
    return res, arts


def _run_suite(ctx, out):
    from .properties import run_suite, write_csv

    results = run_suite(ctx.cfg["filter"] or None)
    write_csv(results, out / "properties.csv", timings=False)
    failed = [f"{r.module}: {r.name}" for r in results if not r.passed]
    return {"checks": len(results), "failed": failed}, [out / "properties.csv"]


_RUNNERS = {
    "norm_study": _run_norm_study,
    "estimate_sweep": _run_estimate_sweep,
    "mild_run": _run_mild,
    "perturbed_run": _run_perturbed,
    "galerkin_run": _run_galerkin,
    "composite_run": _run_composite,
    "property_suite": _run_suite,
}


def _plain(details):
    out = {}
    for k, v in details.items():
        if isinstance(v, (int, float, str, bool, np.floating, np.integer)) or v is None:
            out[k] = v
        elif isinstance(v, (list, tuple)) and all(isinstance(x, (int, float, np.floating)) for x in v):
            out[k] = list(v)
        elif isinstance(v, dict):
            out[k] = _plain(v)
    return out


def run_scenario(config_path):
    """Validate, run and record one scenario; returns the exit status."""
    from . import _kernels

    config_path = Path(config_path)
    try:
        raw = json.loads(config_path.read_text())
    except FileNotFoundError:
        print(f"config error: {config_path} not found", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as err:
        print(f"config error: {config_path} is not valid JSON ({err})", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = resolve_config(raw)
        ctx = _validate(cfg, config_path.parent)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["output"])
    if not out.is_absolute():
        out = config_path.parent / out
    out.mkdir(parents=True, exist_ok=True)
    record = {"kind": cfg["kind"], "version": __version__, "backend": _kernels.BACKEND, "config": cfg}
    status, arts = EXIT_OK, []
    try:
        results, arts = _RUNNERS[cfg["kind"]](ctx, out)
        record["status"] = "ok"
        record["results"] = results
        if cfg["kind"] == "property_suite" and results["failed"]:
            status = EXIT_CHECKS
            record["status"] = "checks_failed"
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NSLogError as err:
        status = EXIT_GATE if isinstance(err, (GateError, SplitError)) else EXIT_NUMERICAL
        record["status"] = "failed"
        record["stage"] = err.stage
        record["error"] = {"type": type(err).__name__, "message": str(err), "details": _plain(err.details)}
        if isinstance(err, SplitError):
            record["error"]["best_norms"] = _plain(err.best_norms)
        print(f"{err.stage}: {err}", file=sys.stderr)
    record["exit_code"] = status
    rec_path = out / "record.json"
    rec_path.write_text(dumps(record) + "\n")
    arts = [Path(a) for a in arts] + [rec_path]
    manifest = {
        "kind": cfg["kind"],
        "status": record["status"],
        "exit_code": status,
        "config_sha256": hashlib.sha256(dumps(cfg).encode()).hexdigest(),
        "artifacts": [
            {"path": str(a.relative_to(out)), "sha256": _sha256(a), "bytes": a.stat().st_size}
            for a in sorted(set(arts))
        ],
    }
    (out / "manifest.json").write_text(dumps(manifest) + "\n")
    return status


# ------------------------------------------------------------------ verbs


def _cmd_families(args):
    from .families import FAMILIES, instantiate
    from .spectral import make_grid

    grid = make_grid(2, 32)
    for name, (_, schema) in FAMILIES.items():
        f = instantiate(name, grid)
        bad = f.check_invariants(1e-10)
        params = ", ".join(f"{k}: {t} = {d!r}" for k, (t, d) in schema.items())
        print(f"{name:20s} {params}")
        print(f"{'':20s} divergence free and mean zero on 32x32: {'yes' if not bad else bad}")
    return EXIT_OK


def _cmd_suite(args):
    from .properties import MODULES, run_suite

    mods = args.filter or None
    if mods and set(mods) - set(MODULES):
        print(f"unknown module; choose from {', '.join(MODULES)}", file=sys.stderr)
        return EXIT_CONFIG

    def show(r):
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.module:17s} {r.name}  value={_fmt(r.value)} bound={_fmt(r.bound)}"
              + (f"  [{r.detail}]" if r.detail else ""), flush=True)

    results = run_suite(mods, csv_path=args.csv, progress=show)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_CHECKS if failed else EXIT_OK


def _cmd_version(args):
    from . import _kernels

    print(f"nslog {__version__} (kernels: {_kernels.BACKEND})")
    return EXIT_OK


def _cmd_run(args):
    return run_scenario(args.config)


def build_parser():
    p = argparse.ArgumentParser(prog="nslog", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP worker threads")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run one JSON scenario")
    r.add_argument("config")
    r.set_defaults(fn=_cmd_run)
    sub.add_parser("families", help="list built-in initial-data families").set_defaults(fn=_cmd_families)
    s = sub.add_parser("suite", help="run the property suite")
    s.add_argument("--filter", action="append", metavar="MODULE", help="restrict to a module (repeatable)")
    s.add_argument("--csv", default=None, help="write results to this CSV file")
    s.set_defaults(fn=_cmd_suite)
    sub.add_parser("version", help="print version and kernel backend").set_defaults(fn=_cmd_version)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return args.fn(args)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
