"""Configuration-driven experiment runner.

    finmorse --config cfg.json [--out DIR] [--seed N] [--threads N] [--verbose] COMMAND

Commands: validate-metric, geodesic, index, bott, reduce, census, selftest.
Reports are deterministic JSON (sorted keys, 17 significant digits); tabular
data goes to CSV.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

import numpy as np

from . import _jsonio
from .census import run_census
from .descriptors import (bc_from_dict, initial_path_from_dict, isometry_from_dict,
                          manifold_from_dict, metric_from_dict)
from .errors import ConfigError, FinmorseError
from .finsler import check_conditions, check_invariance
from .geodesic import solve_bvp, check_boundary_condition
from .morse import (GapPolicy, bott_functions, hessian, index_nullity,
                    iterate_index, jacobi_monodromy)
from .pathspace import IsometryGraph, Periodic
from .reduction import (reduced_functional, shifting_bookkeeping, spectral_split,
                        splitting_consequence_check)

COMMANDS = ("validate-metric", "geodesic", "index", "bott", "reduce", "census", "selftest")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="finmorse", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="experiment configuration (JSON)")
    ap.add_argument("--out", default=None, help="output directory (default: config output_dir or '.')")
    ap.add_argument("--seed", type=int, default=None, help="seed override")
    ap.add_argument("--threads", type=int, default=None, help="BLAS thread hint (best effort)")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)

    if args.threads is not None:
        _set_threads(args.threads, args.verbose)

    try:
        cfg = _load_config(args.config)
        ctx = _build_context(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        handler = {
            "validate-metric": _cmd_validate_metric,
            "geodesic": _cmd_geodesic,
            "index": _cmd_index,
            "bott": _cmd_bott,
            "reduce": _cmd_reduce,
            "census": _cmd_census,
            "selftest": _cmd_selftest,
        }[args.command]
        return handler(ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FinmorseError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        if ctx["verbose"]:
            traceback.print_exc()
        return 3


def _set_threads(n: int, verbose: bool):
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except Exception:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        if verbose:
            print("threadpoolctl unavailable; set env thread hints only", file=sys.stderr)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _build_context(cfg: dict, args) -> dict:
    man = manifold_from_dict(cfg.get("manifold", {"kind": "flat_torus", "periods": [1.0, 1.0]}))
    metric = metric_from_dict(cfg.get("metric", {"kind": "riemannian"}), man)
    bc = bc_from_dict(cfg.get("boundary", {"kind": "periodic"}), man)

    disc = cfg.get("discretization", {})
    K = int(disc.get("k", 128))
    if not (16 <= K <= 1024):
        raise ConfigError("discretization.k: must be in [16, 1024]")

    tol = cfg.get("tolerances", {})
    for name, default in (("gradient", 1e-9), ("newton", 1e-10), ("eigen_floor", 1e-7),
                          ("eigen_tau", 0.1), ("eigen_ratio", 10.0)):
        v = float(tol.get(name, default))
        if v <= 0:
            raise ConfigError(f"tolerances.{name}: must be positive")
        tol[name] = v
    policy = GapPolicy(floor=tol["eigen_floor"], tau=tol["eigen_tau"], min_ratio=tol["eigen_ratio"])

    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out_dir = args.out or cfg.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    return {
        "cfg": cfg,
        "man": man,
        "metric": metric,
        "bc": bc,
        "K": K,
        "tol": tol,
        "policy": policy,
        "seed": seed,
        "rng": np.random.default_rng(seed),
        "out": out_dir,
        "verbose": bool(args.verbose),
        "options": cfg.get("options", {}),
    }


def _write(ctx, name: str, obj) -> str:
    path = os.path.join(ctx["out"], name)
    with open(path, "w") as fh:
        fh.write(_jsonio.dumps(obj))
    if ctx["verbose"]:
        print(f"wrote {path}")
    return path


def _solve_from_config(ctx):
    opts = ctx["options"]
    if "initial_path" not in opts:
        raise ConfigError("options.initial_path: required for this command")
    init = initial_path_from_dict(opts["initial_path"], ctx["man"], ctx["bc"], ctx["K"], ctx["rng"])
    return solve_bvp(ctx["metric"], init, grad_tol=ctx["tol"]["gradient"])


# -- commands -----------------------------------------------------------------


def _cmd_validate_metric(ctx) -> int:
    report = check_conditions(ctx["metric"], rng=np.random.default_rng(ctx["seed"]))
    if isinstance(ctx["bc"], (IsometryGraph, Periodic)):
        iso = ctx["bc"].iso
        report["isometry_invariance"] = check_invariance(
            ctx["metric"], iso, rng=np.random.default_rng(ctx["seed"]))
    _write(ctx, "metric_report.json", report)
    print("PASS" if report["pass"] else "FAIL",
          f"C1={report['C1']:.6g} C2={report['C2']:.6g}")
    return 0


def _cmd_geodesic(ctx) -> int:
    sol = _solve_from_config(ctx)
    rep = check_boundary_condition(ctx["metric"], sol.path)
    d = sol.to_dict()
    d["boundary_report"] = {k: v for k, v in rep.items()}
    _write(ctx, "solution.json", d)
    print(f"energy={sol.energy:.12g} speed={sol.speed:.12g} "
          f"|grad|={sol.residuals['gradient_h1']:.3e} converged={sol.converged}")
    return 0


def _cmd_index(ctx) -> int:
    sol = _solve_from_config(ctx)
    mode = ctx["options"].get("orbit_mode", "full")
    spec = hessian(ctx["metric"], sol, orbit_mode=mode, policy=ctx["policy"])
    rep = index_nullity(spec, ctx["policy"])
    out = {"solution_energy": sol.energy, "report": rep.as_dict(),
           "p_min_eig": spec.p_min_eig,
           "eigenvalues_head": spec.eigenvalues[:16].tolist()}
    _write(ctx, "index.json", out)
    csv_path = os.path.join(ctx["out"], "eigenvalues.csv")
    with open(csv_path, "w") as fh:
        fh.write("i,eigenvalue\n")
        for i, ev in enumerate(spec.eigenvalues):
            fh.write(f"{i},{ev:.17g}\n")
    print(f"index={rep.m_minus} kernel={rep.m_zero} nu={rep.nu} a={rep.a:.3e}")
    return 0


def _cmd_bott(ctx) -> int:
    sol = _solve_from_config(ctx)
    opts = ctx["options"]
    z = complex(*opts.get("z", [1.0, 0.0]))
    ngrid = int(opts.get("rho_grid", 16))
    rho_grid = np.exp(2j * np.pi * np.arange(ngrid) / ngrid)
    table = bott_functions(ctx["metric"], sol, z=z, rho_grid=rho_grid, policy=ctx["policy"])
    m_max = int(opts.get("m_max", 5))
    it = iterate_index(ctx["metric"], sol, m_max=m_max, policy=ctx["policy"],
                       polish_tol=ctx["tol"]["gradient"])
    mono = jacobi_monodromy(ctx["metric"], sol)
    out = {
        "bott_table": table.as_dict(),
        "iteration": {"rows": it["rows"], "alpha": it["alpha"], "family": it["family"],
                      "dichotomy": it["dichotomy"]},
        "monodromy_eigenvalues": [[ev.real, ev.imag] for ev in mono["eigenvalues"]],
        "identity_holds": all(r["lambda_direct"] == r["lambda_sum"]
                              and r["nu_direct"] == r["nu_sum"] for r in it["rows"]),
    }
    _write(ctx, "bott.json", out)
    lams = [r["lambda_direct"] for r in it["rows"]]
    print(f"lambda: {lams} identity={'OK' if out['identity_holds'] else 'MISMATCH'} "
          f"dichotomy={it['dichotomy']['branch']} eps={it['dichotomy']['epsilon']:.3g}")
    return 0


def _cmd_reduce(ctx) -> int:
    sol = _solve_from_config(ctx)
    opts = ctx["options"]
    mode = opts.get("orbit_mode", "full")
    spec = hessian(ctx["metric"], sol, orbit_mode=mode, policy=ctx["policy"])
    split = spectral_split(spec, ctx["policy"])
    delta = opts.get("delta")
    rf = reduced_functional(split, delta=delta, rng=np.random.default_rng(ctx["seed"]),
                            newton_tol=ctx["tol"]["newton"])
    radii = opts.get("radii", [1e-2, 5e-3, 2.5e-3])
    chk = splitting_consequence_check(split, radii=tuple(radii),
                                      rng=np.random.default_rng(ctx["seed"] + 1),
                                      newton_tol=ctx["tol"]["newton"])
    shift = shifting_bookkeeping(spec, rf)
    out = rf.as_dict()
    out["splitting_check"] = chk
    out["shifting"] = shift
    _write(ctx, "reduce.json", out)
    print(f"m-={out['m_minus']} m0={out['m_zero']} delta={out['delta']:.3g} "
          f"graph_dist={chk['max_graph_distance']:.3e} case='{shift['case']}'")
    return 0


def _cmd_census(ctx) -> int:
    opts = ctx["options"]
    seeds = opts.get("initial_paths")
    if not seeds:
        raise ConfigError("options.initial_paths: census needs a list of initial path descriptors")
    rng = np.random.default_rng(ctx["seed"])
    inits = [initial_path_from_dict(d, ctx["man"], ctx["bc"], ctx["K"], rng,
                                    path=f"options.initial_paths[{i}]")
             for i, d in enumerate(seeds)]
    orbits, failures = run_census(ctx["metric"], inits, grad_tol=ctx["tol"]["gradient"],
                                  dedupe_tol=float(opts.get("dedupe_tol", 1e-4)),
                                  policy=ctx["policy"])
    out = {"orbits": [o["report"] for o in orbits], "failures": failures,
           "n_seeds": len(inits)}
    _write(ctx, "census.json", out)
    print(f"{len(orbits)} orbit(s) from {len(inits)} seeds; {len(failures)} failures")
    for o in orbits:
        r = o["report"]
        print(f"  energy={r['energy']:.9g} index={r.get('index')} nullity={r.get('nullity')}")
    return 0


def _cmd_selftest(ctx) -> int:
    from .acceptance import run_all

    results = run_all(verbose=True)
    out = {"results": [r.as_dict() for r in results],
           "all_pass": all(r.passed for r in results)}
    _write(ctx, "selftest.json", out)
    return 0 if out["all_pass"] else 3


if __name__ == "__main__":
    sys.exit(main())
