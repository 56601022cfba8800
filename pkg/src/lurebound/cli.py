"""Command-line front end: analysis sweeps, verification suites, simulation.

Subcommands
-----------
analyze    run the gamma* pipeline on the grid described by a config file
sweep      builtin-plant L sweep (the full comparison figure) with defaults
verify     run a randomized property suite and report pass/fail
simulate   closed-loop simulation of a configured Lur'e loop
dump-lmi   write the assembled LMI system and flattened conic problem

Exit codes: 0 success, 2 config error, 3 solver limit, 4 verification
failure.  Result CSVs use the fixed header
``L,nu,nutilde,mode,gamma,status,iters,solve_ms``; everything except
``solve_ms`` is deterministic for a fixed seed and config.
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from .analysis import (AnalysisRequest, MODES, builtin_plant,
                       compute_gamma_star, verify_iqc_empirically)
from .convexfn import (MaxAffine, make_builtin, check_cyclic_monotonicity,
                       ConjugateOracle, verify_conjugate_dissipation,
                       verify_subgradient_dissipation)
from .lmi import assemble_analysis_lmis, fdi_check, flatten, kyp_feasible
from .multiplier import (check_hyperdominance, combined_filter, m_matrix,
                         random_feasible_param)
from .sim import check_amplitude_bound, simulate_lure
from .solver import SolverOptions
from .statespace import PlantRealization, Realization, interconnect

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

CSV_HEADER = ["L", "nu", "nutilde", "mode", "gamma", "status", "iters",
              "solve_ms"]

DEFAULT_L_GRID = [round(0.1 + 3.4 * i / 35, 6) for i in range(36)]


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration

def load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc


def _matrix(block, key, data):
    try:
        return np.asarray(data[key], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"[{block}] missing key {key!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{block}] key {key!r} is not a numeric matrix") from exc


def plant_from_config(cfg):
    """Build the plant: either the builtin benchmark (keyed by L) or inline
    matrices given row-major."""
    block = cfg.get("plant", {})
    if "L" in block:
        try:
            return builtin_plant(float(block["L"]))
        except ValueError as exc:
            raise ConfigError(f"[plant] {exc}") from exc
    for key in ("A", "B", "C", "D", "C_e"):
        if key not in block:
            raise ConfigError(f"[plant] needs either L or inline matrices; "
                              f"missing {key!r}")
    mats = {k: _matrix("plant", k, block) for k in ("A", "B", "C", "D", "C_e")}
    try:
        return PlantRealization(np.atleast_2d(mats["A"]), np.atleast_2d(mats["B"]),
                                np.atleast_2d(mats["C"]), np.atleast_2d(mats["D"]),
                                np.atleast_2d(mats["C_e"]))
    except Exception as exc:
        raise ConfigError(f"[plant] {exc}") from exc


def solver_options_from_config(cfg):
    block = cfg.get("solver", {})
    opts = SolverOptions()
    for key in ("gap_tol", "feas_tol", "step_fraction"):
        if key in block:
            opts = type(opts)(**{**opts.__dict__, key: float(block[key])})
    if "max_iter" in block:
        opts = type(opts)(**{**opts.__dict__, "max_iter": int(block["max_iter"])})
    return opts


def grid_from_config(cfg, mode_override=None):
    block = cfg.get("sweep", {})
    if "L_grid" in block:
        Ls = [float(v) for v in block["L_grid"]]
    elif "L" in cfg.get("plant", {}):
        Ls = [float(cfg["plant"]["L"])]
    elif "plant" in cfg:
        Ls = [None]  # inline plant, L column written as nan
    else:
        Ls = [float(v) for v in DEFAULT_L_GRID]
    pairs = [tuple(int(v) for v in p) for p in block.get("nu_pairs",
             [[0, 0], [1, 1], [2, 2], [3, 3]])]
    modes = block.get("modes", ["terminal", "hard"])
    if mode_override:
        modes = [mode_override]
    for m in modes:
        if m not in MODES:
            raise ConfigError(f"[sweep] unknown mode {m!r}")
    for p in pairs:
        if len(p) != 2 or min(p) < 0:
            raise ConfigError(f"[sweep] bad nu pair {p!r}")
    if not Ls or not pairs or not modes:
        raise ConfigError("[sweep] empty grid")
    return Ls, pairs, modes


# ---------------------------------------------------------------------------
# analyze / sweep

def _solve_point(args):
    L, nu, nut, mode, backend, opts_dict, inline = args
    opts = SolverOptions(**opts_dict)
    if inline is not None:
        plant = PlantRealization(*[np.asarray(m) for m in inline])
    else:
        plant = builtin_plant(L)
    res = compute_gamma_star(AnalysisRequest(plant, nu, nut, mode,
                                             solver_options=opts,
                                             backend=backend))
    sr = res.solve_result
    gamma = res.gamma if res.gamma is not None else float("nan")
    return {
        "L": L if L is not None else float("nan"),
        "nu": nu, "nutilde": nut, "mode": mode,
        "gamma": f"{gamma:.12g}",
        "status": res.status,
        "iters": sr.iterations if sr is not None else 0,
        "solve_ms": f"{1000.0 * sr.wall_time:.3f}" if sr is not None else "0",
    }


def run_grid(plant_cfg, Ls, pairs, modes, backend, opts, jobs, out_dir):
    inline = None
    if Ls == [None]:
        p = plant_from_config(plant_cfg)
        inline = (p.A, p.B, p.C, p.D, p.C_e)
    jobs = max(1, jobs or os.cpu_count() or 1)
    tasks = [(L, nu, nut, mode, backend, dict(opts.__dict__), inline)
             for L in Ls for (nu, nut) in pairs for mode in modes]
    if jobs == 1 or len(tasks) == 1:
        rows = [_solve_point(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_solve_point, tasks))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "results.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_HEADER)
        w.writeheader()
        for row in rows:
            w.writerow(row)
    _write_plot_data(rows, Ls, pairs, modes, out_dir)
    bad = [r for r in rows if r["status"] not in
           ("optimal", "infeasible", "unbounded")]
    return rows, path, (EXIT_SOLVER if bad else EXIT_OK)


def _write_plot_data(rows, Ls, pairs, modes, out_dir):
    """One gamma series per (nu, mode) over the L grid, wide CSV."""
    if any(L is None for L in Ls):
        return
    series = {}
    for r in rows:
        series.setdefault((r["nu"], r["mode"]), {})[r["L"]] = r["gamma"]
    keys = sorted(series, key=lambda k: (k[1], k[0]))
    path = os.path.join(out_dir, "plot_data.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["L"] + [f"gamma_{mode}_nu{nu}" for nu, mode in keys])
        for L in Ls:
            w.writerow([L] + [series[k].get(L, "nan") for k in keys])
    _write_svg_chart(series, Ls, keys, os.path.join(out_dir, "gamma_vs_L.svg"))


def _write_svg_chart(series, Ls, keys, path):
    vals = [float(v) for s in series.values() for v in s.values()
            if np.isfinite(float(v))]
    if not vals:
        return
    W, H, pad = 640, 420, 50
    lo, hi = min(Ls), max(Ls)
    ylo, yhi = 0.0, max(vals) * 1.05
    sx = lambda L: pad + (W - 2 * pad) * (L - lo) / max(hi - lo, 1e-12)
    sy = lambda g: H - pad - (H - 2 * pad) * (g - ylo) / max(yhi - ylo, 1e-12)
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
              "#8c564b", "#e377c2", "#7f7f7f"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{pad}" y1="{H-pad}" x2="{W-pad}" y2="{H-pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H-pad}" stroke="black"/>',
             f'<text x="{W//2}" y="{H-12}" font-size="13">L</text>',
             f'<text x="12" y="{H//2}" font-size="13">gamma*</text>']
    for i, key in enumerate(keys):
        pts = [(sx(L), sy(float(series[key][L]))) for L in Ls
               if L in series[key] and np.isfinite(float(series[key][L]))]
        if not pts:
            continue
        d = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        col = colors[i % len(colors)]
        parts.append(f'<polyline points="{d}" fill="none" stroke="{col}"/>')
        parts.append(f'<text x="{W-pad+4}" y="{pad+14*i+10}" font-size="11" '
                     f'fill="{col}">nu={key[0]} {key[1]}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def cmd_analyze(args):
    cfg = load_config(args.config) if args.config else {}
    if args.mode and args.mode not in MODES:
        raise ConfigError(f"unknown mode {args.mode!r}")
    Ls, pairs, modes = grid_from_config(cfg, args.mode)
    opts = solver_options_from_config(cfg)
    _, path, code = run_grid(cfg, Ls, pairs, modes, args.solver, opts,
                             args.jobs, args.out)
    print(f"wrote {path}")
    return code


def _sweep_impl(cfg, args):
    if args.mode and args.mode not in MODES:
        raise ConfigError(f"unknown mode {args.mode!r}")
    Ls, pairs, modes = grid_from_config(cfg, args.mode)
    opts = solver_options_from_config(cfg)
    _, path, code = run_grid(cfg, Ls, pairs, modes, args.solver, opts,
                             args.jobs, args.out)
    print(f"wrote {path}")
    return code


# ---------------------------------------------------------------------------
# verify

def _suite_hyperdominance(seed, log):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(25):
        nu, nut = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        p = random_feasible_param(nu, nut, rng)
        for T in range(p.T0, 3 * p.T0 + 1):
            rep = check_hyperdominance(m_matrix(p, T))
            worst = min(worst, rep.worst_offdiag, rep.worst_row_sum,
                        rep.worst_col_sum)
            if not rep.passed:
                log.append({"suite": "hyperdominance-propagation",
                            "nu": nu, "nutilde": nut, "T": T,
                            "worst": worst})
                return False
    return True


def random_max_affine(rng, d=1, extra=2):
    """Random normalized max-affine function: a pair of opposite slopes
    active at the origin keeps 0 in the subdifferential there."""
    a = rng.standard_normal(d)
    rows = [a, -a]
    bs = [0.0, 0.0]
    for _ in range(int(rng.integers(0, extra + 1))):
        rows.append(rng.standard_normal(d))
        bs.append(float(rng.uniform(-1.0, -0.1)))
    return MaxAffine(np.array(rows), np.array(bs))


def _suite_iqc(seed, log):
    rng = np.random.default_rng(seed)
    for trial in range(50):
        nu, nut = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        p = random_feasible_param(nu, nut, rng)
        f = random_max_affine(rng)
        z = rng.uniform(-3, 3, int(rng.integers(1, 21)))
        margin = verify_iqc_empirically(p, f, z, rng=rng)
        if margin < -1e-9:
            log.append({"suite": "iqc-empirical", "trial": trial,
                        "margin": margin})
            return False
    return True


def _suite_kyp(seed, log):
    from .statespace import freq_response
    rng = np.random.default_rng(seed)
    for trial in range(12):
        n, m = int(rng.integers(2, 5)), int(rng.integers(1, 3))
        A = rng.standard_normal((n, n))
        A *= 0.9 / max(np.abs(np.linalg.eigvals(A)))
        sysr = Realization(A, rng.standard_normal((n, m)),
                           rng.standard_normal((m, n)),
                           rng.standard_normal((m, m)))
        # straddle the peak gain so both outcomes get exercised
        peak = max(np.linalg.norm(freq_response(sysr, np.exp(1j * w)), 2)
                   for w in np.linspace(0, np.pi, 256))
        for gamma in (0.8 * peak, 1.25 * peak):
            P = np.block([[np.eye(m), np.zeros((m, m))],
                          [np.zeros((m, m)), -gamma**2 * np.eye(m)]])
            lmi_ok, _ = kyp_feasible(sysr, P)
            fdi_ok, _ = fdi_check(sysr, P)
            if lmi_ok != fdi_ok:
                log.append({"suite": "kyp-fdi", "trial": trial,
                            "gamma": gamma, "lmi": lmi_ok, "fdi": fdi_ok})
                return False
    return True


def _suite_convex(seed, log):
    rng = np.random.default_rng(seed)
    fams = [random_max_affine(rng, d=2) for _ in range(4)]
    Q = rng.standard_normal((2, 2))
    fams.append(make_builtin("quadratic", Q=Q @ Q.T))
    for f in fams:
        for _ in range(40):
            m = int(rng.integers(2, 7))
            cyc = [rng.uniform(-5, 5, 2) for _ in range(m)]
            margin = check_cyclic_monotonicity(
                lambda v: f.subgradient(v, rng), cyc)
            if margin < -1e-10:
                log.append({"suite": "convex-dissipation",
                            "check": "cyclic-monotonicity", "margin": margin})
                return False
        samples = [(rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2))
                   for _ in range(50)]
        slack = verify_subgradient_dissipation(f, samples)
        if slack < -1e-9:
            log.append({"suite": "convex-dissipation",
                        "check": "subgradient", "slack": slack})
            return False
    return True


SUITES = {
    "hyperdominance-propagation": _suite_hyperdominance,
    "iqc-empirical": _suite_iqc,
    "kyp-fdi": _suite_kyp,
    "convex-dissipation": _suite_convex,
}


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        if name not in SUITES:
            raise ConfigError(f"unknown suite {name!r}; choose from "
                              f"{sorted(SUITES)} or 'all'")
    log = []
    ok = True
    for name in names:
        passed = SUITES[name](args.seed, log)
        print(f"{name}: {'pass' if passed else 'FAIL'}")
        ok = ok and passed
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verify_log.json"), "w") as fh:
            json.dump({"seed": args.seed, "failures": log}, fh, indent=2)
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# simulate

def _function_from_config(cfg, d):
    block = cfg.get("function", {"kind": "quadratic", "beta": 0.1})
    kind = block.get("kind", "quadratic")
    params = {k: v for k, v in block.items() if k != "kind"}
    if kind == "quadratic" and "beta" in params:
        params = {"Q": float(params["beta"]) * np.eye(d)}
    try:
        return make_builtin(kind, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[function] {exc}") from exc


def cmd_simulate(args):
    cfg = load_config(args.config) if args.config else {}
    plant = plant_from_config(cfg)
    sim_cfg = cfg.get("simulate", {})
    horizon = int(sim_cfg.get("horizon", 500))
    if horizon < 0:
        raise ConfigError("[simulate] horizon must be >= 0")
    x0 = np.asarray(sim_cfg.get("x0", np.eye(plant.n)[0]), dtype=float)
    if x0.shape != (plant.n,):
        raise ConfigError(f"[simulate] x0 must have {plant.n} entries")
    f = _function_from_config(sim_cfg, plant.d)
    rng = np.random.default_rng(args.seed)
    traj = simulate_lure(plant, f, x0, horizon, rng)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "trajectory.csv")
    traj.to_csv(path)
    peak = float(np.max(np.abs(traj.e))) if traj.e.size else 0.0
    print(f"wrote {path}; peak |e| = {peak:.6g} over horizon {horizon}")
    if "gamma" in sim_cfg:
        gamma = float(sim_cfg["gamma"])
        ok, ratio, t_worst = check_amplitude_bound(traj, plant.C_e, gamma, x0)
        print(f"amplitude check vs gamma={gamma:.6g}: "
              f"{'pass' if ok else 'FAIL'} (worst ratio {ratio:.9g} "
              f"at t={t_worst})")
        if not ok:
            return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# dump-lmi

def cmd_dump_lmi(args):
    cfg = load_config(args.config) if args.config else {}
    plant = plant_from_config(cfg)
    block = cfg.get("sweep", {})
    pairs = block.get("nu_pairs", [[1, 1]])
    nu, nut = (int(v) for v in pairs[0])
    mode = args.mode or (block.get("modes", ["terminal"]))[0]
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "static":
        nu = nut = 0
    from .multiplier import MultiplierParam  # local: only for dimensions
    p = MultiplierParam(nu, nut, np.zeros(nu + 1), np.zeros(nut + 1),
                        np.zeros((nut, nu)) if mode == "terminal" else None,
                        d=plant.d)
    filt = combined_filter(p)
    aug = interconnect(filt, plant)
    sys_ = assemble_analysis_lmis(aug, plant.C_e, nu, nut, plant.d, mode)
    prob, _ = flatten(sys_)
    os.makedirs(args.out, exist_ok=True)
    lmi_path = os.path.join(args.out, "lmi_system.txt")
    conic_path = os.path.join(args.out, "conic_problem.txt")
    with open(lmi_path, "w") as fh:
        fh.write(sys_.dump())
    with open(conic_path, "w") as fh:
        fh.write(prob.dump())
    print(f"wrote {lmi_path} and {conic_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="lurebound",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: logical cores)")
        p.add_argument("--solver", choices=["embedded", "external"],
                       default="embedded")
        p.add_argument("--mode", choices=list(MODES), default=None)

    for name, fn in (("analyze", cmd_analyze), ("sweep", _dispatch_sweep),
                     ("simulate", cmd_simulate), ("dump-lmi", cmd_dump_lmi)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)

    pv = sub.add_parser("verify")
    common(pv)
    pv.add_argument("--suite", default="all",
                    help=f"one of {sorted(SUITES)} or 'all'")
    pv.set_defaults(func=cmd_verify)
    return ap


def _dispatch_sweep(args):
    cfg = load_config(args.config) if args.config else {}
    cfg.setdefault("sweep", {}).setdefault("L_grid", DEFAULT_L_GRID)
    return _sweep_impl(cfg, args)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
