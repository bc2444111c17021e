"""Command-line entry point: ``diracwalk <subcommand> [options]``.

Exit codes: 0 success, 1 a check failed (or the run raised), 2 usage error.
Each run writes ``manifest.json`` (deterministic) and ``timing.json``
(wall-clock) into the output directory together with its CSV tables.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import lattice as lt
from . import montecarlo as mc
from . import spectral as sp
from . import transitions as tr
from . import validation
from . import wavefunction as wf
from .config import (OUT_ENV, SUBCOMMANDS, ConfigError, RunConfig, coerce, load_config_file,
                     parse_tolerance, parse_window, validate_config)
from .report import EmitError, field_rows, write_csv, write_json

CONVENTIONS = {
    "heaviside": lt.HEAVISIDE_CONVENTION,
    "fourier": "kernel exp(-i(omega t + k x)); shift E_{a,b} -> exp(+i(a omega + b k))",
    "shift": "E_{a,b} f(t, x) = f(t+a, x+b); T^(a,b) moves the walker by (-a, -b)",
    "kronecker": "kron(A, B)[2i+k, 2j+l] = A[i, j] B[k, l] (numpy.kron)",
    "gamma": "psi = Gamma p with psi1 = p1-p3, psi2 = p2-p4, psi3 = p1-p2+p3-p4, psi4 = p1+p2+p3+p4",
    "current": "rho = psi1^2 + psi2^2, j = psi1^2 - psi2^2",
    "units": "lattice units dt = dx = 1, hbar = c = 1, particle mass = mu",
    "states": "1-based in files, 0-based in arrays",
    "rng": f"{mc.RNG_NAME}: walker w, step lam -> mix64(mix64(mix64(seed) + g(w+1)) + g(lam+1))",
}

_FLAGS = [
    # (flag, config key, type, help)
    ("--mu", "mu", float, "mass parameter mu in (0, 1) [0.1]"),
    ("--epsilon", "epsilon", float, "forward time bias in [0, 1) [0]"),
    ("--lambda", "Lambda", int, "ordinal horizon Lambda [100]"),
    ("--nt", "nt", int, "time extent, even [256]"),
    ("--nx", "nx", int, "space extent, even [256]"),
    ("--seed", "seed", int, "random seed [42]"),
    ("--init", "init", str, "initial data: delta | packet [delta]"),
    ("--t0", "t0", int, "initial time index [nt/2]"),
    ("--x0", "x0", int, "initial space index [nx/2]"),
    ("--state", "state", int, "initial state 1..4 [1]"),
    ("--width", "width", float, "packet width in sites [2]"),
    ("--k-min", "k_min", float, "dispersion grid start [-1]"),
    ("--k-max", "k_max", float, "dispersion grid end [1]"),
    ("--k-num", "k_num", int, "dispersion grid size [201]"),
    ("--threshold", "threshold", float, "validity threshold on |k -+ omega| [0.3]"),
    ("--n-walkers", "n_walkers", int, "Monte Carlo walkers [10000]"),
    ("--mass-ev", "mass_ev", float, "rest energy in eV for units [electron]"),
]


# site-updates allowed for the deterministic reference in ``walk``
REFERENCE_BUDGET = 50_000_000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file of key = value pairs (flags win)")
    common.add_argument("--out", help=f"output directory [${OUT_ENV} or ./diracwalk-out]")
    common.add_argument("--roi-t", help="region of interest in t, LO:HI (half-open)")
    common.add_argument("--roi-x", help="region of interest in x, LO:HI (half-open)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="override a check tolerance (repeatable)")
    for flag, key, typ, hlp in _FLAGS:
        common.add_argument(flag, dest=key, type=str, help=hlp)
    p = _Parser(prog="diracwalk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"diracwalk {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    helps = {
        "derive": "solve for the hop matrices and report every constraint",
        "validate": "run the invariant suite across all modules",
        "dispersion": "lattice vs Einstein dispersion table",
        "evolve": "deterministic evolution, ordinal average, wavefunction and residuals",
        "walk": "Monte Carlo ensemble and collapse observer",
        "units": "lattice spacing in physical units",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def parse_config(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        try:
            values.update(load_config_file(ns.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    tols = dict(values.pop("tolerances", {}))
    for _, key, _, _ in _FLAGS:
        raw = getattr(ns, key)
        if raw is not None:
            values[key] = coerce(key, raw)[1]
    if ns.roi_t:
        values["roi_t"] = parse_window(ns.roi_t)
    if ns.roi_x:
        values["roi_x"] = parse_window(ns.roi_x)
    if ns.out:
        values["out"] = ns.out
    for item in ns.tol:
        k, v = parse_tolerance(item)
        tols[k] = v
    values.pop("subcommand", None)
    cfg = RunConfig(subcommand=ns.subcommand, tolerances=tols, **values)
    unknown = set(tols) - set(validation.TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance names: {sorted(unknown)}")
    return validate_config(cfg)


# ------------------------------------------------------------------ commands

def _check(name, value, tol, ok=None):
    passed = value <= tol if ok is None else ok
    return {"name": name, "value": value, "tolerance": tol, "passed": bool(passed)}


def _tol(cfg, name):
    return cfg.tolerances.get(name, validation.TOLERANCES[name])


def cmd_derive(cfg: RunConfig, out: Path):
    der = tr.derive_transitions()
    ts = der.transitions
    rep = tr.constraint_report(ts, mu=Fraction(str(cfg.mu)))
    doc = {
        "t00": [[str(v) for v in row] for row in ts.t00],
        "hops": {f"{lab.a},{lab.b}": [[str(v) for v in row] for row in ts.hops[lab]]
                 for lab in tr.HOP_LABELS},
        "n_solutions": der.n_solutions,
        "unique": der.unique,
        "matches_canonical": der.matches_canonical,
        "report": rep.to_dict(),
    }
    write_json(out / "derive.json", doc)
    print(json.dumps(doc["hops"], indent=2))
    checks = [
        _check("unique_solution", der.n_solutions, 1, der.unique),
        _check("derive_matches_canonical", 0, 0, der.matches_canonical),
        _check("constraint_residuals", max(rep.residuals.values()), _tol(cfg, "constraint_residuals")),
    ]
    results = {"residuals": rep.residuals,
               "discrepancies": [{k: v for k, v in d.items() if k in ("name", "deviation_max_abs", "note")}
                                 for d in rep.discrepancies]}
    return results, checks


def cmd_validate(cfg: RunConfig, out: Path):
    suite = validation.run_suite(cfg.seed, cfg.tolerances)
    write_csv(out / "checks.csv", ("module", "name", "kind", "value", "tolerance", "passed"),
              (c.row() for c in suite))
    for c in suite:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark} {c.module}.{c.name} value={c.value:.6g} tol={c.tolerance:.3g}")
    checks = [_check(f"{c.module}.{c.name}", c.value, c.tolerance, c.passed)
              for c in suite if c.kind == "invariant"]
    results = {"discrepancies": [dataclasses.asdict(c) for c in suite if c.kind == "discrepancy"]}
    return results, checks


def cmd_dispersion(cfg: RunConfig, out: Path):
    ks = np.linspace(cfg.k_min, cfg.k_max, cfg.k_num)
    pts = sp.dispersion_error_map(cfg.mu, ks, cfg.threshold)
    write_csv(out / "dispersion.csv", ("k", "omega_lattice", "omega_einstein", "rel_error", "in_regime"),
              (p.row() for p in pts))
    small = [p.rel_error for p in pts if abs(p.k) <= 0.1 and not math.isnan(p.rel_error)]
    reg = [p.rel_error for p in pts if p.in_regime]
    results = {
        "points": len(pts),
        "no_real_root": sum(math.isnan(p.omega_lattice) for p in pts),
        "in_regime": len(reg),
        "max_rel_error_in_regime": max(reg) if reg else None,
        "max_rel_error_k_le_0.1": max(small) if small else None,
    }
    print(json.dumps(results, indent=2))
    return results, []


def _initial_field(cfg: RunConfig, spec: lt.LatticeSpec) -> lt.ProbField:
    t0, x0 = cfg.site()
    if cfg.init == "packet":
        mix = [0.0] * 4
        mix[cfg.state - 1] = 1.0
        return lt.init_packet(spec, (t0, x0), cfg.width, mix)
    return lt.init_delta(spec, t0, x0, cfg.state)


def cmd_evolve(cfg: RunConfig, out: Path):
    spec = lt.LatticeSpec(cfg.nt, cfg.nx, cfg.mu)
    ts = tr.apply_bias(tr.canonical_transitions(), cfg.epsilon)
    p0 = _initial_field(cfg, spec)
    prior = lt.OrdinalPrior(cfg.mu, cfg.Lambda)
    run = lt.evolve_fold(p0, ts, prior)
    w = wf.extract(run.pbar, mu=cfg.mu, Lambda=cfg.Lambda)
    cur = wf.currents(w)
    roi = lt.RegionOfInterest(*(cfg.roi_t or (0, cfg.nt)), *(cfg.roi_x or (0, cfg.nx)))
    diag = lt.eigen_relation_residual(run.pbar, run.p_end, ts, cfg.mu, roi, p0=run.p0, Lambda=cfg.Lambda)
    cont = wf.continuity_residual(cur, periodic=True)

    write_csv(out / "pbar.csv", ("t_index", "x_index", "p1", "p2", "p3", "p4"), field_rows(run.pbar.values))
    write_csv(out / "psi.csv", ("t_index", "x_index", "psi1", "psi2", "psi3", "psi4"), field_rows(w.psi))
    write_csv(out / "currents.csv", ("t_index", "x_index", "rho", "j"),
              field_rows(np.stack([cur.rho, cur.j])))
    write_csv(out / "p_last.csv", ("t_index", "x_index", "p1", "p2", "p3", "p4"),
              field_rows(run.p_last.values, nonzero_only=True))

    tele = lt.telescoping_residual(run.pbar, run.p0, run.p_end, ts, prior)
    mass_drift = abs(run.p_last.mass() - p0.mass())
    results = {
        "telescoping_residual": tele,
        "mass_p0": p0.mass(),
        "mass_last": run.p_last.mass(),
        "mass_pbar": run.pbar.mass(),
        "eigen_residual_roi": diag.residual,
        "eigen_boundary_bound": diag.boundary_bound,
        "eigen_exact_boundary": diag.exact_boundary,
        "mass_in_roi_end": diag.mass_in_roi_end,
        "exact_dirac_residual": wf.exact_dirac_residual(w, cfg.mu, periodic=True),
        "auxiliary_residual": wf.auxiliary_residual(w, cfg.mu, periodic=True),
        "continuum_dirac_residual": wf.continuum_dirac_residual(w, cfg.mu, periodic=True),
        "psi_scale": w.scale(),
        "continuity_max_abs": cont.max_abs,
        "slice_charge_min": float(cont.slice_sums.min()),
        "slice_charge_max": float(cont.slice_sums.max()),
    }
    checks = [
        _check("telescoping", tele, _tol(cfg, "telescoping")),
        _check("mass_conservation", mass_drift, _tol(cfg, "mass_conservation")),
        _check("eigen_residual_matches_boundary", abs(diag.residual - diag.exact_boundary),
               _tol(cfg, "telescoping")),
    ]
    print(json.dumps(results, indent=2))
    return results, checks


def cmd_walk(cfg: RunConfig, out: Path):
    spec = lt.LatticeSpec(cfg.nt, cfg.nx, cfg.mu)
    try:
        lt.require_wrap_free(spec, cfg.Lambda)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    t0, x0 = cfg.site()
    init = mc.Walker(t0, x0, cfg.state)
    s = mc.run_ensemble(cfg.n_walkers, cfg.Lambda, init, cfg.epsilon, cfg.seed, cfg.nt, cfg.nx,
                        record_lambdas=(), store_trajectories=1)
    traj = s.trajectories[0]
    rec = mc.observe_collapse(traj)
    write_csv(out / "trajectory.csv", ("lambda", "t_index", "x_index", "state"),
              zip(traj.lam, traj.t, traj.x, traj.state))
    write_csv(out / "observation.csv", ("t_index", "x_observed", "lambda_last"), rec.rows())
    hist = mc.sparse_histogram(s.final)
    write_csv(out / "histogram.csv", ("t_index", "x_index", "p1", "p2", "p3", "p4"), hist)

    tv = None
    if cfg.nt * cfg.nx * (cfg.Lambda + 1) <= REFERENCE_BUDGET:
        ref = validation.deterministic_field(cfg.nt, cfg.nx, cfg.mu, cfg.Lambda, t0, x0, cfg.state,
                                             cfg.epsilon).values
        freq = np.zeros_like(ref)
        for t, x, *f in hist:
            freq[:, t, x] = f
        tv = mc.total_variation(freq, ref)
    horizon = t0 + int(cfg.Lambda * cfg.epsilon / 2)
    alt = mc.alternation_check(traj, cfg.nt, cfg.nx) if len(traj) > 1 else mc.AlternationResult(True)
    defects = validation.observation_defects(traj, rec)
    fwd_frac = s.forward_steps / s.total_steps if s.total_steps else math.nan
    results = {
        "total_variation": tv,  # None when the lattice exceeds the reference budget
        "tv_expected_scale": 1 / math.sqrt(cfg.n_walkers),
        "forward_fraction": fwd_frac,
        "forward_expected": (1 + cfg.epsilon) / 2,
        "total_steps": s.total_steps,
        "hop_violations": s.hop_violations,
        "alternation_violations": s.alternation_violations,
        "observed_slices": len(rec),
        "visited_fraction_t0_to_drift_horizon": mc.visited_fraction(rec, t0, horizon),
        "final_t_index": int(traj.t[-1]),
    }
    n = max(s.total_steps, 1)
    z = abs(fwd_frac - (1 + cfg.epsilon) / 2) / math.sqrt((1 - cfg.epsilon**2) / 4 / n) if s.total_steps else 0.0
    checks = [
        _check("mc_hop_length", s.hop_violations, 0),
        _check("mc_alternation", s.alternation_violations + (0 if alt else 1), 0),
        _check("collapse_one_x_per_slice", defects, 0),
        _check("mc_branch_frequency", z, _tol(cfg, "mc_branch_frequency")),
    ]
    print(json.dumps(results, indent=2))
    return results, checks


def cmd_units(cfg: RunConfig, out: Path):
    u = sp.physical_units(cfg.mass_ev, cfg.mu)
    results = dataclasses.asdict(u)
    results["mass_ev"] = cfg.mass_ev
    print(json.dumps(results, indent=2))
    return results, []


COMMANDS = {
    "derive": cmd_derive,
    "validate": cmd_validate,
    "dispersion": cmd_dispersion,
    "evolve": cmd_evolve,
    "walk": cmd_walk,
    "units": cmd_units,
}


def dispatch(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "artifact": "diracwalk",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "config": cfg.echo(),
        "tolerances": validation.resolve_tolerances(cfg.tolerances),
        "conventions": CONVENTIONS,
        "results": {},
        "checks": [],
        "status": "error",
        "error": None,
    }
    start = time.perf_counter()
    code = 1
    try:
        results, checks = COMMANDS[cfg.subcommand](cfg, out)
        manifest["results"] = results
        manifest["checks"] = checks
        ok = all(c["passed"] for c in checks)
        manifest["status"] = "ok" if ok else "failed"
        code = 0 if ok else 1
    except ConfigError as exc:
        manifest["error"] = f"usage: {exc}"
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    except Exception as exc:  # recorded in the manifest, then reported
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        print(f"error: {manifest['error']}", file=sys.stderr)
        code = 1
    try:
        write_json(out / "manifest.json", manifest)
        write_json(out / "timing.json", {"wall_clock_s": time.perf_counter() - start})
    except EmitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return code


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"diracwalk: error: {exc}", file=sys.stderr)
        return 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
