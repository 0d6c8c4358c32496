"""Command-line front end.

``poissonlab <subcommand> [flags]`` with subcommands ``spectrum``, ``green``,
``heat``, ``poisson``, ``flow`` and ``verify``.  Every run writes
``manifest.json`` (the resolved config), ``summary.json`` and per-operation
``*.report.json`` / ``*.csv`` files.  Exit codes: 0 success, 1 a certificate
failed (named in the summary), 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import green as G
from . import poisson as P
from .cache import KernelCache
from .config import SUBCOMMANDS, build_config, load_config_file, parse_model
from .errors import ConfigurationError, DomainError, PoissonLabError
from .heat import ball_chart, green_from_heat, heat_evolve, l2_decay_check
from .numerics import build_polar_grid
from .ricciflow import FlowConfig, run_flow
from .spectrum import lambda1_exhaustion, lambda1_lower_bound
from .verify import _round, determinism_criterion, run_suite, summary_bytes

log = logging.getLogger("poissonlab")

FLUX_CV_TOL = 0.05
COAREA_TOL = 0.08
AGREEMENT_TOL = 0.02
HEAT_MASS_TOL = 0.03
GROWTH_B_TOL = 0.05
GI_MIN_NTHETA = 256  # off-centre charts under-resolve the far side of B_p(R) below this


# ------------------------------------------------------------------ parsing

def _common(p):
    p.add_argument("--config", help="JSON or YAML file mirroring RunConfig")
    p.add_argument("--model", help="hyperbolic2, hyperbolic3, hyperbolic:K=-0.5, perturbed:eta=0.1")
    p.add_argument("--rmax", type=float)
    p.add_argument("--nr", type=int)
    p.add_argument("--ntheta", type=int)
    p.add_argument("--h", type=float, help="radial spacing of pole charts")
    p.add_argument("--poles", help="comma-separated pole radii or random:N")
    p.add_argument("--eps", type=float)
    p.add_argument("--route", choices=("radial", "green-integral", "exhaustion", "all"))
    p.add_argument("--profile")
    p.add_argument("--source", help="powerlaw:eps=1, bump:radius=2, manufactured, zero")
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--scheme", choices=("semi-implicit", "explicit"))
    p.add_argument("--out")
    p.add_argument("--cache", choices=("use", "rebuild", "off"))
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-fields", dest="dump_fields", action="store_true", default=None)
    p.add_argument("--determinism", action="store_true", default=None,
                   help="verify: run the suite twice and compare summaries")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="poissonlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        _common(sub.add_parser(name))
    return parser


# ------------------------------------------------------------------ output

def _dump_json(obj):
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


class Outputs:
    def __init__(self, root):
        self.root = Path(root)
        self.files = []
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            with tempfile.NamedTemporaryFile(dir=self.root):
                pass
        except OSError as exc:
            raise ConfigurationError(f"output directory {self.root} is not writable: {exc}") from exc

    def json(self, name, obj):
        (self.root / name).write_text(_dump_json(obj))
        self.files.append(name)

    def raw(self, name, data: bytes):
        (self.root / name).write_bytes(data)
        self.files.append(name)

    def csv(self, name, header, rows):
        with open(self.root / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        self.files.append(name)


def _cache(cfg):
    root = cfg.cache_dir or str(Path(cfg.out) / "cache")
    return KernelCache(root, cfg.cache)


# --------------------------------------------------------------- commands

def cmd_spectrum(cfg, out):
    model = parse_model(cfg.model)
    R = cfg.rmax
    grid = build_polar_grid(model, R, cfg.nr, cfg.ntheta,
                            exhaustion_radii=[R / 2, 2 * R / 3, 5 * R / 6, R])
    rep = lambda1_exhaustion(model, grid)
    out.json("spectrum.report.json", rep.to_dict())
    out.csv("spectrum.csv", ["R", "lambda"], rep.numeric_estimates)
    failures = []
    if not rep.consistent:
        failures.append(f"extrapolated {rep.extrapolated:.4g} below b^2/4 = {rep.analytic_lower:.4g} (5%)")
    if not rep.monotone:
        failures.append("exhaustion estimates not decreasing")
    return {"extrapolated": rep.extrapolated, "analytic_lower": rep.analytic_lower}, failures


def _coarea(kernel):
    lo, hi = kernel.offpole_range()
    for eps in (1e-2, math.sqrt(lo * hi) if lo > 0 else hi / 10):
        try:
            return G.coarea_identity_check(kernel, 0.1, eps)
        except DomainError:
            continue
    raise DomainError(f"no admissible co-area band for pole r={kernel.pole_radius}")


def cmd_green(cfg, out):
    model = parse_model(cfg.model)
    R = cfg.rmax
    bad = [rx for rx in cfg.poles if R - rx < 2]
    if bad:
        raise ConfigurationError(f"poles {bad} are within 2 of the truncation radius {R}")
    cache = _cache(cfg)
    kernels = [cache.kernel(model, rx, R, cfg.h, cfg.ntheta) for rx in cfg.poles]
    fit = G.fit_pointwise_bounds(kernels)
    C0 = max(G.gradient_estimate_check(k).p99 for k in kernels)
    bounds = {**fit.to_dict(), "C0": C0}
    lam = lambda1_lower_bound(model)
    failures, per_pole = [], {}
    if not fit.passed:
        failures.append(f"pointwise bound fit residual {fit.residual:.3g}")
    for k in kernels:
        rx = k.pole_radius
        fs = G.flux_stats(k)
        radii = [float(j) for j in range(1, 64)
                 if j + 1 + rx < R and j + 1 <= 0.9 * k.grid.rho_max]
        decay = G.annulus_l2_decay(k, radii[:6], lambda1=lam) if len(radii) >= 2 else None
        co = _coarea(k)
        env = G.lower_envelope_check(k, fit.A, fit.B, C0)
        sl = G.superlevel_mass(k, fit.A * math.exp(fit.B * rx), fit.A, fit.B)
        rep = G.GreenReport(rx, fs, decay, co, bounds, sl.violations, sl.sublevel_violations, env,
                            extra={"harmonic_residual": k.harmonic_residual,
                                   "gradient": G.gradient_estimate_check(k).to_dict(),
                                   "superlevel_mass": sl.mass})
        name = f"green_r{rx:g}"
        out.json(f"{name}.report.json", rep.to_dict())
        if cfg.dump_fields:
            m = k.inside
            out.csv(f"{name}.csv", ["rho", "psi", "G"],
                    zip(k.rho2d[m], np.broadcast_to(k.grid.theta, k.grid.shape)[m], k.v[m]))
        tag = f"r={rx:g}"
        if fs.cv >= FLUX_CV_TOL:
            failures.append(f"{tag}: flux cv {fs.cv:.3g} >= {FLUX_CV_TOL}")
        if co.rel_error >= COAREA_TOL:
            failures.append(f"{tag}: co-area error {co.rel_error:.3g} >= {COAREA_TOL}")
        if decay is not None and not decay.passed:
            failures.append(f"{tag}: annulus decay slope {decay.slope:.3g} < 2 sqrt(b^2/4) - 10%")
        if env.violations or sl.violations or sl.sublevel_violations:
            failures.append(f"{tag}: envelope/inclusion violations")
        per_pole[f"{rx:g}"] = {"flux_cv": fs.cv, "coarea_error": co.rel_error,
                               "decay_exponent": None if decay is None else decay.slope}
    out.json("green.report.json", {"bounds": bounds, "poles": per_pole,
                                   "cache": {"hits": cache.hits, "misses": cache.misses}})
    return {"bounds": {"A": fit.A, "B": fit.B, "C0": C0}, "poles": per_pole}, failures


def cmd_heat(cfg, out):
    model = parse_model(cfg.model)
    failures, rows = [], {}
    for rx in cfg.poles:
        traj = heat_evolve(ball_chart(model, rx, ntheta=cfg.ntheta), model,
                           t_final=cfg.t_final or 3.0, dt_late=cfg.dt or 1e-2)
        l2 = l2_decay_check(traj)
        hg = green_from_heat(traj)
        keep = np.flatnonzero(np.isclose(np.mod(traj.times + 1e-9, 0.1), 0, atol=1e-6))
        m = traj.masses
        rep = {"center_radius": rx, "mass_curve": [[traj.times[i], m[i]] for i in keep],
               "l2_rate": l2.rate, "green_mass": hg.mass, "l2": l2.to_dict(), "green": hg.to_dict()}
        name = f"heat_r{rx:g}"
        out.json(f"{name}.report.json", rep)
        out.csv(f"{name}.csv", ["t", "mass", "l2_squared", "sup"],
                ([s.t, s.mass, s.l2, s.sup] for s in traj.states()))
        mass_err = abs(hg.mass / hg.elliptic_mass - 1)
        if not l2.passed:
            failures.append(f"r={rx:g}: L2 rate {l2.rate:.3g} below {l2.lower_bound:.3g}")
        if mass_err > HEAT_MASS_TOL:
            failures.append(f"r={rx:g}: heat vs elliptic ball Green mass {mass_err:.3g}")
        rows[f"{rx:g}"] = {"l2_rate": l2.rate, "green_mass": hg.mass}
    return {"poles": rows}, failures


def _source(cfg, model):
    spec = cfg.source
    if spec.startswith("powerlaw") and "eps=" not in spec:
        spec = f"powerlaw:eps={cfg.eps}"
    return P.parse_source(spec, model)


def cmd_poisson(cfg, out):
    model = parse_model(cfg.model)
    src = _source(cfg, model)
    eps = src.eps
    R = cfg.rmax
    r_top = max(20.0, R)
    rad = P.solve_radial(model, src, r_eval=np.linspace(0, r_top, int(100 * r_top) + 1))
    ref = P.solve_radial(model, src, r_eval=np.linspace(0, 2 * r_top, int(200 * r_top) + 1))
    decay = P.decay_certificate(rad, eps, reference=ref)
    growth = P.growth_certificate(rad)
    grid = build_polar_grid(model, R, cfg.nr, cfg.ntheta, exhaustion_radii=[R / 2, 0.75 * R, R])
    barrier = P.barrier_check(model, eps, extra_radii=grid.rho)
    residual = {"radial": rad.residual}
    agreement = {}
    failures = []
    routes = ("exhaustion", "green-integral") if cfg.route == "all" else (cfg.route,)
    csv_cols = {"r": grid.rho, "u_radial": rad.profile(grid.rho),
                "u_radial_shifted": rad.profile(grid.rho) - rad.profile(np.array(R))}
    extra = {}
    if "exhaustion" in routes:
        sols = P.solve_exhaustion(grid, model, src, strict=False)
        u = sols[-1]
        residual["exhaustion"] = u.residual
        agreement["exhaustion"] = P.route_agreement(rad.profile, u.values[:, 0], grid.rho, R)
        extra["cauchy_differences"] = u.extra["cauchy_differences"]
        extra["domination"] = P.domination_check(grid, model, src)
        csv_cols["u_exhaustion"] = u.values[:, 0]
        if not extra["domination"]["passed"]:
            failures.append("maximum-principle domination |u_i| <= v violated")
    if "green-integral" in routes:
        poles = [rx for rx in cfg.poles if rx <= 0.5 * R]
        if not poles:
            raise ConfigurationError("green-integral route needs poles in the interior half")
        cache = _cache(cfg)
        nt = max(cfg.ntheta, GI_MIN_NTHETA)
        ks = [cache.kernel(model, rx, R, cfg.h, nt) for rx in poles]
        gi = P.solve_green_integral(ks, src)
        agreement["green-integral"] = P.route_agreement(rad.profile, gi.values, gi.r, R)
        extra["green_integral"] = {"r": list(gi.r), "u": list(gi.values), "ntheta": nt}
    report = {"source": src.to_dict(), "residual": residual, "growth_fit": growth.to_dict(),
              "decay_fit": decay.to_dict(), "barrier_margin": barrier.margin,
              "barrier": barrier.to_dict(),
              "route_agreement": {**agreement, "tolerance": AGREEMENT_TOL,
                                  "invariant": "max |u - (u_rad - u_rad(R))| / sup on r <= R/2"},
              **extra}
    out.json("poisson.report.json", report)
    names = list(csv_cols)
    out.csv("poisson_u.csv", names, zip(*(csv_cols[n] for n in names)))
    for route, a in agreement.items():
        if a > AGREEMENT_TOL:
            failures.append(f"{route} route disagrees with radial route by {a:.3g}")
    if not barrier.passed:
        failures.append(f"barrier margin {barrier.margin:.3g} > {barrier.tolerance}")
    if not decay.passed:
        failures.append("decay certificate failed")
    if abs(growth.B) > GROWTH_B_TOL:
        failures.append(f"growth slope B = {growth.B:.3g}")
    return {"route_agreement": agreement, "barrier_margin": barrier.margin,
            "decay_C": decay.C_tilde, "growth_B": growth.B}, failures


def cmd_flow(cfg, out):
    fc = FlowConfig(background_K=cfg.background_K, profile=cfg.profile, eps=cfg.eps,
                    t_final=cfg.t_final or 20.0, dt=cfg.dt or 0.01, r_max=cfg.rmax, nr=cfg.nr,
                    monitor_radii=tuple(cfg.monitor_radii), scheme=cfg.scheme,
                    **{k: float(v) for k, v in cfg.bump.items()})
    res = run_flow(fc)
    rep = res.report()
    out.json("flow.report.json", rep)
    header, rows = res.csv_rows()
    out.csv("flow.csv", header, rows)
    failures = []
    final = res.final_sup_dev()
    if fc.profile != "zero" and not final < 1e-3:
        failures.append(f"sup |R+1| on B{max(fc.monitor_radii):g} is {final:.3g} >= 1e-3 at t_final")
    return {"final_sup_dev": rep["final_sup_dev"], "max_w_final": rep["max_w_final"]}, failures


def cmd_verify(cfg, out):
    cache = _cache(cfg)
    results = run_suite(cfg.profile, cache, log=lambda s: print(s, flush=True))
    if cfg.determinism:
        again = summary_bytes(run_suite(cfg.profile, cache, log=None), cfg.profile)
        c14 = determinism_criterion(summary_bytes(results, cfg.profile), again)
        print(c14.line(), flush=True)
        results.append(c14)
    out.raw("summary.json", summary_bytes(results, cfg.profile))
    failures = [f"criterion {c.id}: {c.name}" for c in results if not c.passed]
    return None, failures


COMMANDS = {"spectrum": cmd_spectrum, "green": cmd_green, "heat": cmd_heat,
            "poisson": cmd_poisson, "flow": cmd_flow, "verify": cmd_verify}


# ------------------------------------------------------------------- entry

def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config", "verbose")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = build_config(args.subcommand, file_values, flags)
        out = Outputs(cfg.out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        result, failures = COMMANDS[cfg.subcommand](cfg, out)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PoissonLabError as exc:
        result, failures = None, [f"{type(exc).__name__}: {exc}"]
    if cfg.subcommand != "verify":
        out.json("summary.json", {"subcommand": cfg.subcommand, "passed": not failures,
                                  "failures": failures, "result": result})
    out.json("manifest.json", {"version": __version__, "config": cfg.to_dict(),
                               "outputs": sorted(set(out.files) | {"manifest.json"})})
    log.info("%s finished in %.2fs", cfg.subcommand, time.perf_counter() - t0)
    for f in failures:
        print(f"FAILED: {f}", file=sys.stderr)
    return 1 if failures else 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
