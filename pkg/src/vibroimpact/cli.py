"""Command-line front end.

Every command loads a JSON config naming the system, runs one analysis, and
writes CSV/JSON artifacts (plus rendered figures on the report paths) into
the output directory. A manifest listing every produced file is written
last, as the atomic completion marker. Data files carry no timestamps and
the pipeline is RNG-free, so identical configs reproduce identical CSV and
JSON bytes.

Exit codes: 0 success, 2 degenerate or negative verdicts, 1 errors (with a
machine-readable error.json in the output directory).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import VibroImpactError
from .grazing import (classify_grazing, continue_family, find_grazing_orbit,
                      find_periodic_orbit, fit_grazing_surface)
from .integrate import IntegratorConfig, simulate_hybrid
from .manifolds import (PoincareMapper, detect_homoclinic_bend, spectral_split,
                        trace_manifold, verify_disk_return)
from .model import ConfigError, system_from_config
from .systems import twodof_params_of
from .twodof import (b_star, check_frequency_window, closed_form_monodromy,
                     periodic_family_11, solve_vartheta)
from .variational import lyapunov_exponents, poincare_jacobian

FLOAT_FMT = "%.17g"


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def _integrator_config(config: dict) -> IntegratorConfig:
    return IntegratorConfig(**config.get("integrator", {}))


class Run:
    """Output-directory bookkeeping: files written, manifest last."""

    def __init__(self, args, command: str):
        self.command = command
        self.args = args
        self.outdir = Path(getattr(args, "out", None) or ".")
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.t_start = time.perf_counter()

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.outdir / name

    def write_json(self, name: str, payload) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, name: str, header: list[str], rows) -> None:
        with open(self.path(name), "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(
                    (FLOAT_FMT % v) if isinstance(v, float) else str(v)
                    for v in row) + "\n")

    def finish(self, resolved: dict) -> None:
        manifest = {
            "command": self.command,
            "config": getattr(self.args, "config", None),
            "resolved": resolved,
            "outputs": self.outputs,
            "version": __version__,
            "duration_s": round(time.perf_counter() - self.t_start, 3),
        }
        with open(self.outdir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _resolved(system, mu, theta=None, **extra) -> dict:
    d = {"system": system.name, "params": system.params, "mu": mu}
    if theta is not None:
        d["theta"] = theta
    d.update(extra)
    return d


def _orbit_payload(orbit) -> dict:
    return {
        "mu": orbit.mu,
        "theta": orbit.theta,
        "tau0": orbit.tau0,
        "post_velocity": orbit.v,
        "Y0": orbit.Y0,
        "Y_list": list(orbit.Y_list),
        "z_post": np.array(orbit.z_post.z).tolist(),
        "section_state": np.array(orbit.z0.z).tolist(),
        "n_periods": orbit.n_periods,
        "impact_count": orbit.impact_count,
        "peterka": list(orbit.peterka),
        "residual": orbit.residual,
        "admissible": orbit.admissible,
    }


def _guess_from_args(system, args):
    if system.tangential_seed is not None:
        return (args.guess_tau0, args.guess_v)
    ztan = [float(x) for x in args.guess_ztan.split(",")] if args.guess_ztan else []
    if len(ztan) != 2 * (system.n - 1):
        raise ConfigError(f"--guess-ztan needs {2 * (system.n - 1)} values")
    return (args.guess_tau0, args.guess_v, np.array(ztan))


def _solve_orbit(system, mu, theta, args, config):
    return find_periodic_orbit(system, mu, theta, _guess_from_args(system, args),
                               n_periods=args.n_periods, config=config, mode=args.mode)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    icfg = _integrator_config(config)
    state = [float(x) for x in args.state.split(",")] if args.state \
        else config.get("initial_state")
    if state is None:
        raise ConfigError("provide --state or config key 'initial_state'")
    t0 = args.t0
    t_end = t0 + args.periods * system.T
    traj = simulate_hybrid(system, mu, t0, state, t_end, icfg)

    run = Run(args, "simulate")
    n_samples = max(2, int(args.periods * args.samples_per_period))
    times = np.linspace(t0, traj.t1, n_samples)
    ev_times = [e.t for e in traj.events if t0 < e.t < traj.t1]
    times = np.unique(np.concatenate([times, ev_times]))
    states = traj.sample(times)
    coords = [f"x{k//2+1}" if k % 2 == 0 else f"y{k//2+1}" for k in range(2 * system.n)]
    run.write_csv("trajectory.csv", ["t"] + coords,
                  [[float(t)] + [float(v) for v in row] for t, row in zip(times, states)])
    run.write_csv("events.csv", ["t", "Y", "kind"],
                  [[e.t, e.normal_speed, e.kind] for e in traj.events])
    if args.plot:
        from .plots import plot_trajectory
        plot_trajectory(times, states, [(e.t, e.kind) for e in traj.events],
                        run.path("trajectory.png"))
    run.finish(_resolved(system, mu, t0=t0, periods=args.periods,
                         truncated=traj.truncated))
    return 0


def cmd_find_orbit(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    orbit = _solve_orbit(system, mu, theta, args, icfg)
    run = Run(args, "find-orbit")
    run.write_json("orbit.json", _orbit_payload(orbit))
    run.finish(_resolved(system, mu, theta))
    return 0


def cmd_continue(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    orbit0 = _solve_orbit(system, mu, theta, args, icfg)
    result = continue_family(system, theta, orbit0, args.mu_to, step=args.step,
                             config=icfg, mode=args.mode)
    run = Run(args, "continue")
    run.write_csv("family.csv",
                  ["mu", "tau0", "post_velocity", "Y0", "impact_count",
                   "peterka_m", "peterka_n", "residual"],
                  [[o.mu, o.tau0, o.v, o.Y0, o.impact_count,
                    o.peterka[0], o.peterka[1], o.residual] for o in result.orbits])
    run.write_json("family.json", {
        "count": len(result.orbits),
        "stop_reason": result.stop_reason,
        "transitions": [{"mu": t[0], "from": list(t[1]), "to": list(t[2])}
                        for t in result.transitions],
    })
    if args.plot:
        from .plots import plot_family
        plot_family([o.mu for o in result.orbits], [o.Y0 for o in result.orbits],
                    run.path("family.png"))
    run.finish(_resolved(system, mu, theta, mu_to=args.mu_to))
    return 0


def cmd_classify(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    guess_mu = args.guess_mu if args.guess_mu is not None else mu
    if system.tangential_seed is not None:
        guess = (guess_mu, args.guess_tau0)
    else:
        ztan = [float(x) for x in args.guess_ztan.split(",")] if args.guess_ztan else []
        guess = np.concatenate(([guess_mu, args.guess_tau0], ztan))
    mu_star, gorbit = find_grazing_orbit(system, theta, guess, config=icfg)
    report = classify_grazing(system, theta, gorbit, mu_star,
                              mu_bar=args.mu_bar, levels=args.levels, config=icfg)
    run = Run(args, "classify")
    payload = report.to_dict()
    payload["mu_star"] = mu_star
    payload["tau0"] = gorbit.tau0
    run.write_json("report.json", payload)
    run.finish(_resolved(system, mu, theta, mu_star=mu_star,
                         verdict=report.verdict))
    return 2 if report.verdict == "degenerate" else 0


def _surface_chunk(config_json: str, theta: float, anchor: list, ys: list):
    config = json.loads(config_json)
    system, mu = system_from_config(config)
    icfg = _integrator_config(config)
    fit = fit_grazing_surface(system, mu, theta, np.array(anchor), ys, config=icfg)
    return [s for s in fit.samples]


def cmd_graze_surface(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    anchor = np.array([float(x) for x in args.anchor.split(",")]) if args.anchor \
        else np.empty(0)
    ys = -np.geomspace(abs(args.y1_min), abs(args.y1_max), args.samples)

    if args.jobs > 1 and len(ys) > 1:
        config["mu"] = mu
        chunks = np.array_split(ys, args.jobs)
        samples = []
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_surface_chunk, json.dumps(config), theta,
                                   anchor.tolist(), list(chunk))
                       for chunk in chunks if len(chunk)]
            for f in futures:
                samples.extend(f.result())
        lx = np.log([abs(y) for y, g in samples])
        lg = np.log([g for y, g in samples])
        slope, intercept = np.polyfit(lx, lg, 1)
        exponent, coefficient = float(slope), float(np.exp(intercept))
    else:
        fit = fit_grazing_surface(system, mu, theta, anchor, ys, config=icfg)
        samples = list(fit.samples)
        exponent, coefficient = fit.fitted_exponent, fit.fitted_coefficient

    run = Run(args, "graze-surface")
    run.write_csv("surface.csv", ["y1", "gamma"],
                  [[float(y), float(g)] for y, g in samples])
    run.write_json("fit.json", {"exponent": exponent, "coefficient": coefficient})
    if args.plot:
        from .plots import plot_surface_fit
        plot_surface_fit(samples, exponent, coefficient, run.path("surface.png"))
    run.finish(_resolved(system, mu, theta))
    return 0


def cmd_jacobian(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    orbit = _solve_orbit(system, mu, theta, args, icfg)
    result = poincare_jacobian(system, mu, theta, np.array(orbit.z0.z), icfg,
                               t_ref=orbit.tau0)
    run = Run(args, "jacobian")
    run.write_json("jacobian.json", {
        "D": result.D.tolist(),
        "det_D": result.det_D,
        "smooth_factors": [m.tolist() for m in result.smooth_factors],
        "saltation_factors": [
            {"entries": b.entries.tolist(), "Y": b.Y,
             "f_pre": b.f_pre, "f_post": b.f_post}
            for b in result.saltation_factors],
        "orbit": _orbit_payload(orbit),
    })
    run.finish(_resolved(system, mu, theta))
    return 0


def cmd_lyapunov(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    orbit = _solve_orbit(system, mu, theta, args, icfg)
    exps = lyapunov_exponents(system, mu, theta, np.array(orbit.z0.z),
                              args.n_exponent_periods, icfg, t_ref=orbit.tau0)
    run = Run(args, "lyapunov")
    run.write_json("lyapunov.json", {
        "exponents": exps.tolist(),
        "n_periods": args.n_exponent_periods,
        "orbit": _orbit_payload(orbit),
    })
    run.finish(_resolved(system, mu, theta))
    return 0


def cmd_manifold(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    orbit = _solve_orbit(system, mu, theta, args, icfg)
    z_fix = np.array(orbit.z0.z)
    poly = trace_manifold(system, mu, theta, z_fix, args.direction,
                          arclength_budget=args.arclength, t_ref=orbit.tau0,
                          delta_seed=args.delta_seed, config=icfg)
    mapper = PoincareMapper(system, mu, theta, orbit.tau0, icfg)
    split = spectral_split(mapper.jacobian(z_fix))
    cs_basis = np.column_stack([split.stable, split.central])
    crossings = detect_homoclinic_bend(poly, z_fix, cs_basis,
                                       exclude_radius=0.02 * max(poly.length, 1e-12))
    run = Run(args, "manifold")
    coords = [f"x{k//2+1}" if k % 2 == 0 else f"y{k//2+1}" for k in range(2 * system.n)]
    kinks = set(poly.kink_indices)
    seps = set(poly.separatrix_crossings)
    run.write_csv("manifold.csv",
                  ["arclength"] + coords + ["kink", "separatrix_crossing"],
                  [[float(poly.arclengths[i])] + [float(v) for v in poly.points[i]]
                   + [int(i in kinks), int(i in seps)]
                   for i in range(len(poly.points))])
    run.write_json("crossings.json", [
        {"point": c.point.tolist(), "arclength": c.arclength,
         "angle_rad": c.angle, "transversal": bool(c.transversal)}
        for c in crossings])
    if args.plot:
        from .plots import plot_manifold
        plot_manifold(poly, run.path("manifold.png"), fixed_point=z_fix)
    run.finish(_resolved(system, mu, theta, direction=args.direction,
                         points=len(poly.points)))
    return 0


def cmd_disk_check(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    theta = args.theta if args.theta is not None else config.get("theta", 0.05)
    icfg = _integrator_config(config)
    orbit = _solve_orbit(system, mu, theta, args, icfg)
    z_fix = np.array(orbit.z0.z)
    mapper = PoincareMapper(system, mu, theta, orbit.tau0, icfg)
    split = spectral_split(mapper.jacobian(z_fix))
    poly = trace_manifold(system, mu, theta, z_fix, "unstable",
                          arclength_budget=args.arclength, t_ref=orbit.tau0,
                          config=icfg)
    cs_basis = np.column_stack([split.stable, split.central])
    crossings = detect_homoclinic_bend(poly, z_fix, cs_basis,
                                       exclude_radius=0.02 * max(poly.length, 1e-12))
    transversal = [c for c in crossings if c.transversal]
    if not transversal:
        raise VibroImpactError("no transversal homoclinic crossing found; "
                               "increase --arclength")
    grid = tuple(int(x) for x in args.grid.split("x"))
    report = verify_disk_return(system, mu, theta, z_fix, split,
                                transversal[0].point, t_ref=orbit.tau0,
                                grid=grid, k_max=args.k_max)
    run = Run(args, "disk-check")
    payload = report.to_dict()
    payload["homoclinic_point"] = transversal[0].point.tolist()
    payload["eigenvalues_abs"] = np.abs(split.eigenvalues).tolist()
    run.write_json("diskreport.json", payload)
    run.finish(_resolved(system, mu, theta, k=report.k,
                         all_hit=bool(report.all_hit)))
    return 0 if report.all_hit else 2


def cmd_oracle(args) -> int:
    config = _load_config(args.config)
    system, mu = system_from_config(config)
    mu = args.mu if args.mu is not None else mu
    if system.name != "two-dof-graze":
        raise ConfigError("oracle requires the two-dof-graze system")
    pars = twodof_params_of(system)
    if mu:
        from dataclasses import replace
        pars = replace(pars, b=pars.b + mu)
    ok, k = check_frequency_window(pars)
    trace, det = closed_form_monodromy(pars)
    payload = {
        "b_star": b_star(pars),
        "b": pars.b,
        "vartheta": solve_vartheta(pars),
        "family": [{"C1": o.C1, "vartheta": o.vartheta, "tau0": o.tau0,
                    "Y0": o.Y0, "branch": o.branch, "admissible": o.admissible}
                   for o in periodic_family_11(pars)],
        "monodromy": {"trace": trace, "det": det},
        "frequency_window": {"ok": ok, "k": k},
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        run = Run(args, "oracle")
        run.write_json("oracle.json", payload)
        run.finish(_resolved(system, mu))
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p, out_required=True):
    p.add_argument("--config", required=True, help="JSON system configuration")
    p.add_argument("--mu", type=float, default=None, help="override config mu")
    p.add_argument("--theta", type=float, default=None, help="section offset")
    p.add_argument("--out", required=out_required, default=None, help="output directory")
    p.add_argument("--plot", dest="plot", action="store_true", default=True)
    p.add_argument("--no-plot", dest="plot", action="store_false")
    p.add_argument("--jobs", type=int, default=1, help="workers for sweeps/grids")


def _add_guess(p):
    p.add_argument("--guess-tau0", type=float, required=True,
                   help="reference impact phase guess")
    p.add_argument("--guess-v", type=float, default=0.0,
                   help="post-impact normal velocity guess")
    p.add_argument("--guess-ztan", default=None,
                   help="comma-separated tangential state guess")
    p.add_argument("--n-periods", type=int, default=1)
    p.add_argument("--mode", default="auto", choices=["auto", "smooth", "hybrid"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vibroimpact",
                                 description="vibro-impact grazing analysis toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="hybrid trajectory as CSV")
    _add_common(p)
    p.add_argument("--state", default=None, help="comma-separated initial state")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--periods", type=float, default=1.0)
    p.add_argument("--samples-per-period", type=int, default=400)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("find-orbit", help="Newton shooting for a periodic orbit")
    _add_common(p)
    _add_guess(p)
    p.set_defaults(fn=cmd_find_orbit)

    p = sub.add_parser("continue", help="continue a periodic family in mu")
    _add_common(p)
    _add_guess(p)
    p.add_argument("--mu-to", type=float, required=True)
    p.add_argument("--step", type=float, default=None)
    p.set_defaults(fn=cmd_continue)

    p = sub.add_parser("classify", help="grazing bifurcation classification")
    _add_common(p)
    p.add_argument("--guess-mu", type=float, default=None)
    p.add_argument("--guess-tau0", type=float, required=True)
    p.add_argument("--guess-ztan", default=None)
    p.add_argument("--mu-bar", type=float, default=8e-3)
    p.add_argument("--levels", type=int, default=4)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("graze-surface", help="grazing separatrix power-law fit")
    _add_common(p)
    p.add_argument("--anchor", default=None, help="tangential anchor values")
    p.add_argument("--y1-min", type=float, default=1e-4)
    p.add_argument("--y1-max", type=float, default=1e-3)
    p.add_argument("--samples", type=int, default=8)
    p.set_defaults(fn=cmd_graze_surface)

    p = sub.add_parser("jacobian", help="period-map Jacobian factors as JSON")
    _add_common(p)
    _add_guess(p)
    p.set_defaults(fn=cmd_jacobian)

    p = sub.add_parser("lyapunov", help="Lyapunov exponents along an orbit")
    _add_common(p)
    _add_guess(p)
    p.add_argument("--n-exponent-periods", type=int, default=1)
    p.set_defaults(fn=cmd_lyapunov)

    p = sub.add_parser("manifold", help="trace a 1-D invariant manifold")
    _add_common(p)
    _add_guess(p)
    p.add_argument("--direction", default="unstable", choices=["unstable", "stable"])
    p.add_argument("--arclength", type=float, default=0.25)
    p.add_argument("--delta-seed", type=float, default=1e-6)
    p.set_defaults(fn=cmd_manifold)

    p = sub.add_parser("disk-check", help="disk-return property check")
    _add_common(p)
    _add_guess(p)
    p.add_argument("--arclength", type=float, default=0.25)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--grid", default="9x9x9")
    p.set_defaults(fn=cmd_disk_check)

    p = sub.add_parser("oracle", help="closed-form reference values")
    _add_common(p, out_required=False)
    p.set_defaults(fn=cmd_oracle)

    return ap


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (VibroImpactError, ValueError, np.linalg.LinAlgError) as exc:
        out = getattr(args, "out", None)
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
            with open(Path(out) / "error.json", "w") as fh:
                json.dump({"error": type(exc).__name__, "message": str(exc)},
                          fh, indent=2, sort_keys=True)
                fh.write("\n")
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
