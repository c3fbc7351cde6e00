"""Periodic orbits, grazing families, and the bifurcation classification tests.

Shooting solves the on-delimiter boundary problem: unknowns are the impact
phase tau0 and the post-impact state (0, v, ztan), matched through one period
by the reflection law. Systems with a tangential seed (a conserved tangential
amplitude embedding the bifurcation parameter) pin ztan to the seed and keep
only (tau0, v) free. Two residual discretizations exist: the hybrid one
locates the closing impact as an event (general, any interior impact count),
and the smooth one flows the field over exactly one period with no impact
handling, which also reaches the penetrating "virtual" roots of the boundary
problem that are not trajectories of the physical system.

The grazing classifier evaluates the limit monodromy A and parameter
sensitivity vector along a geometric ladder of (mu, theta) shrinking toward
the grazing point and Richardson-extrapolates, then assembles the two test
matrices whose inverse-times-sensitivity components decide whether the
family persists through grazing (continuous) or terminates (discontinuous).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (DegenerateGrazingError, ImpactCountChangedError,
                     NonDifferentiableError, ShootingError, ContinuationStalledError)
from .integrate import (DEFAULT_CONFIG, IntegratorConfig, integrate_free_flight,
                        simulate_hybrid)
from .model import PhaseState, VibroImpactSystem, as_state_vector
from .variational import flow_with_sensitivity, saltation_matrix, smooth_variational

__all__ = [
    "PeriodicOrbit",
    "GrazingReport",
    "GrazingSurfaceFit",
    "ContinuationResult",
    "find_periodic_orbit",
    "find_grazing_orbit",
    "continue_family",
    "classify_grazing",
    "fit_grazing_surface",
    "peterka_type",
    "limit_monodromy",
]


@dataclass(frozen=True)
class PeriodicOrbit:
    """Converged solution of the on-delimiter boundary problem.

    ``tau0`` is the reference impact phase, ``v`` the post-impact normal
    velocity there (v = r * Y0), ``z_post`` the full post-impact state,
    ``z0`` the section state at phase tau0 - theta (the fixed point of the
    period map anchored at the reference impact). ``admissible`` is False
    for virtual roots (negative v or interior penetration).
    """

    mu: float
    theta: float
    tau0: float
    v: float
    z_post: PhaseState
    z0: PhaseState
    n_periods: int
    impact_count: int
    peterka: tuple[int, int]
    residual: float
    Y_list: tuple[float, ...]
    admissible: bool

    @property
    def Y0(self) -> float:
        return self.Y_list[0]


def _seeded(system: VibroImpactSystem) -> bool:
    return system.tangential_seed is not None


def _assemble_post(system: VibroImpactSystem, mu: float, tau0: float, v: float,
                   ztan: np.ndarray | None) -> np.ndarray:
    if _seeded(system):
        ztan = np.asarray(system.tangential_seed(tau0, mu), dtype=float)
    z0 = np.empty(2 * system.n)
    z0[0], z0[1] = 0.0, v
    z0[2:] = ztan if ztan is not None else np.zeros(2 * system.n - 2)
    return z0


def _seed_derivs(system: VibroImpactSystem, mu: float, tau0: float):
    """Central differences of the tangential seed in (tau0, mu)."""
    h_t = 1e-6 * max(1.0, abs(tau0))
    h_m = 1e-6 * max(1.0, abs(mu))
    s = system.tangential_seed
    d_tau = (np.asarray(s(tau0 + h_t, mu)) - np.asarray(s(tau0 - h_t, mu))) / (2 * h_t)
    d_mu = (np.asarray(s(tau0, mu + h_m)) - np.asarray(s(tau0, mu - h_m))) / (2 * h_m)
    return d_tau, d_mu


def _smooth_flow(system, mu, t0, z0, t1, config) -> np.ndarray:
    return integrate_free_flight(system, mu, t0, z0, t1, config, check_crossing=False).z1


# ---------------------------------------------------------------------------
# residuals for Newton shooting

def _residual_smooth(system, mu, tau0, v, ztan, n_periods, config, need_jac):
    """Period-map residual on the smooth flow (no impact handling inside).

    rows: [x1(end), -r y1(end) - v, (ztan(end) - ztan0 when unseeded)]
    """
    seeded = _seeded(system)
    z0 = _assemble_post(system, mu, tau0, v, ztan)
    t_end = tau0 + n_periods * system.T
    r = system.restitution(mu)
    d = 2 * system.n

    if not need_jac:
        z_end = _smooth_flow(system, mu, tau0, z0, t_end, config)
        Phi = None
    else:
        z_end, Phi = flow_with_sensitivity(system, mu, tau0, z0, t_end, config)

    rows = [z_end[0], -r * z_end[1] - v]
    if not seeded:
        rows.extend(z_end[2:] - z0[2:])
    R = np.array(rows)
    if not need_jac:
        return R, None, z_end

    F0 = system.field(tau0, z0, mu)
    F1 = system.field(t_end, z_end, mu)
    dz0_dtau = np.zeros(d)
    if seeded:
        d_tau, _ = _seed_derivs(system, mu, tau0)
        dz0_dtau[2:] = d_tau
    cols = [F1 - Phi @ F0 + Phi @ dz0_dtau,            # d/dtau0 (end time moves too)
            Phi[:, 1]]                                  # d/dv
    if not seeded:
        cols.extend(Phi[:, 2 + j] for j in range(d - 2))
    J = np.zeros((R.size, len(cols)))
    for j, dz in enumerate(cols):
        J[0, j] = dz[0]
        J[1, j] = -r * dz[1]
        if not seeded:
            J[2:, j] = dz[2:]
    J[1, 1] -= 1.0                                      # d(-v)/dv
    if not seeded:
        for j in range(d - 2):
            J[2 + j, 2 + j] -= 1.0
    return R, J, z_end


def _transition_to(system, mu, traj, t_stop, config):
    """Ordered variational product along a hybrid trajectory up to t_stop-."""
    d = 2 * system.n
    Phi = np.eye(d)
    for i, arc in enumerate(traj.segments):
        if arc.t1 > t_stop + 1e-12:
            break
        Phi = smooth_variational(system, mu, arc, config) @ Phi
        if i < len(traj.events) and traj.events[i].t < t_stop - 1e-12:
            ev = traj.events[i]
            if ev.kind != "reflection":
                raise NonDifferentiableError(f"{ev.kind} inside the shooting span")
            Phi = saltation_matrix(system, mu, ev, config).entries @ Phi
    return Phi


def _residual_hybrid(system, mu, tau0, v, ztan, n_periods, config, need_jac):
    """Impact-indexed residual: locate the closing impact near tau0 + nT.

    rows: [t* - tau0 - nT, -r y1(t*-) - v, (ztan(t*-) - ztan0 when unseeded)]
    """
    seeded = _seeded(system)
    z0 = _assemble_post(system, mu, tau0, v, ztan)
    T_target = tau0 + n_periods * system.T
    slack = 0.3 * system.T
    traj = simulate_hybrid(system, mu, tau0, z0, T_target + slack, config)
    refl = [e for e in traj.events if e.kind == "reflection"]
    if not refl:
        raise ShootingError("trajectory from the guess never impacts")
    e_star = min(refl, key=lambda e: abs(e.t - T_target))
    if abs(e_star.t - T_target) > slack:
        raise ShootingError("no impact found near the period end")
    interior = [e for e in traj.events if e.t < e_star.t - 1e-12]
    if any(e.kind != "reflection" for e in interior) \
            or any(s.t0 < e_star.t for s in traj.sliding):
        raise NonDifferentiableError("tangency or sliding inside the shooting span")
    r = system.restitution(mu)
    z_pre = np.array(e_star.pre.z)
    y1_pre = z_pre[1]
    if abs(y1_pre) < config.chatter_velocity_floor:
        raise NonDifferentiableError("closing impact is tangential")

    rows = [e_star.t - T_target, -r * y1_pre - v]
    if not seeded:
        rows.extend(z_pre[2:] - z0[2:])
    R = np.array(rows)
    info = (e_star, interior, traj)
    if not need_jac:
        return R, None, info

    d = 2 * system.n
    Phi = _transition_to(system, mu, traj, e_star.t, config)
    F0 = system.field(tau0, z0, mu)
    F_pre = system.field(e_star.t, z_pre, mu)
    dz0_dtau = np.zeros(d)
    if seeded:
        d_tau, _ = _seed_derivs(system, mu, tau0)
        dz0_dtau[2:] = d_tau
    cols = [Phi @ (dz0_dtau - F0),                      # d/dtau0, fixed end time
            Phi[:, 1]]                                  # d/dv
    if not seeded:
        cols.extend(Phi[:, 2 + j] for j in range(d - 2))
    J = np.zeros((R.size, len(cols)))
    for j, dz_free in enumerate(cols):
        dt_star = -dz_free[0] / y1_pre
        dz_ev = dz_free + F_pre * dt_star
        J[0, j] = dt_star - (1.0 if j == 0 else 0.0)
        J[1, j] = -r * dz_ev[1] - (1.0 if j == 1 else 0.0)
        if not seeded:
            J[2:, j] = dz_ev[2:]
            if j >= 2:
                J[2 + (j - 2), j] -= 1.0
    return R, J, info


def _newton(residual_fn, u0, tol, max_iter, damping_tries=8):
    """Damped Newton on a square system; returns (u, ||R||, n_iter)."""
    u = np.asarray(u0, dtype=float).copy()
    R, J, _ = residual_fn(u, need_jac=True)
    norm = np.linalg.norm(R)
    for it in range(max_iter):
        if norm < tol:
            return u, norm, it
        try:
            step = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError as exc:
            raise ShootingError(f"singular shooting matrix: {exc}") from exc
        alpha = 1.0
        for _ in range(damping_tries):
            u_new = u + alpha * step
            R_new, J_new, _ = residual_fn(u_new, need_jac=True)
            norm_new = np.linalg.norm(R_new)
            if norm_new < (1.0 - 0.25 * alpha) * norm or norm_new < tol:
                break
            alpha *= 0.5
        else:
            raise ShootingError(f"Newton stalled at ||R||={norm:.3e} after {it} iterations")
        u, R, J, norm = u_new, R_new, J_new, norm_new
    if norm < tol:
        return u, norm, max_iter
    raise ShootingError(f"Newton did not converge: ||R||={norm:.3e} after {max_iter} iterations")


def _section_state(system, mu, tau0, z_post, n_periods, theta, config,
                   smooth: bool) -> PhaseState:
    """Orbit state at phase tau0 + nT - theta (== tau0 - theta by periodicity)."""
    t_sec = tau0 + n_periods * system.T - theta
    if smooth:
        return PhaseState(_smooth_flow(system, mu, tau0, z_post, t_sec, config))
    traj = simulate_hybrid(system, mu, tau0, z_post, t_sec, config)
    return traj.end_state()


def _interior_min_x1(system, mu, tau0, z_post, t_end, config) -> float:
    arc = integrate_free_flight(system, mu, tau0, z_post, t_end, config, check_crossing=False)
    ts = np.linspace(tau0, t_end, 4097)[1:-1]
    return float(arc(ts)[0].min())


def find_periodic_orbit(system: VibroImpactSystem, mu: float, theta: float, guess,
                        n_periods: int = 1, config: IntegratorConfig = DEFAULT_CONFIG,
                        tol: float = 1e-10, max_iter: int = 30,
                        mode: str = "auto") -> PeriodicOrbit:
    """Newton shooting for a periodic orbit with a reference impact.

    ``guess`` is (tau0, v) for seeded systems or (tau0, v, ztan) otherwise;
    a PeriodicOrbit is also accepted. ``mode`` selects the residual:
    "hybrid" (event-located closing impact; physical orbits only), "smooth"
    (exact-period smooth flow; single-impact orbits, reaches virtual roots),
    or "auto" (smooth when the guess trajectory has a single impact per
    period, hybrid otherwise). Reports an impact-count change between
    Newton iterates instead of silently converging to a different pattern.
    """
    seeded = _seeded(system)
    if isinstance(guess, PeriodicOrbit):
        tau0_g, v_g = guess.tau0, guess.v
        ztan_g = None if seeded else np.array(guess.z_post.ztan)
    else:
        tau0_g, v_g = float(guess[0]), float(guess[1])
        ztan_g = None if seeded else np.asarray(guess[2], dtype=float)

    if mode == "auto":
        z0 = _assemble_post(system, mu, tau0_g, max(v_g, 0.0), ztan_g)
        probe = simulate_hybrid(system, mu, tau0_g, z0,
                                tau0_g + n_periods * system.T + 0.3 * system.T, config)
        count = probe.reflection_count()
        mode = "smooth" if count <= n_periods + 1 else "hybrid"

    impact_count_seen = [None]

    def residual(u, need_jac):
        tau0, v = u[0], u[1]
        ztan = None if seeded else u[2:]
        if mode == "smooth":
            return _residual_smooth(system, mu, tau0, v, ztan, n_periods, config, need_jac)
        R, J, info = _residual_hybrid(system, mu, tau0, v, ztan, n_periods, config, need_jac)
        count = len(info[1]) + 1
        if impact_count_seen[0] is None:
            impact_count_seen[0] = count
        elif count != impact_count_seen[0]:
            raise ImpactCountChangedError(
                f"impact count changed {impact_count_seen[0]} -> {count} between iterations",
                impact_count_seen[0], count)
        return R, J, info

    u0 = np.array([tau0_g, v_g]) if seeded else np.concatenate(([tau0_g, v_g], ztan_g))
    u, res_norm, _ = _newton(residual, u0, tol, max_iter)

    tau0, v = float(u[0]), float(u[1])
    ztan = None if seeded else u[2:]
    z_post = PhaseState(_assemble_post(system, mu, tau0, v, ztan))
    T_total = n_periods * system.T

    if mode == "smooth":
        interior_min = _interior_min_x1(system, mu, tau0, np.array(z_post.z),
                                        tau0 + T_total, config)
        admissible = v >= -1e-12 and interior_min > -1e-9
        impact_count = 1
        Y_list = (v / system.restitution(mu),)
    else:
        _, _, (e_star, interior, traj) = _residual_hybrid(
            system, mu, tau0, v, ztan, n_periods, config, need_jac=False)
        admissible = True
        impact_count = 1 + len(interior)
        Y_list = (v / system.restitution(mu),) + tuple(e.normal_speed for e in interior)

    z0_sec = _section_state(system, mu, tau0, np.array(z_post.z), n_periods, theta,
                            config, smooth=(mode == "smooth"))
    orbit = PeriodicOrbit(mu=mu, theta=theta, tau0=tau0, v=v, z_post=z_post,
                          z0=z0_sec, n_periods=n_periods, impact_count=impact_count,
                          peterka=(impact_count, n_periods), residual=float(res_norm),
                          Y_list=Y_list, admissible=admissible)
    m, n_min = peterka_type(orbit, system=system, config=config)
    return PeriodicOrbit(**{**orbit.__dict__, "peterka": (m, n_min)})


def find_grazing_orbit(system: VibroImpactSystem, theta: float, guess,
                       config: IntegratorConfig = DEFAULT_CONFIG,
                       tol: float = 1e-10, max_iter: int = 30) -> tuple[float, PeriodicOrbit]:
    """Solve the extended boundary problem for a grazing orbit: periodicity
    plus zero impact velocity, with the parameter as an extra unknown.

    ``guess`` is (mu, tau0) for seeded systems, (mu, tau0, ztan) otherwise.
    Returns (mu_star, orbit). Rejects solutions whose normal acceleration at
    the contact is not strictly positive (degenerate grazing), and solutions
    whose trajectory penetrates in the interior of the period.
    """
    seeded = _seeded(system)
    d = 2 * system.n

    def residual(u, need_jac):
        mu, tau0 = u[0], u[1]
        ztan = None if seeded else u[2:]
        z0 = _assemble_post(system, mu, tau0, 0.0, ztan)
        t_end = tau0 + system.T
        if not need_jac:
            z_end = _smooth_flow(system, mu, tau0, z0, t_end, config)
            rows = [z_end[0], z_end[1]]
            if not seeded:
                rows.extend(z_end[2:] - z0[2:])
            return np.array(rows), None, z_end
        z_end, M = flow_with_sensitivity(system, mu, tau0, z0, t_end, config, with_mu=True)
        Phi, v_mu = M[:, :d], M[:, d]
        F0 = system.field(tau0, z0, mu)
        F1 = system.field(t_end, z_end, mu)
        dz0_dtau = np.zeros(d)
        dz0_dmu = np.zeros(d)
        if seeded:
            d_tau, d_mu = _seed_derivs(system, mu, tau0)
            dz0_dtau[2:] = d_tau
            dz0_dmu[2:] = d_mu
        cols = [v_mu + Phi @ dz0_dmu,                   # d/dmu
                F1 - Phi @ F0 + Phi @ dz0_dtau]         # d/dtau0
        if not seeded:
            cols.extend(Phi[:, 2 + j] for j in range(d - 2))
        rows = [z_end[0], z_end[1]]
        if not seeded:
            rows.extend(z_end[2:] - z0[2:])
        R = np.array(rows)
        J = np.zeros((R.size, len(cols)))
        for j, dz in enumerate(cols):
            J[0, j] = dz[0]
            J[1, j] = dz[1]
            if not seeded:
                J[2:, j] = dz[2:]
                if j >= 2:
                    J[2 + (j - 2), j] -= 1.0
        return R, J, z_end

    u0 = np.asarray(guess, dtype=float)
    u, res_norm, _ = _newton(residual, u0, tol, max_iter)
    mu_star, tau0 = float(u[0]), float(u[1])
    ztan = None if seeded else u[2:]
    z_graze = _assemble_post(system, mu_star, tau0, 0.0, ztan)

    accel = system.accel(tau0, z_graze, mu_star)[0]
    if accel <= 0.0:
        raise DegenerateGrazingError(
            f"normal acceleration at the grazing contact is {accel:.3e} <= 0")
    interior_min = _interior_min_x1(system, mu_star, tau0, z_graze,
                                    tau0 + system.T, config)
    if interior_min < -1e-7:
        raise DegenerateGrazingError(
            f"grazing candidate penetrates in the interior (min x1 = {interior_min:.2e})")

    z0_sec = _section_state(system, mu_star, tau0, z_graze, 1, theta, config, smooth=True)
    orbit = PeriodicOrbit(mu=mu_star, theta=theta, tau0=tau0, v=0.0,
                          z_post=PhaseState(z_graze), z0=z0_sec, n_periods=1,
                          impact_count=1, peterka=(1, 1), residual=float(res_norm),
                          Y_list=(0.0,), admissible=True)
    return mu_star, orbit


def peterka_type(orbit: PeriodicOrbit, system: VibroImpactSystem | None = None,
                 config: IntegratorConfig = DEFAULT_CONFIG) -> tuple[int, int]:
    """(m, n) classification: m reflections per minimal period n*T.

    The minimal period is found by checking section-state closure at every
    divisor of the orbit's period multiple.
    """
    if system is None:
        raise ValueError("peterka_type needs the owning system")
    if not orbit.admissible:
        # virtual roots never flow through the hybrid simulator; count their
        # boundary contacts directly
        return orbit.impact_count, orbit.n_periods
    n_tot = orbit.n_periods
    z_post = np.array(orbit.z_post.z)
    traj = simulate_hybrid(system, orbit.mu, orbit.tau0, z_post,
                           orbit.tau0 + n_tot * system.T, config)
    scale = max(1.0, float(np.abs(z_post).max()))
    n_min = n_tot
    for k in range(1, n_tot):
        if n_tot % k:
            continue
        za = traj.state(orbit.tau0 + k * system.T - orbit.theta)
        zb = traj.state(orbit.tau0 + n_tot * system.T - orbit.theta)
        if np.abs(za - zb).max() < 1e-7 * scale:
            n_min = k
            break
    m = sum(1 for e in traj.events
            if e.kind == "reflection" and e.t <= orbit.tau0 + n_min * system.T - orbit.theta)
    m += 1  # the reference impact at tau0 itself
    return m, n_min


@dataclass(frozen=True)
class ContinuationResult:
    orbits: list
    transitions: list          # (mu, (m, n) before, (m, n) after)
    stop_reason: str | None


def continue_family(system: VibroImpactSystem, theta: float, orbit0: PeriodicOrbit,
                    mu_stop: float, step: float | None = None, min_step: float = 1e-9,
                    config: IntegratorConfig = DEFAULT_CONFIG,
                    mode: str = "auto", max_orbits: int = 10000,
                    stop_at_grazing: bool = True) -> ContinuationResult:
    """Natural-parameter continuation of a periodic family from orbit0 to
    mu_stop, with step halving on failure.

    Records Peterka-type transitions; stops early (with a reason) at a fold
    (persistent Newton failure at the minimum step) or when the impact
    velocity collapses toward grazing.
    """
    mu0 = orbit0.mu
    if mu_stop == mu0:
        return ContinuationResult([orbit0], [], None)
    direction = np.sign(mu_stop - mu0)
    h = abs(mu_stop - mu0) / 50 if step is None else abs(step)
    orbits = [orbit0]
    transitions = []
    stop_reason = None
    seeded = _seeded(system)

    mu_scale = max(abs(mu0), abs(mu_stop), 1e-12)
    while len(orbits) < max_orbits:
        prev = orbits[-1]
        remaining = abs(mu_stop - prev.mu)
        if remaining <= 1e-14 * mu_scale:
            break
        h = min(h, remaining)
        mu_next = mu_stop if h >= remaining * (1 - 1e-12) else prev.mu + direction * h
        # linear predictor from the last two converged orbits
        if len(orbits) >= 2 and orbits[-1].mu != orbits[-2].mu:
            w = (mu_next - orbits[-2].mu) / (orbits[-1].mu - orbits[-2].mu)
            tau0_g = orbits[-2].tau0 + w * (orbits[-1].tau0 - orbits[-2].tau0)
            v_g = orbits[-2].v + w * (orbits[-1].v - orbits[-2].v)
            ztan_g = (np.array(orbits[-2].z_post.ztan)
                      + w * (np.array(orbits[-1].z_post.ztan) - np.array(orbits[-2].z_post.ztan)))
        else:
            tau0_g, v_g, ztan_g = prev.tau0, prev.v, np.array(prev.z_post.ztan)
        guess = (tau0_g, v_g) if seeded else (tau0_g, v_g, ztan_g)
        try:
            orbit = find_periodic_orbit(system, mu_next, theta, guess,
                                        n_periods=prev.n_periods, config=config, mode=mode)
        except (ShootingError, NonDifferentiableError):
            h *= 0.5
            if h < min_step:
                stop_reason = f"stalled at mu={prev.mu:.10g}: fold or loss of transversality"
                break
            continue
        if orbit.peterka != prev.peterka:
            transitions.append((orbit.mu, prev.peterka, orbit.peterka))
        orbits.append(orbit)
        if stop_at_grazing and abs(orbit.Y0) < 10 * config.chatter_velocity_floor:
            stop_reason = f"grazing endpoint candidate at mu={orbit.mu:.10g}"
            break
        h *= 1.3  # gentle step growth after success
    return ContinuationResult(orbits, transitions, stop_reason)


# ---------------------------------------------------------------------------
# classification at a grazing orbit

def limit_monodromy(system: VibroImpactSystem, mu: float, orbit: PeriodicOrbit,
                    theta_window: float = 0.0,
                    config: IntegratorConfig = DEFAULT_CONFIG,
                    with_mu: bool = True):
    """Monodromy A (and parameter sensitivity) over the window
    [tau0 + theta_window, tau0 + T - theta_window] along a single-impact or
    grazing orbit, on the smooth flow."""
    tau0 = orbit.tau0
    z_post = np.array(orbit.z_post.z)
    t_a, t_b = tau0 + theta_window, tau0 + system.T - theta_window
    z_a = _smooth_flow(system, mu, tau0, z_post, t_a, config) if theta_window else z_post
    z_end, M = flow_with_sensitivity(system, mu, t_a, z_a, t_b, config, with_mu=with_mu)
    if with_mu:
        return M[:, :-1], M[:, -1]
    return M, None


def _richardson(values: list[np.ndarray]) -> np.ndarray:
    """Extrapolate a geometrically refined sequence (ratio 2, order 1)."""
    rows = [np.asarray(v, dtype=float) for v in values]
    while len(rows) > 1:
        rows = [2.0 * rows[i + 1] - rows[i] for i in range(len(rows) - 1)]
    return rows[0]


@dataclass(frozen=True)
class GrazingReport:
    """Everything the grazing classification produces.

    ``monodromy`` is the limit period-map sensitivity A around the grazing
    orbit (impact excluded); ``mu_sens`` the limit parameter-sensitivity
    vector; ``field0`` the field value at the grazing contact and
    ``graze_accel`` the normal acceleration there. ``L_impact`` / ``L_free``
    are the implicit-function test matrices of the impacting-side and
    impact-free-side families; ``test_velocity`` ([L_impact^-1 B]_2) must be
    negative for the impacting family to grow velocity with mu, and
    ``test_clearance`` ([L_free^-1 B]_1) positive (negative) for the
    impact-free family to persist (disappear) past grazing.
    """

    monodromy: np.ndarray
    mu_sens: np.ndarray
    field0: np.ndarray
    graze_accel: float
    L_impact: np.ndarray
    L_free: np.ndarray
    det_L_impact: float
    det_L_free: float
    test_velocity: float
    test_clearance: float
    verdict: str                       # continuous | discontinuous | degenerate
    bend_condition: tuple[bool, bool]  # a12 > 0, (A^2)_12 < -a12
    scenario: str                      # saddle-node | period-doubling
    sdf_velocity: float | None = None      # shortcut: b2
    sdf_clearance: float | None = None     # shortcut: a12 * b2 * det(A - E)
    det_identity_impact: float | None = None   # -a12 f01 (1 + 1/r)
    det_identity_free: float | None = None     # -det(A - E) f01
    ladder: tuple = ()

    def to_dict(self) -> dict:
        return {
            "monodromy": self.monodromy.tolist(),
            "mu_sens": self.mu_sens.tolist(),
            "field0": self.field0.tolist(),
            "graze_accel": self.graze_accel,
            "L_impact": self.L_impact.tolist(),
            "L_free": self.L_free.tolist(),
            "det_L_impact": self.det_L_impact,
            "det_L_free": self.det_L_free,
            "test_velocity": self.test_velocity,
            "test_clearance": self.test_clearance,
            "verdict": self.verdict,
            "bend_condition": list(self.bend_condition),
            "scenario": self.scenario,
            "sdf_velocity": self.sdf_velocity,
            "sdf_clearance": self.sdf_clearance,
        }


def classify_grazing(system: VibroImpactSystem, theta: float, grazing_orbit: PeriodicOrbit,
                     mu_star: float, mu_bar: float = 8e-3, theta_bar: float | None = None,
                     levels: int = 4, config: IntegratorConfig = DEFAULT_CONFIG,
                     degenerate_tol: float = 1e-8) -> GrazingReport:
    """Run every sign test of the grazing classification at a located
    grazing orbit.

    The limit monodromy and parameter sensitivity are evaluated on the
    impacting side along the geometric ladder (mu_star + mu_bar 2^-i,
    theta_bar 2^-i) and Richardson-extrapolated. Near-singular test
    matrices or non-positive contact acceleration yield the explicit
    "degenerate" verdict, never a silent classification.
    """
    if theta_bar is None:
        theta_bar = 0.04 * system.T
    n, d = system.n, 2 * system.n
    r0 = system.restitution(mu_star)
    seeded = _seeded(system)

    # ladder of impacting orbits continued down toward the grazing point
    A_lv, B_lv = [], []
    guess_orbit = None
    ladder = []
    for i in range(levels):
        mu_i = mu_star + mu_bar * 2.0 ** -i
        th_i = theta_bar * 2.0 ** -i
        if guess_orbit is None:
            guess = ((grazing_orbit.tau0, 0.0) if seeded
                     else (grazing_orbit.tau0, 0.0, np.array(grazing_orbit.z_post.ztan)))
        else:
            guess = ((guess_orbit.tau0, guess_orbit.v) if seeded
                     else (guess_orbit.tau0, guess_orbit.v, np.array(guess_orbit.z_post.ztan)))
        orbit_i = find_periodic_orbit(system, mu_i, theta, guess, config=config, mode="smooth")
        guess_orbit = orbit_i
        A_i, B_i = limit_monodromy(system, mu_i, orbit_i, theta_window=th_i, config=config)
        A_lv.append(A_i)
        B_lv.append(B_i)
        ladder.append((mu_i, th_i, orbit_i.Y0))

    A = _richardson(A_lv)
    Bvec = _richardson(B_lv)

    tau0 = grazing_orbit.tau0
    z_graze = np.array(grazing_orbit.z_post.z)
    F0 = system.field(tau0, z_graze, mu_star)
    f01 = system.accel(tau0, z_graze, mu_star)[0]
    if f01 <= 0.0:
        raise DegenerateGrazingError(f"contact acceleration {f01:.3e} <= 0")

    E = np.eye(d)
    e1, e2 = E[:, 0], E[:, 1]
    EA_F0 = (E - A) @ F0
    L_impact = np.column_stack([EA_F0, A[:, 1] + e2 / r0, A[:, 2:] - E[:, 2:]])
    L_free = np.column_stack([A[:, 0] - e1, EA_F0, A[:, 2:] - E[:, 2:]])
    det_Li = float(np.linalg.det(L_impact))
    det_Lf = float(np.linalg.det(L_free))

    a12 = float(A[0, 1])
    sum_16 = float((A @ A)[0, 1])
    bend = (a12 > 0.0, sum_16 < -a12)
    scenario = "period-doubling" if a12 > 0 else "saddle-node"

    degenerate = (abs(det_Li) < degenerate_tol * np.linalg.norm(L_impact)
                  or abs(det_Lf) < degenerate_tol * np.linalg.norm(L_free))
    if degenerate:
        t_vel = t_clr = np.nan
        verdict = "degenerate"
    else:
        t_vel = float(np.linalg.solve(L_impact, Bvec)[1])
        t_clr = float(np.linalg.solve(L_free, Bvec)[0])
        scale = max(np.linalg.norm(Bvec), 1e-300)
        if abs(t_vel) < 1e-6 * scale and abs(t_clr) < 1e-6 * scale:
            verdict = "degenerate"
        elif t_vel < 0 and t_clr > 0:
            verdict = "continuous"
        elif t_vel < 0 and t_clr < 0:
            verdict = "discontinuous"
        else:
            verdict = "degenerate"

    sdf_vel = sdf_clr = idq_i = idq_f = None
    if n == 1:
        b2 = float(Bvec[1])
        det_AE = float(np.linalg.det(A - E))
        sdf_vel = b2
        sdf_clr = a12 * b2 * det_AE
        idq_i = -a12 * f01 * (1.0 + 1.0 / r0)
        idq_f = -det_AE * f01

    return GrazingReport(monodromy=A, mu_sens=Bvec, field0=F0, graze_accel=float(f01),
                         L_impact=L_impact, L_free=L_free, det_L_impact=det_Li,
                         det_L_free=det_Lf, test_velocity=t_vel, test_clearance=t_clr,
                         verdict=verdict, bend_condition=bend, scenario=scenario,
                         sdf_velocity=sdf_vel, sdf_clearance=sdf_clr,
                         det_identity_impact=idq_i, det_identity_free=idq_f,
                         ladder=tuple(ladder))


# ---------------------------------------------------------------------------
# grazing separatrix fit

@dataclass(frozen=True)
class GrazingSurfaceFit:
    """Power-law fit of the grazing separatrix x1 = gamma(y1) at fixed
    tangential anchor: gamma ~ coefficient * |y1|^exponent."""

    samples: tuple              # (y1, gamma) pairs
    fitted_exponent: float
    fitted_coefficient: float


def fit_grazing_surface(system: VibroImpactSystem, mu: float, theta: float,
                        anchor_tan, y1_values,
                        config: IntegratorConfig = DEFAULT_CONFIG,
                        horizon: float | None = None) -> GrazingSurfaceFit:
    """Sample the grazing separatrix and fit its power law.

    For each incoming normal velocity y1 the initial height x1 is located
    (by bracketed root finding on the trajectory's minimum clearance) such
    that the smooth forward trajectory from time -theta has a tangential
    contact with the delimiter within the horizon. A zero-velocity sample
    lies on the surface at x1 = 0 exactly and is recorded without solving.
    """
    anchor = np.atleast_1d(np.asarray(anchor_tan, dtype=float)) if anchor_tan is not None \
        else np.empty(0)
    if anchor.size != 2 * (system.n - 1):
        raise ValueError(f"tangential anchor must have length {2 * (system.n - 1)}")
    t0 = -theta
    t_end = t0 + (system.T if horizon is None else horizon)

    def min_clearance(x0, y1):
        z0 = np.concatenate(([x0, y1], anchor))
        arc = integrate_free_flight(system, mu, t0, z0, t_end, config, check_crossing=False)
        ts = np.linspace(t0, t_end, 2049)
        Z = arc(ts)
        X, V = Z[0], Z[1]
        m = float(min(X.min(), X[0], X[-1]))
        # refine every dip: the true local minima sit at upward zero
        # crossings of y1 and can be much narrower than the grid
        y1_of = lambda t: float(arc(t)[1])
        for i in range(1, ts.size):
            if V[i - 1] < 0.0 <= V[i]:
                t_min = brentq(y1_of, ts[i - 1], ts[i], xtol=config.event_tol) \
                    if V[i] > 0.0 else ts[i]
                m = min(m, float(arc(t_min)[0]))
        return m

    samples = []
    for y1 in np.atleast_1d(np.asarray(y1_values, dtype=float)):
        if y1 == 0.0:
            samples.append((0.0, 0.0))
            continue
        if y1 > 0.0:
            raise ValueError("samples must be incoming (y1 <= 0)")
        f_at_anchor = system.accel(t0, np.concatenate(([0.0, y1], anchor)), mu)[0]
        scale = y1 * y1 / max(abs(f_at_anchor), 1e-6)
        x_hi = 4.0 * scale
        for _ in range(60):
            if min_clearance(x_hi, y1) > 0.0:
                break
            x_hi *= 2.0
        else:
            raise ShootingError(f"could not bracket the separatrix at y1={y1}")
        gamma = brentq(lambda x0: min_clearance(x0, y1), 0.0, x_hi,
                       xtol=1e-15, rtol=1e-14)
        samples.append((float(y1), float(gamma)))

    pts = [(abs(y), g) for (y, g) in samples if y != 0.0 and g > 0.0]
    if len(pts) < 2:
        raise ValueError("need at least two nonzero samples to fit the power law")
    lx = np.log([p[0] for p in pts])
    lg = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, lg, 1)
    return GrazingSurfaceFit(samples=tuple(samples), fitted_exponent=float(slope),
                             fitted_coefficient=float(np.exp(intercept)))
