"""Free-flight integration, impact localization and hybrid trajectory assembly.

Free flight is integrated by an embedded adaptive one-step method with dense
output (DOP853 by default; the contract is the tolerance, not the scheme).
Impacts are localized by bracketed root refinement on the dense-output
interpolant of x1: sign changes give transversal reflections, and upward
zero crossings of y1 with x1 at the wall give tangencies, which a plain
sign-change event scan would miss. simulate_hybrid alternates flight and
reflection, drops into sliding at a tangency with inward normal
acceleration, and collapses chattering accumulations onto the delimiter
once the reflection speeds fall below a velocity floor.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import EventExplosionError, IntegrationError, WallCrossingError
from .model import (HybridTrajectory, ImpactEvent, PhaseState, SlidingInterval,
                    VibroImpactSystem, apply_impact, as_state_vector,
                    sliding_normal_accel, sliding_vector_field)

__all__ = [
    "IntegratorConfig",
    "SmoothArc",
    "ImpactHit",
    "integrate_free_flight",
    "detect_next_impact",
    "simulate_hybrid",
]


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    event_tol: float = 1e-12
    max_step: float = np.inf
    chatter_velocity_floor: float = 1e-9
    chatter_max_impacts: int = 50
    method: str = "DOP853"
    # scan resolution for root bracketing: subdivisions per solver step
    scan_subdiv: int = 8
    # positions this close to the wall count as contact for tangency tests
    wall_tol: float = 1e-10
    # hard cap on events per simulate_hybrid call
    max_events: int = 10000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "event_tol", "max_step",
                     "chatter_velocity_floor", "wall_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.chatter_max_impacts < 1:
            raise ValueError("chatter_max_impacts must be >= 1")
        if self.scan_subdiv < 1 or self.max_events < 1:
            raise ValueError("scan_subdiv and max_events must be >= 1")


DEFAULT_CONFIG = IntegratorConfig()


class _ConstantInterpolant:
    def __init__(self, z):
        self.z = np.asarray(z, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.z.copy()
        return np.repeat(self.z[:, None], t.size, axis=1)


@dataclass(frozen=True)
class SmoothArc:
    """One impact-free flight segment with a dense-output interpolant.

    ``knots`` are the accepted solver steps; the interpolant is valid on
    [t0, t1] and is evaluable slightly beyond for root polishing.
    """

    t0: float
    t1: float
    interpolant: Callable
    z0: np.ndarray
    z1: np.ndarray
    knots: np.ndarray

    def __call__(self, t):
        return np.asarray(self.interpolant(t), dtype=float)

    @property
    def span(self) -> float:
        return self.t1 - self.t0

    def truncated(self, t_end: float, z_end: np.ndarray | None = None) -> "SmoothArc":
        if not (min(self.t0, self.t1) - 1e-12 <= t_end <= max(self.t0, self.t1) + 1e-12):
            raise ValueError("truncation time outside arc span")
        z_end = self(t_end) if z_end is None else np.asarray(z_end, dtype=float)
        knots = self.knots[self.knots <= t_end] if self.t1 >= self.t0 else self.knots[self.knots >= t_end]
        return replace(self, t1=float(t_end), z1=z_end,
                       knots=np.append(knots, t_end))


def integrate_free_flight(system: VibroImpactSystem, mu: float, t0: float, z0,
                          t1: float, config: IntegratorConfig = DEFAULT_CONFIG,
                          check_crossing: bool = True) -> SmoothArc:
    """Integrate the smooth field from (t0, z0) to t1 and return a dense arc.

    With ``check_crossing`` the arc is scanned for a delimiter crossing and
    WallCrossingError is raised if one is found: the caller asked for free
    flight on a span that is not actually free, and must event-locate
    instead.
    """
    z0 = as_state_vector(z0, system.n)
    if t1 == t0:
        return SmoothArc(t0, t1, _ConstantInterpolant(z0), z0.copy(), z0.copy(),
                         np.array([t0]))
    sol = solve_ivp(lambda t, z: system.field(t, z, mu), (t0, t1), z0,
                    method=config.method, rtol=config.rel_tol, atol=config.abs_tol,
                    max_step=config.max_step, dense_output=True)
    if not sol.success:
        raise IntegrationError(f"solver failed on [{t0}, {t1}]: {sol.message}")
    arc = SmoothArc(t0, t1, sol.sol, z0.copy(), sol.y[:, -1].copy(), sol.t.copy())
    if check_crossing:
        hit = detect_next_impact(system, mu, arc, config)
        if hit is not None:
            raise WallCrossingError(
                f"x1 reached the delimiter at t={hit.t:.12g} inside [{t0}, {t1}]",
                t_cross=hit.t)
    return arc


class ImpactHit(NamedTuple):
    t: float
    state: PhaseState
    kind: str  # reflection | grazing-tangency


def _scan_times(arc: SmoothArc, config: IntegratorConfig, on_wall_start: bool) -> np.ndarray:
    knots = np.asarray(arc.knots, dtype=float)
    if knots.size < 2:
        return np.array([arc.t0, arc.t1])
    ts = [knots[:1]]
    if on_wall_start and arc.span > 0:
        # geometric ladder resolves the short flight after an on-wall start,
        # which can be far shorter than the first accepted solver step
        ts.append(arc.t0 + arc.span * 2.0 ** -np.arange(54, 0, -1))
    for a, b in zip(knots[:-1], knots[1:]):
        if b != a:
            ts.append(np.linspace(a, b, config.scan_subdiv + 1)[1:])
    out = np.unique(np.concatenate(ts))
    return out


def detect_next_impact(system: VibroImpactSystem, mu: float, arc: SmoothArc,
                       config: IntegratorConfig = DEFAULT_CONFIG) -> ImpactHit | None:
    """First delimiter contact on a dense arc, or None.

    Brackets are found on a subdivided grid of the solver's own steps and
    refined with brentq on the interpolant. Two contact types are located:
    sign changes of x1 (transversal hits) and local minima of x1 touching
    the wall within tolerance (tangencies, via upward zero crossings of y1).
    A root with |y1| below the chatter velocity floor is flagged
    grazing-tangency.
    """
    if arc.span == 0.0:
        return None
    on_wall_start = abs(float(arc.z0[0])) <= config.wall_tol
    ts = _scan_times(arc, config, on_wall_start)
    Z = arc(ts)
    X, V = Z[0], Z[1]

    x1_of = lambda t: float(arc(t)[0])
    y1_of = lambda t: float(arc(t)[1])

    # skip any on-wall outgoing prefix (the arc may start exactly at a
    # post-impact or post-sliding state with x1 = 0)
    start = 0
    while start < ts.size - 1 and X[start] <= config.wall_tol and V[start] >= -config.event_tol:
        if X[start + 1] > config.wall_tol:
            break
        start += 1

    candidates: list[ImpactHit] = []

    # transversal crossings: first sign change of x1
    for i in range(start + 1, ts.size):
        if X[i - 1] > config.wall_tol and X[i] <= 0.0:
            t_hit = brentq(x1_of, ts[i - 1], ts[i], xtol=config.event_tol, rtol=1e-15)
            z_hit = arc(t_hit)
            candidates.append(_make_hit(t_hit, z_hit, config))
            break

    # tangency: y1 crossing upward through 0 while x1 is at the wall
    limit = candidates[0].t if candidates else np.inf
    for i in range(start + 1, ts.size):
        if ts[i] > limit:
            break
        if V[i - 1] < 0.0 <= V[i] and min(X[i - 1], X[i]) > -config.wall_tol:
            t_min = brentq(y1_of, ts[i - 1], ts[i], xtol=config.event_tol, rtol=1e-15) \
                if V[i] > 0.0 else ts[i]
            x_min = x1_of(t_min)
            if x_min <= config.wall_tol:
                if x_min < -config.wall_tol:
                    # dipped through between grid nodes: locate the crossing
                    t_hit = brentq(x1_of, ts[i - 1], t_min, xtol=config.event_tol, rtol=1e-15)
                    candidates.append(_make_hit(t_hit, arc(t_hit), config))
                else:
                    candidates.append(_make_hit(t_min, arc(t_min), config, tangent=True))

    if not candidates:
        return None
    hit = min(candidates, key=lambda h: h.t)
    return hit


def _make_hit(t_hit: float, z_hit: np.ndarray, config: IntegratorConfig,
              tangent: bool = False) -> ImpactHit:
    z = np.array(z_hit, dtype=float)
    z[0] = 0.0
    grazing = tangent or abs(z[1]) < config.chatter_velocity_floor
    if grazing:
        z[1] = min(z[1], 0.0)
    return ImpactHit(float(t_hit), PhaseState(z), "grazing-tangency" if grazing else "reflection")


def _slide(system: VibroImpactSystem, mu: float, t_start: float, ztan0: np.ndarray,
           t_end: float, config: IntegratorConfig):
    """Evolve the on-delimiter state until the normal acceleration turns
    positive or the span ends. Returns (SlidingInterval, exited?)."""
    if system.n == 1:
        g = lambda t: sliding_normal_accel(t, np.empty(0), mu, system)
        interval = lambda t: np.empty(0) if np.ndim(t) == 0 else np.empty((0, np.size(t)))
        # scan for the first upward crossing of f1 through zero
        ts = np.linspace(t_start, t_end, max(32, int(np.ceil((t_end - t_start) / system.T * 256)) + 1))
        t_exit, exited = t_end, False
        for a, b in zip(ts[:-1], ts[1:]):
            if g(a) <= 0.0 < g(b):
                t_exit = brentq(g, a, b, xtol=config.event_tol)
                exited = True
                break
            if g(a) > 0.0:
                t_exit, exited = a, True
                break
        return SlidingInterval(t_start, float(t_exit), interval), exited

    def rhs(t, zt):
        return sliding_vector_field(t, zt, mu, system)

    def exit_event(t, zt):
        return sliding_normal_accel(t, zt, mu, system)
    exit_event.terminal = True
    exit_event.direction = 1

    sol = solve_ivp(rhs, (t_start, t_end), np.asarray(ztan0, dtype=float),
                    method=config.method, rtol=config.rel_tol, atol=config.abs_tol,
                    dense_output=True, events=exit_event)
    if not sol.success:
        raise IntegrationError(f"sliding integration failed: {sol.message}")
    exited = sol.status == 1
    t_exit = float(sol.t_events[0][0]) if exited else t_end
    return SlidingInterval(t_start, t_exit, sol.sol), exited


def _micro_flight_threshold(config: IntegratorConfig, f1: float) -> float:
    # below this launch speed a bounce peaks under ~8x the wall tolerance
    # and cannot be reliably bracketed on the interpolant
    return float(np.sqrt(16.0 * config.wall_tol * abs(f1)))


def _micro_bounce(system: VibroImpactSystem, mu: float, t: float, z: np.ndarray,
                  t_end: float, config: IntegratorConfig):
    """Analytic completion of one sub-tolerance bounce from an on-wall state.

    Flight time 2*v/|f1| to leading order, polished by one Newton step on
    the integrated endpoint. Returns (arc, hit) like the detect path, or
    None when the predicted flight leaves the span.
    """
    v0, f1 = z[1], system.accel(t, z, mu)[0]
    dt = 2.0 * v0 / abs(f1)
    if t + dt > t_end or dt == 0.0:
        return None
    arc = integrate_free_flight(system, mu, t, z, t + dt, config, check_crossing=False)
    ze = arc.z1
    if abs(ze[1]) > 1e-300:
        dt_corr = -ze[0] / ze[1]
        if 0 < abs(dt_corr) < 0.5 * dt and t + dt + dt_corr <= t_end:
            arc = integrate_free_flight(system, mu, t, z, t + dt + dt_corr, config,
                                        check_crossing=False)
            ze = arc.z1
    z_hit = ze.copy()
    z_hit[0] = 0.0
    z_hit[1] = min(z_hit[1], 0.0)
    kind = "reflection" if abs(z_hit[1]) >= config.chatter_velocity_floor else "grazing-tangency"
    return arc, ImpactHit(arc.t1, PhaseState(z_hit), kind)


def simulate_hybrid(system: VibroImpactSystem, mu: float, t0: float, z0,
                    t_end: float, config: IntegratorConfig = DEFAULT_CONFIG) -> HybridTrajectory:
    """Full hybrid solution on [t0, t_end] from an admissible initial state.

    Alternates free flight and reflections; tangencies with non-positive
    normal acceleration enter sliding, which persists until the exit test
    fires. More than ``chatter_max_impacts`` consecutive reflections below
    the chatter velocity floor collapse onto the delimiter (chattering
    completion); bounces too shallow for the interpolant to bracket are
    completed analytically so the accumulation time stays accurate.
    Exceeding the hard event cap truncates the trajectory with a note
    instead of looping forever.
    """
    z = as_state_vector(z0, system.n)
    if z[0] < -config.wall_tol:
        raise ValueError(f"initial state not admissible: x1 = {z[0]:.3e} < 0")
    t = float(t0)
    segments, events, sliding = [], [], []
    low_speed_run = 0
    truncated, note = False, ""

    def record(ev: ImpactEvent):
        events.append(ev)
        if len(events) > config.max_events:
            raise EventExplosionError(f"more than {config.max_events} events")

    # an initial on-wall incoming state is reflected before any flight
    if abs(z[0]) <= config.wall_tol and z[1] < -config.chatter_velocity_floor:
        pre = PhaseState(np.concatenate(([0.0], z[1:])))
        post = apply_impact(pre, mu, system)
        record(ImpactEvent(t, pre, post, -pre.y1, "reflection"))
        z = np.array(post.z)

    try:
        while t < t_end - 1e-14 * max(1.0, abs(t_end)):
            on_wall = abs(z[0]) <= config.wall_tol
            f1_wall = sliding_normal_accel(t, z[2:], mu, system) if on_wall else np.nan

            # resting contact (y1 snapped to exactly zero by the paths below)
            if on_wall and z[1] == 0.0 and f1_wall <= 0.0:
                pre = PhaseState(np.concatenate(([0.0, 0.0], z[2:])))
                record(ImpactEvent(t, pre, pre, 0.0, "sliding-entry"))
                interval, exited = _slide(system, mu, t, z[2:], t_end, config)
                sliding.append(interval)
                z = interval.state(interval.t1)
                t = interval.t1
                low_speed_run = 0
                if exited and t < t_end:
                    record(ImpactEvent(t, PhaseState(z), PhaseState(z), 0.0, "sliding-exit"))
                continue

            # sub-tolerance bounce: complete analytically
            if on_wall and f1_wall < 0.0 and 0.0 <= z[1] < _micro_flight_threshold(config, f1_wall):
                step = _micro_bounce(system, mu, t, z, t_end, config)
            else:
                step = None
                arc = integrate_free_flight(system, mu, t, z, t_end, config, check_crossing=False)
                hit = detect_next_impact(system, mu, arc, config)
                if hit is None:
                    segments.append(arc)
                    z, t = arc.z1.copy(), arc.t1
                    break
                step = (arc.truncated(hit.t, np.array(hit.state.z)), hit)

            if step is None:  # micro flight outlives the span
                arc = integrate_free_flight(system, mu, t, z, t_end, config, check_crossing=False)
                segments.append(arc)
                z, t = arc.z1.copy(), arc.t1
                break

            arc, hit = step
            segments.append(arc)
            pre = hit.state
            if hit.kind == "grazing-tangency":
                f1 = sliding_normal_accel(hit.t, pre.ztan, mu, system)
                if f1 <= 0.0:
                    z = np.array(pre.z)
                    z[1] = 0.0
                    t = hit.t
                    continue  # resting-contact branch takes over
                post = PhaseState(np.concatenate(([0.0, max(pre.y1, 0.0)], pre.ztan)))
                record(ImpactEvent(hit.t, pre, post, abs(pre.y1), "grazing-tangency"))
                z, t = np.array(post.z), hit.t
                low_speed_run = 0
                continue

            post = apply_impact(pre, mu, system)
            Y = -pre.y1
            record(ImpactEvent(hit.t, pre, post, Y, "reflection"))
            z, t = np.array(post.z), hit.t
            if Y < config.chatter_velocity_floor:
                low_speed_run += 1
            else:
                low_speed_run = 0
            if low_speed_run > config.chatter_max_impacts:
                # chattering completion: collapse the accumulation
                z = z.copy()
                z[1] = 0.0
                low_speed_run = 0
                continue  # resting-contact branch decides sliding vs liftoff
    except EventExplosionError as exc:
        truncated, note = True, str(exc)

    return HybridTrajectory(t0=float(t0), t1=float(t), segments=tuple(segments),
                            events=tuple(events), sliding=tuple(sliding),
                            truncated=truncated, note=note)
