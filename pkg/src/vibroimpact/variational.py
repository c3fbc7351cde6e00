"""Derivatives of the hybrid flow.

The Jacobian of the period map factors into smooth variational matrices
(one per flight arc) and analytic saltation matrices (one per reflection).
The saltation matrix is built from field evaluations on both sides of the
impact; its entries blow up like 1/Y as the normal speed Y vanishes, which
is exactly the near-grazing mechanism this package quantifies. A
shrinking-window finite-difference Jacobian across the impact exists in the
test suite as the independent oracle for the analytic form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (IntegrationError, NearGrazingError, NonDifferentiableError,
                     SectionCollisionError)
from .integrate import DEFAULT_CONFIG, IntegratorConfig, SmoothArc, simulate_hybrid
from .model import (HybridTrajectory, ImpactEvent, PhaseState, VibroImpactSystem,
                    as_state_vector)

__all__ = [
    "VariationalResult",
    "SaltationMatrix",
    "smooth_variational",
    "saltation_matrix",
    "poincare_map",
    "poincare_trajectory",
    "poincare_jacobian",
    "lyapunov_exponents",
    "flow_with_sensitivity",
]


def _variational_rhs(system: VibroImpactSystem, mu: float, ncol: int, with_mu: bool):
    """RHS of the augmented system (z, M) with M carrying ncol sensitivity
    columns; when with_mu, the last column solves the inhomogeneous
    parameter-sensitivity equation."""
    d = 2 * system.n

    def rhs(t, y):
        z = y[:d]
        M = y[d:].reshape(d, ncol)
        J = system.field_jac(t, z, mu)
        dM = J @ M
        if with_mu:
            dM[:, -1] += system.field_dmu(t, z, mu)
        return np.concatenate((system.field(t, z, mu), dM.ravel()))

    return rhs


def flow_with_sensitivity(system: VibroImpactSystem, mu: float, t0: float, z0,
                          t1: float, config: IntegratorConfig = DEFAULT_CONFIG,
                          M0: np.ndarray | None = None, with_mu: bool = False):
    """Integrate state plus sensitivity columns along a smooth span.

    Returns (z_end, M_end). M0 defaults to the identity; with ``with_mu`` an
    extra zero-initialized column is appended that accumulates dz/dmu at
    fixed initial state.
    """
    z0 = as_state_vector(z0, system.n)
    d = z0.size
    M0 = np.eye(d) if M0 is None else np.asarray(M0, dtype=float)
    if with_mu:
        M0 = np.column_stack([M0, np.zeros(d)]) if M0.shape[1] == d else M0
    ncol = M0.shape[1]
    if t1 == t0:
        return z0.copy(), M0.copy()
    y0 = np.concatenate((z0, M0.ravel()))
    sol = solve_ivp(_variational_rhs(system, mu, ncol, with_mu), (t0, t1), y0,
                    method=config.method, rtol=config.rel_tol, atol=config.abs_tol,
                    max_step=config.max_step)
    if not sol.success:
        raise IntegrationError(f"variational solve failed: {sol.message}")
    yf = sol.y[:, -1]
    return yf[:d], yf[d:].reshape(d, ncol)


def smooth_variational(system: VibroImpactSystem, mu: float, arc: SmoothArc,
                       config: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """State-transition matrix of the smooth flow along one impact-free arc."""
    _, M = flow_with_sensitivity(system, mu, arc.t0, arc.z0, arc.t1, config)
    return M


@dataclass(frozen=True)
class SaltationMatrix:
    """Analytic jump of the variational flow across one reflection.

    Block structure (impacting pair first, tangential pairs after):
    diagonal (-r, -r, 1, ..., 1); first column carries the 1/Y-divergent
    velocity corrections; everything else zero. det = r^2 exactly.
    """

    entries: np.ndarray
    Y: float
    f_pre: float   # normal acceleration just before, f1(t, 0, -Y, ztan)
    f_post: float  # normal acceleration just after,  f1(t, 0, rY, ztan)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))


def saltation_matrix(system: VibroImpactSystem, mu: float, event: ImpactEvent,
                     config: IntegratorConfig = DEFAULT_CONFIG) -> SaltationMatrix:
    """Build the analytic saltation matrix at a transversal reflection.

    The velocity-row corrections come from the one-sided field values at the
    located impact: the y1 row gets -(f1_post + r f1_pre)/Y in the first
    column, each tangential velocity row gets (f_pre - f_post)/Y, and
    tangential position rows are untouched. Raises NearGrazingError when Y
    is below the chatter floor (the entries scale like 1/Y).
    """
    if event.kind != "reflection":
        raise ValueError(f"saltation is defined at reflections, got {event.kind!r}")
    Y = float(event.normal_speed)
    if Y < config.chatter_velocity_floor:
        raise NearGrazingError(
            f"normal speed {Y:.3e} below floor {config.chatter_velocity_floor:.1e}; "
            "saltation entries diverge like 1/Y")
    r = system.restitution(mu)
    n, d = system.n, 2 * system.n
    f_pre = system.accel(event.t, np.array(event.pre.z), mu)
    f_post = system.accel(event.t, np.array(event.post.z), mu)

    B = np.eye(d)
    B[0, 0] = -r
    B[1, 1] = -r
    B[1, 0] = -(f_post[0] + r * f_pre[0]) / Y
    for j in range(1, n):
        B[2 * j + 1, 0] = (f_pre[j] - f_post[j]) / Y
    return SaltationMatrix(entries=B, Y=Y, f_pre=float(f_pre[0]), f_post=float(f_post[0]))


@dataclass(frozen=True)
class VariationalResult:
    """Factored Jacobian of a period map: smooth factors, saltation factors,
    and their ordered product D."""

    smooth_factors: tuple
    saltation_factors: tuple
    D: np.ndarray
    det_D: float

    @property
    def factors(self) -> list[np.ndarray]:
        """All factors in chronological order (alternating arc, jump)."""
        out = []
        for i, S in enumerate(self.smooth_factors):
            out.append(S)
            if i < len(self.saltation_factors):
                out.append(self.saltation_factors[i].entries)
        return out


def poincare_trajectory(system: VibroImpactSystem, mu: float, theta: float, z0,
                        config: IntegratorConfig = DEFAULT_CONFIG,
                        n_periods: int = 1, t_ref: float = 0.0,
                        check_section: bool = True) -> HybridTrajectory:
    """Hybrid trajectory over the section-to-section span
    [t_ref - theta, t_ref + nT - theta].

    ``t_ref`` anchors the section to a reference impact phase; its value is
    irrelevant for autonomous fields. Raises SectionCollisionError if an
    impact falls within tolerance of either section time; the section offset
    must be re-chosen. The map itself stays continuous through such a
    coincidence, so bulk mapping callers may disable the check.
    """
    if theta <= 0:
        raise ValueError("section offset theta must be positive")
    t_start = t_ref - theta
    t_end = t_ref + n_periods * system.T - theta
    traj = simulate_hybrid(system, mu, t_start, z0, t_end, config)
    if check_section:
        guard = max(100 * config.event_tol, 1e-9 * system.T)
        for ev in traj.events:
            if min(abs(ev.t - t_start), abs(t_end - ev.t)) < guard:
                raise SectionCollisionError(
                    f"impact at t={ev.t:.12g} within {guard:.1e} of a section time; "
                    "change theta")
    return traj


def poincare_map(system: VibroImpactSystem, mu: float, theta: float, z0,
                 config: IntegratorConfig = DEFAULT_CONFIG,
                 n_periods: int = 1, t_ref: float = 0.0,
                 check_section: bool = True) -> PhaseState:
    """Time-T return map taken at phase t_ref - theta (offset from the
    reference impact)."""
    return poincare_trajectory(system, mu, theta, z0, config, n_periods, t_ref,
                               check_section).end_state()


def poincare_jacobian(system: VibroImpactSystem, mu: float, theta: float, z0,
                      config: IntegratorConfig = DEFAULT_CONFIG,
                      n_periods: int = 1, t_ref: float = 0.0,
                      trajectory: HybridTrajectory | None = None) -> VariationalResult:
    """Jacobian of the period map as the ordered product of smooth
    variational matrices and saltation matrices.

    Requires every contact along the span to be a transversal reflection;
    a tangency means z0 lies on the grazing separatrix where the map is not
    differentiable, and sliding destroys invertibility.
    """
    traj = trajectory if trajectory is not None else \
        poincare_trajectory(system, mu, theta, z0, config, n_periods, t_ref)
    bad = [e for e in traj.events if e.kind != "reflection"]
    if bad or traj.sliding:
        raise NonDifferentiableError(
            f"non-transversal contact ({bad[0].kind if bad else 'sliding'}) on the span; "
            "the state lies on the grazing separatrix")
    smooth, salts = [], []
    d = 2 * system.n
    D = np.eye(d)
    for i, arc in enumerate(traj.segments):
        S = smooth_variational(system, mu, arc, config)
        smooth.append(S)
        D = S @ D
        if i < len(traj.events):
            B = saltation_matrix(system, mu, traj.events[i], config)
            salts.append(B)
            D = B.entries @ D
    return VariationalResult(smooth_factors=tuple(smooth), saltation_factors=tuple(salts),
                             D=D, det_D=float(np.linalg.det(D)))


def lyapunov_exponents(system: VibroImpactSystem, mu: float, theta: float, z0,
                       n_periods: int, config: IntegratorConfig = DEFAULT_CONFIG,
                       t_ref: float = 0.0) -> np.ndarray:
    """Per-period Lyapunov exponents of the period map along an orbit.

    QR-reorthogonalized accumulation of the period-map Jacobians over
    n_periods; returns the 2n per-period log growth rates sorted
    descending.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    z = as_state_vector(z0, system.n)
    d = 2 * system.n
    Q = np.eye(d)
    logs = np.zeros(d)
    for _ in range(n_periods):
        traj = poincare_trajectory(system, mu, theta, z, config, t_ref=t_ref)
        D = poincare_jacobian(system, mu, theta, z, config, trajectory=traj).D
        Q, R = np.linalg.qr(D @ Q)
        diag = np.abs(np.diag(R))
        if np.any(diag == 0.0):
            raise NonDifferentiableError("degenerate Jacobian in Lyapunov accumulation")
        logs += np.log(diag)
        z = np.array(traj.end_state().z)
    return np.sort(logs / n_periods)[::-1]
