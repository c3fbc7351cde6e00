"""Closed forms for the built-in two degree-of-freedom grazing oscillator.

The system couples an impacting damped oscillator to a free harmonic drive:

    x1'' + 2p x1' + q x1 = x2,      x2'' + w^2 x2 = a,

with the wall at x1 = 0 and constant restitution r. The drive amplitude b
(of the oscillation of x2 about a/w^2) is conserved by the flow and by
impacts, so it doubles as the bifurcation parameter of the single-impact
periodic family. Everything about that family is available in closed form:
the grazing amplitude b_star, the homogeneous phase constant, the one or two
roots of the phase condition, and the smooth-block monodromy scalars. These
are the ground truth the numerical pipeline is validated against.

Time conventions: the closed forms live in the shifted clock
``tau = t + phi0 - t_lag`` in which the particular solution of the x1
equation is ``A_c + B_c sin(w tau)``; ``t_lag`` is the response phase lag.
Conversion helpers are provided.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGrazingError
from .model import PhaseState

__all__ = [
    "TwoDofParams",
    "ClosedFormOrbit",
    "b_star",
    "solve_vartheta",
    "periodic_family_11",
    "closed_form_monodromy",
    "check_frequency_window",
    "extract_orbit_constants",
]


@dataclass(frozen=True)
class TwoDofParams:
    """Parameters of the two-dof oscillator.

    Invariants: q - p^2 > 0, a > 0, omega > 0. ``b`` is the drive amplitude
    and ``phi0`` its phase; restitution r in (0, 1].
    """

    p: float = 0.05
    q: float = 1.0
    omega: float = 0.75
    a: float = 1.0
    r: float = 0.8
    b: float = 0.0
    phi0: float = 0.0

    def __post_init__(self):
        if self.q - self.p ** 2 <= 0:
            raise ValueError("requires q - p^2 > 0")
        if self.a <= 0 or self.omega <= 0:
            raise ValueError("requires a > 0 and omega > 0")
        if not 0.0 < self.r <= 1.0:
            raise ValueError("restitution must lie in (0, 1]")

    @property
    def omega0(self) -> float:
        return float(np.sqrt(self.q - self.p ** 2))

    @property
    def T(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def response_denom(self) -> float:
        # sqrt(4 p^2 w^2 + (q - w^2)^2): the x1 frequency-response magnitude
        # denominator. The squared-frequency form (q - w^2) is used
        # uniformly; it is the choice consistent with the particular
        # solution of the reduced forced equation.
        return float(np.sqrt(4 * self.p ** 2 * self.omega ** 2 + (self.q - self.omega ** 2) ** 2))

    @property
    def forcing_offset(self) -> float:
        """A_c: the constant part of the particular solution, a/(w^2 q)."""
        return self.a / (self.omega ** 2 * self.q)

    def forcing_amplitude(self, b: float | None = None) -> float:
        """B_c: oscillatory amplitude of the particular solution."""
        return (self.b if b is None else b) / self.response_denom

    @property
    def phase_lag(self) -> float:
        """t_lag: response lag of x1 behind the x2 drive, atan2-based."""
        return float(np.arctan2(2 * self.p * self.omega, self.q - self.omega ** 2) / self.omega)

    def shifted_from_wall_clock(self, t: float) -> float:
        return t + self.phi0 - self.phase_lag

    def wall_clock_from_shifted(self, tau: float) -> float:
        return tau - self.phi0 + self.phase_lag


@dataclass(frozen=True)
class ClosedFormOrbit:
    """One root of the single-impact phase condition.

    ``C1``/``vartheta`` are the homogeneous-part constants in shifted time,
    ``tau0`` the impact phase (shifted clock), ``Y0`` the signed impact
    normal speed (y1(tau0+0)/r). ``admissible`` marks the roots that are
    genuine impacting orbits: Y0 >= 0 and x1 >= 0 over the open period.
    ``branch`` is the sign of cos(w tau0)."""

    C1: float
    vartheta: float
    tau0: float
    Y0: float
    branch: int
    admissible: bool

    def x1_of_tau(self, params: TwoDofParams, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        A_c = params.forcing_offset
        B_c = params.forcing_amplitude()
        hom = self.C1 * np.exp(-params.p * (tau - self.tau0)) \
            * np.sin(params.omega0 * (tau - self.tau0 + self.vartheta))
        return hom + A_c + B_c * np.sin(params.omega * tau)

    def seed_state(self, params: TwoDofParams) -> tuple[float, PhaseState]:
        """Wall-clock impact time and post-impact phase state."""
        t0 = params.wall_clock_from_shifted(self.tau0)
        x2 = params.a / params.omega ** 2 + params.b * np.sin(params.omega * (t0 + params.phi0))
        y2 = params.b * params.omega * np.cos(params.omega * (t0 + params.phi0))
        return t0, PhaseState.from_components(0.0, params.r * self.Y0, [x2], [y2])


def b_star(params: TwoDofParams) -> float:
    """Grazing amplitude: the drive level at which the impact-free periodic
    response touches the wall tangentially at exactly one phase."""
    return params.response_denom * params.a / (params.q * params.omega ** 2)


def solve_vartheta(params: TwoDofParams) -> float:
    """Homogeneous phase constant, the unique root in (0, pi/omega0) of
    cot(omega0 * vartheta) = (exp(pT) - cos(omega0 T)) / sin(omega0 T)."""
    om0, T = params.omega0, params.T
    s = np.sin(om0 * T)
    if abs(s) < 1e-12:
        raise DegenerateGrazingError("sin(omega0 T) = 0: resonant degeneracy")
    K = (np.exp(params.p * T) - np.cos(om0 * T)) / s
    # cot(x) = K has the unique root x = atan2(1, K) in (0, pi)
    return float(np.arctan2(1.0, K) / om0)


def _phase_constants(params: TwoDofParams):
    om0, om, p, r, T = params.omega0, params.omega, params.p, params.r, params.T
    vt = solve_vartheta(params)
    G = om0 * np.cos(om0 * vt) - p * np.sin(om0 * vt)
    Gp = om0 * np.cos(om0 * (vt + T)) - p * np.sin(om0 * (vt + T))
    H = r * np.exp(-p * T) * (p * np.sin(om0 * (vt + T)) - om0 * np.cos(om0 * (vt + T))) \
        + p * np.sin(om0 * vt) - om0 * np.cos(om0 * vt)
    if abs(H) < 1e-12:
        raise DegenerateGrazingError("phase-condition denominator H = 0")
    D = (1 + r) * om * np.sin(om0 * vt) / H
    return vt, G, Gp, H, D


def periodic_family_11(params: TwoDofParams, admissible_only: bool = False,
                       interior_samples: int = 4096) -> list[ClosedFormOrbit]:
    """Roots of the single-impact phase condition at the given amplitude.

    Solves B_c (sin(w tau0) + D cos(w tau0)) + A_c = 0. Returns 0, 1 or 2
    orbits according to whether B_c^2 (1 + D^2) is below, at, or above
    A_c^2. Roots with negative post-impact velocity or interior penetration
    are flagged inadmissible (they solve the periodic boundary problem but
    live partly outside the admissible half-space); pass
    ``admissible_only=True`` to filter them.
    """
    A_c = params.forcing_offset
    B_c = params.forcing_amplitude()
    if B_c == 0.0:
        return []
    vt, G, Gp, H, D = _phase_constants(params)
    amp = abs(B_c) * np.sqrt(1 + D * D)
    s = -A_c / (B_c * np.sqrt(1 + D * D))
    tol = 1e-12 * max(1.0, A_c)
    if amp < abs(A_c) - tol:
        return []
    psi = np.arctan2(D, 1.0)
    s = float(np.clip(s, -1.0, 1.0))
    etas = [np.arcsin(s)] if abs(amp - abs(A_c)) <= tol else [np.arcsin(s), np.pi - np.arcsin(s)]

    T = params.T
    orbits = []
    for eta in etas:
        xi = eta - psi
        tau0 = ((xi + np.pi) % (2 * np.pi) - np.pi) / params.omega
        cos_xi = np.cos(params.omega * tau0)
        C1 = B_c * (1 + params.r) * params.omega * cos_xi / H
        y1_plus = C1 * G + B_c * params.omega * cos_xi
        Y0 = y1_plus / params.r
        orbit = ClosedFormOrbit(C1=float(C1), vartheta=float(vt), tau0=float(tau0),
                                Y0=float(Y0), branch=int(np.sign(cos_xi) or 1),
                                admissible=False)
        ts = tau0 + np.linspace(0.0, T, interior_samples + 1)[1:-1]
        interior_ok = bool(np.min(orbit.x1_of_tau(params, ts)) > -1e-9)
        admissible = (Y0 >= -1e-12) and interior_ok
        orbit = ClosedFormOrbit(orbit.C1, orbit.vartheta, orbit.tau0, orbit.Y0,
                                orbit.branch, admissible)
        orbits.append(orbit)
    if admissible_only:
        orbits = [o for o in orbits if o.admissible]
    return orbits


def closed_form_monodromy(params: TwoDofParams) -> tuple[float, float]:
    """(trace, det) of the fundamental matrix of the unforced impacting
    block x'' + 2p x' + q x = 0 over one period."""
    om0, p, T = params.omega0, params.p, params.T
    return 2.0 * np.cos(om0 * T) * np.exp(-p * T), float(np.exp(-2 * p * T))


def check_frequency_window(params: TwoDofParams) -> tuple[bool, int | None]:
    """Check the frequency-ratio window omega0/omega in (k + 1/4, k + 1/2)
    for some natural k; returns (ok, k)."""
    ratio = params.omega0 / params.omega
    k = int(np.floor(ratio))
    frac = ratio - k
    if 0.25 < frac < 0.5:
        return True, k
    return False, None


def extract_orbit_constants(params: TwoDofParams, t0: float, y1_plus: float) -> tuple[float, float, float]:
    """Recover (C1, vartheta, tau0) from a numerically found single-impact
    orbit given its wall-clock impact time and post-impact normal velocity.

    Splits the state at the impact into particular plus homogeneous parts of
    the reduced forced equation and reads the phase constants off the
    homogeneous part.
    """
    om0, om, p = params.omega0, params.omega, params.p
    tau0 = params.shifted_from_wall_clock(t0)
    A_c = params.forcing_offset
    B_c = params.forcing_amplitude()
    h = 0.0 - (A_c + B_c * np.sin(om * tau0))          # homogeneous position at tau0
    hdot = y1_plus - B_c * om * np.cos(om * tau0)      # homogeneous velocity at tau0
    ang = np.arctan2(om0 * h, hdot + p * h)
    if ang <= 0.0:
        ang += np.pi
    vartheta = ang / om0
    s = np.sin(ang)
    C1 = h / s if abs(s) > 1e-15 else hdot / (om0 * np.cos(ang) - p * np.sin(ang))
    return float(C1), float(vartheta), float(tau0)
