"""Core types for vibro-impact systems under the Newtonian impact law.

State layout is fixed throughout the package: the phase vector is
``z = (x1, y1, x2, y2, ..., xn, yn)`` with the impacting coordinate first.
The admissible region is the half-space ``x1 >= 0``; the delimiter is the
hyperplane ``x1 = 0``. At a transversal impact the normal velocity reverses
with restitution ``r(mu)`` and every tangential component is untouched
(homogeneous, slippery delimiter). A zero-velocity contact with the normal
acceleration pointing into the wall pins the state to the delimiter
(sliding) until the acceleration changes sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "PhaseState",
    "VibroImpactSystem",
    "ImpactEvent",
    "SlidingInterval",
    "HybridTrajectory",
    "apply_impact",
    "sliding_vector_field",
    "sliding_exit_test",
    "register_system",
    "make_system",
    "system_from_config",
    "builtin_system_names",
]

# Tolerance on the incoming-velocity sign check in apply_impact; absorbs
# root-finder noise at event localization.
SIGN_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhaseState:
    """Immutable phase-space point ``(x1, y1, xtan..., ytan...)``.

    ``z`` holds the interleaved vector; accessors expose the impacting pair
    and the tangential components.
    """

    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.ndim != 1 or z.size == 0 or z.size % 2 != 0:
            raise ValueError(f"phase vector must have even length >= 2, got shape {z.shape}")
        object.__setattr__(self, "z", _freeze(z))

    @classmethod
    def from_components(cls, x1: float, y1: float,
                        xtan: Sequence[float] = (), ytan: Sequence[float] = ()) -> "PhaseState":
        xtan = np.atleast_1d(np.asarray(xtan, dtype=float)) if len(np.atleast_1d(xtan)) else np.empty(0)
        ytan = np.atleast_1d(np.asarray(ytan, dtype=float)) if len(np.atleast_1d(ytan)) else np.empty(0)
        if xtan.size != ytan.size:
            raise ValueError("xtan and ytan must have equal length")
        z = np.empty(2 + 2 * xtan.size)
        z[0], z[1] = x1, y1
        z[2::2] = xtan
        z[3::2] = ytan
        return cls(z)

    @property
    def n(self) -> int:
        return self.z.size // 2

    @property
    def x1(self) -> float:
        return float(self.z[0])

    @property
    def y1(self) -> float:
        return float(self.z[1])

    @property
    def xtan(self) -> np.ndarray:
        return self.z[2::2]

    @property
    def ytan(self) -> np.ndarray:
        return self.z[3::2]

    @property
    def ztan(self) -> np.ndarray:
        """Interleaved tangential block ``(x2, y2, ..., xn, yn)``."""
        return self.z[2:]

    def admissible(self, tol: float = 0.0) -> bool:
        return self.x1 >= -tol

    def __array__(self, dtype=None, copy=None):
        return np.array(self.z, dtype=dtype)


def as_state_vector(state, n: int | None = None) -> np.ndarray:
    """Normalize a PhaseState or array-like into a plain float vector."""
    z = state.z if isinstance(state, PhaseState) else np.atleast_1d(np.asarray(state, dtype=float))
    if z.ndim != 1 or z.size % 2 != 0:
        raise ValueError("state must be a flat even-length vector")
    if n is not None and z.size != 2 * n:
        raise ValueError(f"state has dimension {z.size}, system needs {2 * n}")
    return np.array(z, dtype=float)


def _fd_state_jacobian(f, t, z, mu, n):
    """Central-difference Jacobian of the acceleration field, rows n x 2n."""
    J = np.empty((n, 2 * n))
    for j in range(2 * n):
        h = 1e-6 * max(1.0, abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        J[:, j] = (np.asarray(f(t, zp, mu)) - np.asarray(f(t, zm, mu))) / (2 * h)
    return J


def _fd_mu_derivative(f, t, z, mu):
    h = 1e-6 * max(1.0, abs(mu))
    return (np.asarray(f(t, z, mu + h)) - np.asarray(f(t, z, mu - h))) / (2 * h)


@dataclass(frozen=True)
class VibroImpactSystem:
    """Free-flight field plus impact law of one vibro-impact oscillator.

    Parameters
    ----------
    n : degree-of-freedom count.
    T : forcing period of the field.
    f : acceleration field ``f(t, z, mu) -> (n,)``; must be T-periodic in t
        and twice continuously differentiable in (z, mu).
    r : restitution, either a constant in (0, 1] or a callable of mu.
    mu_range : closed parameter interval containing the grazing value.
    jac : optional analytic state Jacobian of f, ``(t, z, mu) -> (n, 2n)``;
        central differences are used when absent.
    dfdmu : optional analytic parameter derivative of f, ``-> (n,)``.
    tangential_seed : optional map ``(tau0, mu) -> (2n-2,)`` fixing the
        tangential components of the periodic family as a function of the
        impact phase. This is how a bifurcation parameter that acts through
        initial conditions (a conserved tangential amplitude) rather than
        through the field is embedded; shooting pins the tangential unknowns
        to the seed when it is present.
    """

    name: str
    n: int
    T: float
    f: Callable[[float, np.ndarray, float], np.ndarray]
    r: Callable[[float], float] | float = 1.0
    mu_range: tuple[float, float] = (-1.0, 1.0)
    jac: Callable[[float, np.ndarray, float], np.ndarray] | None = None
    dfdmu: Callable[[float, np.ndarray, float], np.ndarray] | None = None
    tangential_seed: Callable[[float, float], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.T <= 0:
            raise ValueError("period T must be positive")
        if self.mu_range[0] > self.mu_range[1]:
            raise ValueError("mu_range must be ordered")

    def restitution(self, mu: float) -> float:
        r = self.r(mu) if callable(self.r) else float(self.r)
        if not 0.0 < r <= 1.0:
            raise ValueError(f"restitution r(mu)={r} outside (0, 1]")
        return r

    def accel(self, t: float, z: np.ndarray, mu: float) -> np.ndarray:
        return np.asarray(self.f(t, z, mu), dtype=float)

    def field(self, t: float, z: np.ndarray, mu: float) -> np.ndarray:
        """Full first-order field F(t, z, mu) in the interleaved layout."""
        F = np.empty(2 * self.n)
        F[0::2] = z[1::2]
        F[1::2] = self.accel(t, z, mu)
        return F

    def field_jac(self, t: float, z: np.ndarray, mu: float) -> np.ndarray:
        """2n x 2n Jacobian of the full field with respect to z."""
        n = self.n
        J = np.zeros((2 * n, 2 * n))
        for k in range(n):
            J[2 * k, 2 * k + 1] = 1.0
        fj = self.jac(t, z, mu) if self.jac is not None else _fd_state_jacobian(self.f, t, z, mu, n)
        J[1::2, :] = np.asarray(fj, dtype=float)
        return J

    def field_dmu(self, t: float, z: np.ndarray, mu: float) -> np.ndarray:
        """2n-vector dF/dmu (zero rows for the velocity components)."""
        v = np.zeros(2 * self.n)
        dm = self.dfdmu(t, z, mu) if self.dfdmu is not None else _fd_mu_derivative(self.f, t, z, mu)
        v[1::2] = np.asarray(dm, dtype=float)
        return v


@dataclass(frozen=True)
class ImpactEvent:
    """One delimiter contact: the state just before and after, the normal
    speed Y = -y1(t-0), and the kind of transition."""

    t: float
    pre: PhaseState
    post: PhaseState
    normal_speed: float
    kind: str  # reflection | grazing-tangency | sliding-entry | sliding-exit

    KINDS = ("reflection", "grazing-tangency", "sliding-entry", "sliding-exit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class SlidingInterval:
    """Motion pinned to the delimiter: x1 = y1 = 0 on [t0, t1], tangential
    components evolving under the reduced field."""

    t0: float
    t1: float
    ztan: Callable[[float], np.ndarray]  # interleaved tangential trajectory

    def state(self, t: float) -> np.ndarray:
        zt = np.atleast_1d(self.ztan(t))
        return np.concatenate(([0.0, 0.0], zt))


@dataclass(frozen=True)
class HybridTrajectory:
    """One solution of the hybrid system: smooth arcs, impact events and
    sliding intervals, interleaved consistently in time."""

    t0: float
    t1: float
    segments: tuple          # SmoothArc, ordered
    events: tuple            # ImpactEvent, ordered
    sliding: tuple           # SlidingInterval, ordered
    truncated: bool = False
    note: str = ""

    def state(self, t: float) -> np.ndarray:
        """Evaluate the trajectory at time t (post-impact side at events)."""
        if not self.t0 - 1e-12 <= t <= self.t1 + 1e-12:
            raise ValueError(f"time {t} outside [{self.t0}, {self.t1}]")
        parts = sorted(
            [("arc", s.t0, s.t1, s) for s in self.segments]
            + [("slide", s.t0, s.t1, s) for s in self.sliding],
            key=lambda p: p[1],
        )
        for kind, a, b, obj in parts:
            if a - 1e-12 <= t <= b + 1e-12:
                return obj(t) if kind == "arc" else obj.state(t)
        raise ValueError(f"time {t} not covered by any segment")

    def end_state(self) -> PhaseState:
        return PhaseState(self.state(self.t1))

    def reflection_count(self) -> int:
        return sum(1 for e in self.events if e.kind == "reflection")

    def sample(self, times) -> np.ndarray:
        return np.array([self.state(t) for t in np.atleast_1d(times)])


# ---------------------------------------------------------------------------
# impact law and sliding dynamics

def apply_impact(pre, mu: float, system: VibroImpactSystem) -> PhaseState:
    """Instantaneous Newtonian reflection at the delimiter.

    Requires an incoming on-delimiter state (x1 = 0, y1 <= 0); returns the
    state with y1 replaced by -r(mu) * y1 and everything else bit-identical.
    """
    z = as_state_vector(pre, system.n)
    if abs(z[0]) > SIGN_TOL:
        raise ValueError(f"impact state must lie on the delimiter, x1={z[0]:.3e}")
    if z[1] > SIGN_TOL:
        raise ValueError(f"impact state must be incoming, y1={z[1]:.3e} > 0")
    post = z.copy()
    post[0] = 0.0
    post[1] = -system.restitution(mu) * min(z[1], 0.0)
    return PhaseState(post)


def sliding_vector_field(t: float, ztan, mu: float, system: VibroImpactSystem) -> np.ndarray:
    """Reduced field on the delimiter: the tangential dynamics with
    x1 = y1 = 0 pinned. Returns a (2n-2,)-vector (empty for n = 1)."""
    ztan = np.atleast_1d(np.asarray(ztan, dtype=float))
    if ztan.size != 2 * (system.n - 1):
        raise ValueError(f"tangential state must have length {2 * (system.n - 1)}")
    if system.n == 1:
        return np.empty(0)
    z = np.concatenate(([0.0, 0.0], ztan))
    acc = system.accel(t, z, mu)
    out = np.empty(ztan.size)
    out[0::2] = ztan[1::2]
    out[1::2] = acc[1:]
    return out


def sliding_exit_test(t: float, ztan, mu: float, system: VibroImpactSystem) -> bool:
    """True exactly when the normal acceleration on the delimiter is
    strictly positive, i.e. the constraint force would become adhesive and
    sliding must end."""
    ztan = np.atleast_1d(np.asarray(ztan, dtype=float))
    z = np.concatenate(([0.0, 0.0], ztan))
    return float(system.accel(t, z, mu)[0]) > 0.0


def sliding_normal_accel(t: float, ztan, mu: float, system: VibroImpactSystem) -> float:
    """Normal acceleration f1 on the delimiter (the sliding-exit indicator)."""
    ztan = np.atleast_1d(np.asarray(ztan, dtype=float))
    z = np.concatenate(([0.0, 0.0], ztan))
    return float(system.accel(t, z, mu)[0])


# ---------------------------------------------------------------------------
# built-in system registry and JSON configuration

_REGISTRY: dict[str, Callable[..., VibroImpactSystem]] = {}


def register_system(name: str):
    """Class-level registry of built-in system factories."""
    def deco(factory):
        _REGISTRY[name] = factory
        return factory
    return deco


def builtin_system_names() -> list[str]:
    return sorted(_REGISTRY)


def make_system(name: str, params: dict | None = None) -> VibroImpactSystem:
    # built-ins live in .systems; import lazily to avoid a cycle
    from . import systems  # noqa: F401
    if name not in _REGISTRY:
        raise ConfigError(f"unknown system {name!r}; built-ins: {builtin_system_names()}")
    try:
        return _REGISTRY[name](**(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for system {name!r}: {exc}") from exc


def system_from_config(config: dict) -> tuple[VibroImpactSystem, float]:
    """Build (system, mu) from a config document
    ``{"system": name, "params": {...}, "mu": float, ...}``."""
    if "system" not in config:
        raise ConfigError("config must name a 'system'")
    mu = float(config.get("mu", 0.0))
    system = make_system(config["system"], config.get("params"))
    return system, mu
