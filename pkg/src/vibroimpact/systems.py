"""Built-in systems.

Two oscillators are registered:

``forced-sdof``
    Single degree of freedom, x'' = -stiffness*(x - offset) - damping*x'
    + (amp + mu)*sin(t), wall at x = 0. The bifurcation parameter mu acts on
    the forcing amplitude, so grazing families here are the generic
    field-embedded kind. Defaults reproduce the textbook test field
    ``x'' = -x - 0.1 x' + sin t`` with elastic reflection.

``two-dof-graze``
    The closed-form two degree-of-freedom oscillator of :mod:`.twodof`. Its
    field has no explicit mu dependence; mu shifts the conserved drive
    amplitude b through the tangential seed, so the parameter sensitivity of
    the flow map is identically zero for this system (its grazing is of the
    conserved-amplitude kind).
"""
from __future__ import annotations

import numpy as np

from .model import VibroImpactSystem, register_system
from .twodof import TwoDofParams, b_star

__all__ = ["forced_sdof", "two_dof_graze"]


@register_system("forced-sdof")
def forced_sdof(stiffness: float = 1.0, damping: float = 0.1, offset: float = 0.0,
                amp: float = 1.0, restitution: float = 1.0) -> VibroImpactSystem:
    k, c, d = float(stiffness), float(damping), float(offset)
    a0 = float(amp)

    def f(t, z, mu):
        return np.array([-k * (z[0] - d) - c * z[1] + (a0 + mu) * np.sin(t)])

    def jac(t, z, mu):
        return np.array([[-k, -c]])

    def dfdmu(t, z, mu):
        return np.array([np.sin(t)])

    return VibroImpactSystem(
        name="forced-sdof", n=1, T=2 * np.pi, f=f, r=float(restitution),
        mu_range=(-a0, a0), jac=jac, dfdmu=dfdmu,
        params={"stiffness": k, "damping": c, "offset": d, "amp": a0,
                "restitution": float(restitution)},
    )


def grazing_amplitude_sdof(stiffness: float, damping: float, offset: float) -> float:
    """Forcing amplitude at which the impact-free response of forced_sdof
    touches the wall: offset * sqrt((k - 1)^2 + c^2) for unit forcing
    frequency."""
    return offset * np.sqrt((stiffness - 1.0) ** 2 + damping ** 2)


@register_system("two-dof-graze")
def two_dof_graze(p: float = 0.05, q: float = 1.0, omega: float = 0.75, a: float = 1.0,
                  restitution: float = 0.8, b: float | None = None,
                  phi0: float = 0.0) -> VibroImpactSystem:
    params = TwoDofParams(p=p, q=q, omega=omega, a=a, r=restitution,
                          b=0.0 if b is None else float(b), phi0=phi0)
    if b is None:
        params = TwoDofParams(p=p, q=q, omega=omega, a=a, r=restitution,
                              b=b_star(params), phi0=phi0)
    p_, q_, om, a_ = params.p, params.q, params.omega, params.a
    b_ref, ph0 = params.b, params.phi0

    def f(t, z, mu):
        return np.array([z[2] - q_ * z[0] - 2 * p_ * z[1],
                         a_ - om ** 2 * z[2]])

    def jac(t, z, mu):
        return np.array([[-q_, -2 * p_, 1.0, 0.0],
                         [0.0, 0.0, -om ** 2, 0.0]])

    def dfdmu(t, z, mu):
        return np.zeros(2)

    def tangential_seed(tau0, mu):
        b_eff = b_ref + mu
        return np.array([a_ / om ** 2 + b_eff * np.sin(om * (tau0 + ph0)),
                         b_eff * om * np.cos(om * (tau0 + ph0))])

    system = VibroImpactSystem(
        name="two-dof-graze", n=2, T=params.T, f=f, r=params.r,
        mu_range=(-b_ref, b_ref), jac=jac, dfdmu=dfdmu,
        tangential_seed=tangential_seed,
        params={"p": p_, "q": q_, "omega": om, "a": a_, "restitution": params.r,
                "b": b_ref, "phi0": ph0},
    )
    return system


def twodof_params_of(system: VibroImpactSystem) -> TwoDofParams:
    """Recover the closed-form parameter block from a two-dof-graze instance."""
    if system.name != "two-dof-graze":
        raise ValueError("not a two-dof-graze system")
    pr = system.params
    return TwoDofParams(p=pr["p"], q=pr["q"], omega=pr["omega"], a=pr["a"],
                        r=pr["restitution"], b=pr["b"], phi0=pr["phi0"])
