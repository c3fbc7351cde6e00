"""vibroimpact: simulation and grazing-bifurcation analysis of vibro-impact
oscillators under the Newtonian impact law."""

__version__ = "0.1.0"

from .model import (PhaseState, VibroImpactSystem, ImpactEvent, HybridTrajectory,
                    apply_impact, sliding_vector_field, sliding_exit_test,
                    make_system, system_from_config, builtin_system_names)
from .integrate import (IntegratorConfig, SmoothArc, integrate_free_flight,
                        detect_next_impact, simulate_hybrid)
from .variational import (VariationalResult, SaltationMatrix, smooth_variational,
                          saltation_matrix, poincare_map, poincare_jacobian,
                          lyapunov_exponents)
from .grazing import (PeriodicOrbit, GrazingReport, GrazingSurfaceFit,
                      find_periodic_orbit, find_grazing_orbit, continue_family,
                      classify_grazing, fit_grazing_surface, peterka_type)
from .manifolds import (SpectralSplit, ManifoldPolyline, DiskReturnReport,
                        spectral_split, trace_manifold, detect_homoclinic_bend,
                        verify_disk_return)
from .twodof import (TwoDofParams, ClosedFormOrbit, b_star, solve_vartheta,
                     periodic_family_11, closed_form_monodromy,
                     check_frequency_window)

__all__ = [
    "PhaseState", "VibroImpactSystem", "ImpactEvent", "HybridTrajectory",
    "apply_impact", "sliding_vector_field", "sliding_exit_test",
    "make_system", "system_from_config", "builtin_system_names",
    "IntegratorConfig", "SmoothArc", "integrate_free_flight",
    "detect_next_impact", "simulate_hybrid",
    "VariationalResult", "SaltationMatrix", "smooth_variational",
    "saltation_matrix", "poincare_map", "poincare_jacobian",
    "lyapunov_exponents",
    "PeriodicOrbit", "GrazingReport", "GrazingSurfaceFit",
    "find_periodic_orbit", "find_grazing_orbit", "continue_family",
    "classify_grazing", "fit_grazing_surface", "peterka_type",
    "SpectralSplit", "ManifoldPolyline", "DiskReturnReport",
    "spectral_split", "trace_manifold", "detect_homoclinic_bend",
    "verify_disk_return",
    "TwoDofParams", "ClosedFormOrbit", "b_star", "solve_vartheta",
    "periodic_family_11", "closed_form_monodromy", "check_frequency_window",
]
