"""Weyl-Heisenberg (Gabor) frame toolkit on a discretized line.

Signals are sampled on a uniform rational grid; lattice shifts and
modulations are exact on that grid, so the frame coefficient energy and its
Walnut-series expansion can be compared to rounding accuracy.
"""

from .correlation import (CCReport, CorrelationTable, LatticeSpec, amalgam_norm, build_table, cc_report,
                          correlation_g, table_to_csv)
from .gabor import (CoefficientGrid, ConvergenceError, FrameBoundsReport, GaborSystem, coefficient,
                    coefficient_energy, coefficients, frame_bounds_estimate, frame_operator_apply,
                    frame_operator_matrix, inverse_frame_apply, synthesize)
from .grid import (GridCompatibilityError, GridMismatchError, GridSignal, GridSpec, inner_product, make_window,
                   modulate, norm, norm_sq, random_signal, translate)
from .verifier import (Scenario, VerdictReport, WindowSpec, default_scenarios, divergence_probe,
                       scenario_suite, verify_identity)
from .walnut import (ConvergenceReport, IdentityRHS, PartialSumSpec, convergence_diagnostics, identity_rhs,
                     norm_bound_check, partial_norm_estimate, polarization_check, walnut_full_apply,
                     walnut_partial_apply)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
