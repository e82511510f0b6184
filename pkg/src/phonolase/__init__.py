"""Two-coupled-cavity optomechanical phonon laser analysis.

Semiclassical steady states and bistability sweeps, linear stability of
fixed points, phonon gain and threshold with the near-threshold cubic
expansion and its scalar potentials, and second-order phonon coherence
from linearized noise spectra.  The ``phonolase`` CLI drives parameter
sweeps to reproducible CSV.
"""

from .coherence import (CoherenceResult, DegenerateDenominator,
                        FrequencyCoefficients, MomentResult, PoleAtFrequency,
                        SpectralBasis, TailDivergence, coherence_result,
                        equal_time_moments, frequency_coefficients, g2_zero,
                        spectra, spectral_basis)
from .constants import HBAR, K_B, TWO_PI, angular_to_hz, hz_to_angular
from .dynamics import (SemiclassicalState, StepSizeUnderflow, Trajectory,
                       integrate, rhs, write_trajectory_csv)
from .lasing import (JzExpansion, LasingCoefficients, PotentialSurface,
                     cubic_coefficients, flow_field, flow_field_zero_detuning,
                     gain_exceeds_loss, gain_full, gain_simple,
                     injected_coefficients, population_inversion_expansion,
                     potential_1d, potential_1d_minima, potential_2d,
                     threshold_inversion)
from .params import (DerivedScalars, ParameterError, ParameterFileError,
                     SystemParams, derive_scalars, params_from_text,
                     read_params, thermal_occupation)
from .stability import (EigenSolverFailure, StabilityReport, build_matrix,
                        classify, spectrum, stability_sweep,
                        stable_lasing_window, window_width)
from .steady import (BistabilitySweep, NoConvergence, SteadyStateBranch,
                     eq9_rhs, follow_to, solve_fixed_points, sweep_bistability)

__version__ = "0.1.0"
