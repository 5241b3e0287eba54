"""Photon blockade in a cavity with quadratic optomechanical coupling.

Closed-form dressed spectrum, weak-drive amplitudes, master-equation steady
states and parameter sweeps of the equal-time correlation g2(0).
"""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DegenerateSteadyStateError, DimensionError,
                     LowConfidenceWarning, NumericalError, NumericRangeError, ParameterError,
                     QuadBlockadeError, StiffnessError, TruncationError,
                     UndefinedCorrelationError)
from .hilbert import FockSpace, ModelParams, build_hamiltonian
from .spectrum import (DressedLevel, anharmonicity, dressed_frequency, dressed_level,
                       frequency_shift, overlap, squeeze_factor, squeeze_matrix,
                       squeeze_matrix_element)
from .perturbation import (AmplitudeSet, g2_analytic, g2_kerr, g2_small_g0, g2_spr, g2_tpr,
                           g2_weak_drive, longtime_amplitudes, photon_probabilities)
from .lindblad import (DensityMatrix, Liouvillian, build_liouvillian, g2_numeric,
                       photon_moments, steady_state, trace_distance)
from .oracles import OracleReport, evolve_to_steady, squeeze_oracle, validation_suite
from .sweep import (Axis, DriveCondition, SweepRecord, SweepResult, SweepSpec, Truncation,
                    resonance_detunings, run_sweep)
