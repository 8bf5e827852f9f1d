"""Modified inner products, periodic-time expectation values and period
selection for non-normal (diagonalizable) Hamiltonians."""

from .errors import (ApproximationFailure, DimensionMismatch, DomainError, EmptySubset, EmptyWithinBounds,
                     InputError, NonDiagonalizable, ParseError, PcatError, PositiveBmax, Singular,
                     TimeOutOfRange, VanishingDenominator, VanishingTrace)
from .evolution import (DominantSubset, StatePair, dominant_subset, evolve_pair, heisenberg_residual,
                        maximize_states, transition_amplitude, weak_value)
from .linalg import SpectralData, eig, mat_inverse, spectral_from_eigenvectors, trace_weighted_exp
from .periodic import (PeriodicExpectation, amplitude_modulus_sq, amplitude_modulus_sq_derivative,
                       periodic_expectation, reality_report, reduced_expectation)
from .periodsolver import (PeriodCandidate, RationalSpacing, rationalize_spacings, scan_oracle, select_period,
                           solve_general, solve_order2, solve_period, verify_alignment)
from .qgeometry import (QMetric, build_q_metric, is_q_normal, q_adjoint, q_inner, q_split,
                        random_q_hermitian)

__version__ = "0.1.0"
