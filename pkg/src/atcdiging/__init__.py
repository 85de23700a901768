"""Distributed gradient tracking with adapt-then-combine updates.

Library for running ATC-DIGing and DIGing over static or time-varying
networks, with uncoordinated per-agent step-sizes, and for checking measured
convergence against the closed-form rate and small-gain bounds.
"""

import types as _types

from .errors import (AtcDigingError, ConfigError, Diverged, GainProductNotContractive,
                     HeterogeneityTooLarge, InsufficientHistory, LambdaBelowDelta,
                     NotDoublyStochastic, RateNotContractive, ReferenceSolverDiverged,
                     StepsizeConditionViolated)
from .linalg import (ErgodicNormParams, average_seminorm, consensus_seminorm,
                     ergodic_norm, frobenius_norm)
from .network import (Graph, GraphSequence, MixingMatrix, complete_graph,
                      contraction_factor, metropolis_weights, next_graph, path_graph,
                      ring_graph, star_graph, verify_contraction)
from .objectives import (ProblemInstance, ReferenceSolution, SmoothnessProfile, gradient,
                         random_huber, random_least_squares, random_quadratic,
                         solve_reference, stacked_gradient)
from .solvers import (RunTrace, SolverState, StepSizeSchedule, atc_diging_step,
                      diging_step, igd_run, run)
from .rates import (check_rate_empirically, complexity_comparison, consensus_gains,
                    fit_log_rate, guaranteed_rate, max_stepsize, small_gain_bound,
                    verify_small_gain_arrows)

__version__ = "0.1.0"

__all__ = sorted(name for name, obj in globals().items()
                 if not name.startswith("_") and not isinstance(obj, _types.ModuleType))
