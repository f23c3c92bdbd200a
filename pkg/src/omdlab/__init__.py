"""omdlab: exact and inexact online mirror descent with certified steps."""

from .balance import balance_report, loss_balance, psi_floor, trajectory_balance
from .exceptions import (CertificationError, ConfigError, DomainError, InfeasiblePointError,
                         OMDError, PreconditionError, ResolutionError, SolverError)
from .geometry import Domain, Point, Regularizer, bregman, effective_smoothness, kernel_basis
from .instances import build_hard_polytope, make_loss_stream, sample_until_event
from .subproblem import StepCertificate, StepObjective, certify, exact_step, exact_step_polytope, solve
from .trajectories import (Trajectory, build_dimension_stuck, build_entropy_stuck, build_polytope_stuck,
                           build_smooth_stuck, regret, run_exact, run_ftrl_approx, run_honest_inexact)

__version__ = "0.1.0"
