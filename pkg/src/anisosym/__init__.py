"""Numerical toolkit for symmetrization estimates of anisotropic elliptic problems."""

from .young import OneDimYoung, PowerSum, YoungError, BarrierUndefined, klimov_symmetrize, power_sum_klimov
from .profiles import RadialProfile, StepProfile
from .rearrange import GridFunction, ball_grid, box_grid, decreasing_rearrangement, lattice_box
from .barrier import BarrierSpec, barrier_solution
from .pde import DiscreteProblem, SolveOptions, solve
from .verify import HypothesisError, comparison_report

__version__ = "0.1.0"
