"""Recursive kernel estimates that track drifting densities and regressions."""
from .bounds import DensityBoundInputs, RegressionBoundInputs, cesaro_bound, lemma_a1_verify, lemma_a2_verify, lemma_a3_verify, lemma_a4_conditions_check, theorem1_bound, theorem5_bound, theorem7_bound
from .density import DensityBounds, DensityTrackerState, cesaro_density, mollified_density, parzen_estimate, sqg_density_step
from .experiments import DensityEnsemble, GridEnsemble, RegressionEnsemble, fit_rate, run_density, run_grid, run_regression
from .grid import GridEstimate, GridSpec, InfeasibleProjection, grid_sqg_step, project_onto_G
from .kernels import KernelSpec, kernel, width_characteristic
from .regression import RegressionConstraint, RegressionTrackerState, cesaro_regression, nadaraya_watson, project_Y, sqg_regression_step
from .rng import RngState, stream
from .scenarios import GaussianMixtureScenario, RegressionScenario, TriangularScenario, UniformScenario, drifting_normal
from .schedules import ScheduleSpec, drift_schedule, optimal_drift_exponents, optimal_stationary_exponents, stationary_schedule

__all__ = [name for name in dir() if not name.startswith("_")]
