"""Numerical laboratory for the 2D space-homogeneous Boltzmann collision
operator with square-configuration kernels and entropy-production
diagnostics."""

from .errors import (BoltzlabError, ConfigError, KernelFormError,
                     NumericalError, RegionMapError)
from .profiles import (CounterexampleParams, GaussianDensity, GridSpec,
                       RadialStepProfile, ScalarGridField, Velocity,
                       build_counterexample, counterexample_from_json,
                       counterexample_to_json, eval_profile,
                       field_from_function, grid_interpolate, profile_to_grid)
from .kernels import (AngularBump, DiracAt, DiracPerpendicular, KernelSpec,
                      RadialBump, SquareConfiguration, kernel_eval,
                      post_collision_velocities, square_configuration)
from .operator import (OperatorQuadrature, collision_moments, make_quadrature,
                       moment_rates, q_gain_singular, q_loss_singular,
                       q_mollified, q_on_grid, q_singular,
                       quadrature_for_profile)
from .diagnostics import (AnnulusDecomposition, DiagnosticsReport,
                          default_regions, dt_entropy_production, entropy,
                          entropy_production_direct,
                          entropy_production_symmetric, l_potential,
                          region_report)
from .evolution import (EvolutionConfig, TimeSeries, conservation_drift,
                        evolve, step)
from .experiment import (ScalingFit, SweepConfig, choose_c, compare_scaling,
                         fit_scaling, run_diagnose, run_evolve, run_sweep)

__version__ = "0.1.0"
