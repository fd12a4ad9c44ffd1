"""Skew Brownian motion on pre-fractal Koch domains with insulating fiber layers."""

from .diffusion import (PathBatch, PathFunctionals, ParticleState, SimConfig, accumulate_local_time,
                        nu_of, run_path, run_paths, skew_resolve, step)
from .errors import (ConfigError, DomainError, GeometryError, IntegrityError, KochSkewError,
                     ParameterError, StatisticalFailure)
from .functionals import (SurvivalCurve, estimate_dirichlet, estimate_robin, estimate_u_n,
                          laplace_local_time, resolvent_estimate, survival_curve)
from .geometry import (DomainModel, FiberCell, IfsSimilitude, PrefractalBoundary, WeightField,
                       arclength_quadrature, build_domain, classify, project_to_interface, refine,
                       selfsimilar_quadrature, sigma_n, weight_at)
from .io import RunManifest, emit_results, parse_config
from .lab import (RegimeSchedule, ResultTable, StudyConfig, check_prop_rr, classify_limit,
                  moment_diagnostics, run_regime_study)
from .radial import (IntervalModel, convergence_sweep, elastic_limit_solution, fd_mean_exit,
                     interval_solution, mean_exit_closed_form)
from .rng import PathStream
from .stats import Estimate

__version__ = "0.1.0"
