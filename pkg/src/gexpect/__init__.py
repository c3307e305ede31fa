"""Numerics for nonlinear expectations driven by fully nonlinear parabolic PDEs.

The package builds finite representations of dominated nonlinear generators,
solves their Cauchy problems with a monotone explicit scheme, assembles
nonlinear (conditional) expectations on cylinder functionals by backward
recursion, verifies martingale characterisations at the PDE level,
constructs weak solutions of SDEs under variance uncertainty, and bounds
sublinear expectations from below by Monte Carlo over control selections.
"""

__version__ = "0.1.0"

from .expressions import Expr, ExpressionError, X, parse
from .generators import (
    ControlPoint,
    GeneratorSpec,
    IsaacsSpec,
    SamplePlan,
    SublinearSpec,
    check_axioms,
    check_domination,
    gheat_spec,
    singleton_spec,
)
from .grids import Field, Grid, Payoff, domain_radius
from .reporting import DominationReport, ResidualReport, combine_reports
from .solver import (
    CFLError,
    SolveResult,
    SolverAbort,
    cfl_timestep,
    check_comparison,
    check_solution_properties,
    convergence_study,
    evolve,
    scheme_budget,
    solve_cauchy,
    trusted_mask,
)
from .expectation import (
    ConditionalValue,
    CylinderFunctional,
    PrefixPolicy,
    check_expectation_properties,
    conditional,
    expectation,
    expectation_run,
    semigroup_apply,
    sign_split_residual,
    time_inconsistency_demo,
    tower_residual,
)
from .martingale import (
    MartingaleFixture,
    frozen_source_comparison,
    martingale_residual,
    plane_reduction_crosscheck,
    polynomial_extension_check,
    residual_refinement,
)
from .gsde import (
    DerivedSpec,
    DiscretePath,
    SdeCoefficients,
    build_weak_generator,
    check_integrand_martingale,
    ito_residual,
    noise_characterization_trio,
    reconstruct_noise,
    roundtrip_residual,
    simulate_state_paths,
    weak_solution_demo,
)
from .oracle import (
    LowerBoundResult,
    McEstimate,
    Policy,
    bound_report,
    default_policy_family,
    lower_bound,
    simulate,
)
from .config import ConfigError, RunConfig, load_config
