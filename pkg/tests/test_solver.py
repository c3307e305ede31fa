import numpy as np
import pytest

from gexpect.generators import (
    ControlPoint,
    IsaacsSpec,
    SublinearSpec,
    gheat_spec,
    singleton_spec,
)
from gexpect.grids import Field, Grid, Payoff, domain_radius
from gexpect.solver import (
    CFLError,
    cfl_timestep,
    check_comparison,
    check_solution_properties,
    convergence_study,
    evolve,
    solve_cauchy,
    trusted_mask,
)


@pytest.fixture
def gheat():
    return gheat_spec(0.25, 1.0)


@pytest.fixture
def grid():
    return Grid([-10.0], [10.0], 401)


def isaacs_toy():
    def sigma(xs, g, l):
        return ((1.0 + 0.1 * np.sin(xs[:, 0])) * g)[:, None, None]

    def drift(xs, g, l):
        return (0.1 * l * np.ones(len(xs)))[:, None]

    spec = IsaacsSpec([0.5, 1.0], [0.5, 1.0], sigma, drift, 1, order="sup-inf")
    spec.dominating = spec.with_order("sup-sup")
    return spec


class TestCflTimestep:
    def test_diffusion_formula(self, gheat):
        g = Grid([-10.0], [10.0], 401)   # dx = 0.05
        assert cfl_timestep(gheat, g) == pytest.approx(0.9 * 0.0025 / 1.0)

    def test_drift_only_formula(self):
        spec = SublinearSpec([ControlPoint([[0.0]], [1.0])])
        g = Grid([-10.0], [10.0], 401)
        assert cfl_timestep(spec, g) == pytest.approx(0.9 * 0.0025 / 0.05)

    def test_degenerate_returns_horizon(self):
        spec = SublinearSpec([ControlPoint([[0.0]], [0.0])])
        g = Grid([-1.0], [1.0], 11)
        assert cfl_timestep(spec, g, horizon=2.5) == 2.5

    def test_inadmissible_step_refused_with_requirement(self, gheat, grid):
        admissible = cfl_timestep(gheat, grid)
        with pytest.raises(CFLError) as err:
            evolve(gheat, Payoff.from_expr("x^2").sample(grid), 1.0, grid,
                   dt=10 * admissible)
        assert err.value.required == pytest.approx(admissible)


class TestClosedForms:
    def test_quadratic_gains_upper_variance_rate(self, gheat, grid):
        res = solve_cauchy(gheat, Payoff.from_expr("x^2"), 1.0, grid)
        assert res.at([0.0]) == pytest.approx(1.0, abs=1e-10)

    def test_concave_quadratic_gains_lower_variance_rate(self, gheat, grid):
        res = solve_cauchy(gheat, Payoff.from_expr("-(x^2)"), 1.0, grid)
        assert res.at([0.0]) == pytest.approx(-0.25, abs=1e-10)

    def test_linear_payoff_is_stationary(self, gheat, grid):
        res = solve_cauchy(gheat, Payoff.from_expr("x"), 1.0, grid)
        np.testing.assert_allclose(res.field.values, grid.axes[0], atol=1e-12)

    def test_heat_kernel_decay_of_cosine(self):
        spec = singleton_spec([[1.0]], [0.0])
        g = Grid([-6.0], [6.0], 401)
        res = solve_cauchy(spec, Payoff.from_expr("cos(x)"), 1.0, g)
        assert res.at([0.0]) == pytest.approx(np.exp(-0.5), abs=1e-3)

    def test_source_term_accumulates(self, gheat, grid):
        res = solve_cauchy(gheat, Payoff.from_expr("x^2"), 1.0, grid,
                           source=Payoff.from_expr("x"))
        # d/dt u = G(u'') + z from z^2: adds t plus a ride-along t*z
        assert res.at([2.0]) == pytest.approx(4.0 + 1.0 + 2.0, abs=1e-9)

    def test_zero_horizon_is_identity(self, gheat, grid):
        vals = Payoff.from_expr("cos(x)").sample(grid)
        res = evolve(gheat, vals, 0.0, grid)
        np.testing.assert_array_equal(res.field.values, vals)

    def test_overflow_aborts_with_step_index(self, gheat):
        from gexpect.solver import SolverAbort

        g = Grid([-1.0], [1.0], 11)
        huge = 1e308 * Payoff.from_expr("x^2").sample(g)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(SolverAbort) as err:
                evolve(gheat, huge, 1.0, g)
        assert err.value.step >= 1


class TestMonotoneStructure:
    def test_comparison_ordered_fixtures(self, gheat, grid):
        rep = check_comparison(gheat, Payoff.from_expr("x^2 - 1"),
                               Payoff.from_expr("x^2"), 1.0, grid)
        assert rep.passed

    def test_comparison_isaacs_hinge_fixture(self):
        spec = isaacs_toy()
        g = Grid([-8.0], [8.0], 201)
        rep = check_comparison(spec, Payoff.from_expr("-abs(x)"),
                               Payoff.from_expr("0"), 1.0, g)
        assert rep.passed

    def test_comparison_equal_inputs_exact(self, gheat):
        g = Grid([-8.0], [8.0], 201)
        rep = check_comparison(gheat, Payoff.from_expr("x^2"),
                               Payoff.from_expr("x^2"), 0.5, g)
        assert rep.residual == 0.0

    def test_comparison_precondition_enforced(self, gheat, grid):
        with pytest.raises(ValueError, match="precondition"):
            check_comparison(gheat, Payoff.from_expr("x^2"),
                             Payoff.from_expr("x^2 - 1"), 1.0, grid)

    def test_constant_payoff_stays_constant(self, gheat, grid):
        res = solve_cauchy(gheat, Payoff.from_expr("4.5"), 1.0, grid)
        np.testing.assert_allclose(res.field.values, 4.5, atol=1e-12)

    def test_shift_homogeneity_domination(self, gheat):
        g = Grid([-8.0], [8.0], 201)
        rep = check_solution_properties(
            gheat, Payoff.from_expr("x^2"), Payoff.from_expr("cos(x)"),
            shift=5.0, alpha=2.0, horizon=1.0, grid=g)
        assert rep.passed
        assert rep.details["constant_shift"] <= 1e-9
        assert rep.details["positive_homogeneity"] <= 1e-9

    def test_domination_inequality_isaacs_vs_product_sup(self):
        spec = isaacs_toy()
        g = Grid([-8.0], [8.0], 201)
        rep = check_solution_properties(
            spec, Payoff.from_expr("x^2"), Payoff.from_expr("cos(x)"),
            shift=1.0, alpha=3.0, horizon=0.5, grid=g)
        assert rep.passed


class TestConvergence:
    def test_cosine_study_second_order(self):
        spec = singleton_spec([[1.0]], [0.0])
        grids = [Grid([-6.0], [6.0], n) for n in (101, 201, 401)]
        table = convergence_study(spec, Payoff.from_expr("cos(x)"), 1.0, grids,
                                  reference=float(np.exp(-0.5)))
        assert table.monotone_decreasing()
        assert table.order >= 0.8

    def test_stationary_fixture_error_free(self, gheat):
        grids = [Grid([-6.0], [6.0], n) for n in (101, 201)]
        table = convergence_study(gheat, Payoff.from_expr("x"), 1.0, grids,
                                  reference=0.0)
        assert all(r.error <= 1e-12 for r in table.rows)

    def test_extrapolated_reference_when_missing(self, gheat):
        grids = [Grid([-6.0], [6.0], n) for n in (51, 101)]
        table = convergence_study(gheat, Payoff.from_expr("cos(x)"), 0.5, grids)
        assert len(table.rows) == 2


class TestBatchingAndDimensions:
    def test_batched_matches_individual(self, gheat):
        g = Grid([-5.0], [5.0], 101)
        a = Payoff.from_expr("x^2").sample(g)
        b = Payoff.from_expr("cos(x)").sample(g)
        both = evolve(gheat, np.stack([a, b]), 0.3, g).field.values
        one = evolve(gheat, a, 0.3, g).field.values
        two = evolve(gheat, b, 0.3, g).field.values
        np.testing.assert_array_equal(both[0], one)
        np.testing.assert_array_equal(both[1], two)

    def test_two_dimensional_diagonal_diffusion(self):
        spec = SublinearSpec([
            ControlPoint(np.diag([1.0, 0.5]), [0.0, 0.0]),
            ControlPoint(np.diag([0.25, 0.25]), [0.0, 0.0]),
        ])
        g = Grid([-6.0, -6.0], [6.0, 6.0], 61)
        res = solve_cauchy(spec, Payoff.from_expr("x0^2 + x1^2", 2), 0.5, g)
        # both coordinates convex: upper variances apply, rate 0.5*(1+0.5)*2
        assert res.at([0.0, 0.0]) == pytest.approx(0.5 * (1.0 + 0.5), abs=1e-9)

    def test_cross_diffusion_rejected(self):
        spec = SublinearSpec([
            ControlPoint(np.array([[1.0, 0.3], [0.3, 1.0]]), [0.0, 0.0]),
        ])
        g = Grid([-2.0, -2.0], [2.0, 2.0], 11)
        with pytest.raises(ValueError, match="diagonal"):
            solve_cauchy(spec, Payoff.from_expr("x0^2 + x1^2", 2), 0.1, g)

    def test_drifted_two_dimensional_upwind(self):
        spec = SublinearSpec([ControlPoint(np.diag([0.5, 0.0]), [0.0, 1.0])])
        g = Grid([-4.0, -4.0], [4.0, 4.0], 81)
        res = solve_cauchy(spec, Payoff.from_expr("x1", 2), 0.5, g)
        # pure transport in x1: value grows like t inside the window
        assert res.at([0.0, 0.0]) == pytest.approx(0.5, abs=5e-2)


class TestGridsAndMasks:
    def test_domain_radius_rule(self):
        assert domain_radius(0.0, 1.0, 0.0, 1.0) == pytest.approx(6.0)
        assert domain_radius(2.0, 1.0, 0.5, 1.0) == pytest.approx(2 + 0.5 + 6)

    def test_grid_validation(self):
        with pytest.raises(ValueError, match="5 points"):
            Grid([-1.0], [1.0], 3)
        with pytest.raises(ValueError, match="extent"):
            Grid([1.0], [-1.0], 11)

    def test_trusted_mask_shrinks_with_horizon(self, gheat, grid):
        m1 = trusted_mask(gheat, grid, 0.25)
        m2 = trusted_mask(gheat, grid, 1.0)
        assert m1.sum() > m2.sum()

    def test_interpolation_matches_nodes(self, grid):
        f = Field(grid, Payoff.from_expr("x^2").sample(grid))
        assert f.at([grid.axes[0][17]]) == pytest.approx(grid.axes[0][17] ** 2)
