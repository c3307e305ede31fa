import numpy as np
import pytest

from gexpect.generators import gheat_spec
from gexpect.grids import Grid, Payoff
from gexpect.gsde import (
    DiscretePath,
    SdeCoefficients,
    bracket_identity_residual,
    build_weak_generator,
    check_integrand_martingale,
    ito_residual,
    noise_characterization_trio,
    reconstruct_noise,
    roundtrip_residual,
    simulate_state_paths,
    weak_solution_demo,
)


@pytest.fixture
def identity_coeffs():
    return SdeCoefficients.line()


@pytest.fixture
def state_dependent():
    return SdeCoefficients.line(drift=0.1,
                                sigma=lambda z: 1.0 + 0.1 * np.sin(z),
                                holder_const=0.3)


@pytest.fixture
def grid():
    return Grid([-8.0], [8.0], 201)


class TestDerivedGenerator:
    def test_identity_coefficients_reproduce_variance_uncertainty(
            self, identity_coeffs, grid):
        spec, rep = build_weak_generator(identity_coeffs, grid)
        assert rep.passed
        ref = gheat_spec(0.25, 1.0)
        rng = np.random.default_rng(3)
        for _ in range(10):
            z, p, A = rng.normal(size=3)
            assert spec.evaluate([z], [p], [[A]]) == pytest.approx(
                ref.evaluate([z], [p], [[A]]), abs=1e-13)

    def test_sigma_scaling(self, grid):
        spec, _ = build_weak_generator(SdeCoefficients.line(sigma=2.0), grid)
        # spec(z, 0, A) = gbar(4 A)
        assert spec.evaluate([0.0], [0.0], [[1.0]]) == pytest.approx(2.0)
        assert spec.evaluate([0.0], [0.0], [[-1.0]]) == pytest.approx(-0.5)

    def test_bracket_load_feeds_gradient(self, grid):
        spec, _ = build_weak_generator(SdeCoefficients.line(qv_load=0.3), grid)
        assert spec.evaluate([0.0], [1.0], [[0.0]]) == pytest.approx(0.3)

    def test_singular_sigma_rejected_with_witness(self, grid):
        bad = SdeCoefficients.line(sigma=lambda z: z)   # vanishes at 0
        with pytest.raises(ValueError, match="ill-conditioned"):
            build_weak_generator(bad, grid)

    def test_ellipticity_floor_enforced(self, grid):
        # gbar(A) = max(A/2, A/8) cannot dominate 0.7 tr A on positives
        bad = SdeCoefficients.line(lambda_min=0.7)
        with pytest.raises(ValueError, match="ellipticity"):
            build_weak_generator(bad, grid)

    def test_holder_spot_check_warns_only(self, grid):
        sneaky = SdeCoefficients.line(sigma=lambda z: 1.0 + 0.4 * np.sin(3 * z),
                                      holder_const=0.01)
        spec, rep = build_weak_generator(sneaky, grid)
        assert rep.details["holder_warning"]
        assert rep.passed    # warning, not rejection

    def test_derived_spec_is_sublinear(self, identity_coeffs, grid):
        from gexpect.generators import SamplePlan, check_axioms

        spec, _ = build_weak_generator(identity_coeffs, grid)
        assert check_axioms(spec, SamplePlan(n_samples=2048, seed=4)).passed


class TestNoiseReconstruction:
    def test_identity_noise_is_recentred_state(self, identity_coeffs):
        pair = simulate_state_paths(identity_coeffs, 0.5, 1.0, 300, seed=5)[0]
        rec = reconstruct_noise(pair.z, identity_coeffs)
        np.testing.assert_allclose(rec.b_path.states[:, 0],
                                   pair.z.states[:, 0] - 0.5, atol=1e-13)

    def test_constant_sigma_bracket_scaling(self):
        coeffs = SdeCoefficients.line(sigma=2.0)
        pair = simulate_state_paths(coeffs, 0.0, 1.0, 300, seed=6)[0]
        rec = reconstruct_noise(pair.z, coeffs)
        np.testing.assert_allclose(rec.b_path.qv[:, 0, 0],
                                   pair.z.qv[:, 0, 0] / 4.0, atol=1e-14)

    def test_roundtrip_exact(self, state_dependent):
        coeffs = SdeCoefficients.line(drift=0.1, qv_load=0.2,
                                      sigma=lambda z: 1.0 + 0.1 * np.sin(z))
        pair = simulate_state_paths(coeffs, 0.0, 1.0, 500, seed=7)[0]
        assert roundtrip_residual(pair.z, coeffs) <= 1e-12

    def test_bracket_residual_shrinks_with_step(self, state_dependent):
        residuals = []
        for n in (100, 1000, 10000):
            pairs = simulate_state_paths(state_dependent, 0.0, 1.0, n,
                                         n_paths=4, seed=8)
            residuals.append(np.mean([
                bracket_identity_residual(p, state_dependent) for p in pairs]))
        assert residuals[2] < residuals[1] < residuals[0]

    def test_path_invariants(self, identity_coeffs):
        pair = simulate_state_paths(identity_coeffs, 0.0, 1.0, 100, seed=9)[0]
        qv = pair.z.qv[:, 0, 0]
        assert np.all(np.diff(qv) >= 0)
        with pytest.raises(ValueError, match="increasing"):
            DiscretePath(np.array([0.0, 0.0, 1.0]), np.zeros((3, 1)),
                         np.zeros((3, 1, 1)))


class TestIntegrandMartingale:
    def test_zero_integrand_is_exactly_flat(self, identity_coeffs, grid):
        rep = check_integrand_martingale(identity_coeffs, 0.0, 0.0, 1.0, grid)
        assert rep.residual == 0.0

    def test_pure_bracket_identity_quadratic(self, identity_coeffs):
        g = Grid([-10.0], [10.0], 401)
        rep = check_integrand_martingale(identity_coeffs, 0.0, 2.0, 1.0, g)
        assert rep.residual <= 1e-9
        assert rep.details["surrogate_exact"]

    def test_linear_integrand_robust_to_drift(self, state_dependent, grid):
        rep = check_integrand_martingale(state_dependent, 1.0, 0.0, 0.5, grid)
        assert rep.residual <= 1e-9
        assert rep.details["surrogate_exact"]

    def test_trio_under_scaled_constant_sigma(self):
        coeffs = SdeCoefficients.line(sigma=2.0)
        g = Grid([-20.0], [20.0], 401)
        for rep in noise_characterization_trio(coeffs, 1.0, g):
            assert rep.passed, rep.name

    def test_trio_requires_constant_sigma(self, state_dependent, grid):
        with pytest.raises(ValueError, match="constant sigma"):
            noise_characterization_trio(state_dependent, 1.0, grid)


class TestItoIdentity:
    def test_linear_payoff_exact(self, identity_coeffs):
        pair = simulate_state_paths(identity_coeffs, 0.0, 1.0, 1000, seed=11)[0]
        rep = ito_residual(pair.b_noise, Payoff.from_expr("3*x - 1"), beta=2.0)
        assert rep.residual <= 1e-10

    def test_quadratic_constant_coefficients_exact(self, identity_coeffs):
        pair = simulate_state_paths(identity_coeffs, 0.0, 1.0, 1000, seed=12)[0]
        rep = ito_residual(pair.b_noise, Payoff.from_expr("x^2"), beta=1.5)
        assert rep.residual <= 1e-10
        assert rep.details["bracket"] <= 1e-10

    def test_quartic_residual_shrinks_with_step(self, identity_coeffs):
        chain = []
        for n in (100, 1000, 10000):
            pair = simulate_state_paths(identity_coeffs, 0.0, 1.0, n, seed=13)[0]
            rep = ito_residual(pair.b_noise, Payoff.from_expr("x^4"))
            chain.append(rep.details["chain_rule"])
        assert chain[2] < chain[1] < chain[0]

    def test_state_dependent_beta_bracket(self, identity_coeffs):
        pair = simulate_state_paths(identity_coeffs, 0.0, 1.0, 2000, seed=14)[0]
        rep = ito_residual(pair.b_noise, Payoff.from_expr("x^2"),
                           beta=lambda xi: 1.0 + 0.1 * np.tanh(xi))
        assert rep.details["bracket"] <= 1e-10   # realised vs integrated agree

    def test_needs_analytic_derivatives(self, identity_coeffs):
        pair = simulate_state_paths(identity_coeffs, 0.0, 1.0, 10, seed=15)[0]
        bare = Payoff(lambda s: s[..., 0] ** 2, 1)
        with pytest.raises(ValueError, match="analytic"):
            ito_residual(pair.b_noise, bare)


class TestDemo:
    def test_constant_sigma_demo_all_pass(self):
        rep = weak_solution_demo(SdeCoefficients.line(sigma=2.0), 0.5,
                                 Grid([-16.0], [16.0], 321))
        failed = [k for k, v in rep.details.items() if not v["passed"]]
        assert rep.passed, failed

    def test_state_dependent_demo_all_pass(self, state_dependent, grid):
        rep = weak_solution_demo(state_dependent, 0.5, grid,
                                 dtaus=(1e-2, 1e-3))
        failed = [k for k, v in rep.details.items() if not v["passed"]]
        assert rep.passed, failed
