"""Martingale-problem residuals at the PDE level.

For a payoff phi with analytic derivatives, the compensated process
``phi(Z_t) - integral of G(Z, Dphi(Z), D2phi(Z))`` is a martingale exactly
when phi is a stationary solution of the sourced evolution

    d/dt w = G(z, Dw, D2w) - f(z),    f(z) := G(z, Dphi(z), D2phi(z)),
    w(0) = phi.

At the continuous level w stays at phi by construction, so the measured
drift of the discrete solution away from phi isolates the discretisation
gap between the analytic derivatives inside f and the upwind/central
stencils inside the scheme.  Quadratic payoffs under drift-free
state-independent members make that gap vanish to float accumulation
(central second differences are exact on quadratics); everything else
shrinks like C (dx + dt) under refinement.

The module also hosts the frozen-source comparison (piecewise-constant
source along pinned times versus the true running source) and the
two-coordinate lift cross-check, where a one-dimensional generator in
z = x + y is solved both on the reduced line and on the (x, y) plane with
diffusion only in x and drift only in y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .expectation import CylinderFunctional, PrefixPolicy, expectation_run
from .generators import GeneratorSpec
from .grids import Grid, Payoff
from .reporting import ResidualReport
from .solver import DEFAULT_SCHEME_CONSTANT, evolve, solve_cauchy, trusted_mask


@dataclass
class MartingaleFixture:
    spec: GeneratorSpec
    payoff: Payoff
    interval: tuple
    grid: Grid

    def __post_init__(self):
        s, t = self.interval
        if not 0 <= s < t:
            raise ValueError("need 0 <= s < t")
        if self.spec.dimension != self.grid.d:
            raise ValueError("spec and grid dimension differ")


def compensator_values(spec: GeneratorSpec, payoff: Payoff, grid: Grid):
    """f(z) = G(z, Dphi(z), D2phi(z)) on the lattice, plus the analytic flag."""
    grad, hess, analytic = payoff.derivatives_on_grid(grid)
    f = spec.evaluate_many(grid.states(), grad, hess)
    return f.reshape(grid.shape), analytic


def martingale_residual(
    fixture: MartingaleFixture,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
    dt: Optional[float] = None,
) -> ResidualReport:
    """Drift of the sourced evolution away from its stationary payoff."""
    spec, payoff, grid = fixture.spec, fixture.payoff, fixture.grid
    s, t = fixture.interval
    horizon = t - s
    f, analytic = compensator_values(spec, payoff, grid)
    phi0 = payoff.sample(grid)
    res = evolve(spec, phi0, horizon, grid, source=-f, dt=dt)
    mask = trusted_mask(spec, grid, horizon)
    residual = float(np.max(np.abs(res.field.values - phi0)[mask]))
    budget = scheme_constant * (float(np.min(grid.dx)) + res.dt)
    return ResidualReport(
        name=f"martingale[{payoff.name}]",
        residual=residual,
        tolerance=max(1e-9, 3.0 * budget),
        params={"interval": fixture.interval, "nx": grid.nx, "dt": res.dt,
                "window_nodes": int(mask.sum())},
        details={"analytic_derivatives": analytic,
                 "scheme_budget": budget},
    )


def residual_refinement(
    fixture: MartingaleFixture,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
    levels: int = 2,
) -> list:
    """Residuals under grid halving (dt follows the CFL rule automatically)."""
    out = []
    grid = fixture.grid
    for _ in range(levels):
        fx = MartingaleFixture(fixture.spec, fixture.payoff, fixture.interval, grid)
        out.append(martingale_residual(fx, scheme_constant))
        grid = Grid(grid.lo, grid.hi, tuple(2 * n - 1 for n in grid.nx))
    return out


def polynomial_extension_check(
    spec: GeneratorSpec,
    payoff: Payoff,
    interval: tuple,
    grid: Grid,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ResidualReport:
    """Martingale residual for polynomial data.

    Compact support or bounded derivatives are not needed: polynomial growth
    is enough because the compensator is evaluated exactly from the analytic
    derivatives and the truncation error stays outside the trusted window.
    """
    if payoff.growth_degree > 4:
        raise ValueError("polynomial fixtures are capped at degree 4")
    if not payoff.analytic:
        raise ValueError("polynomial fixtures must carry analytic derivatives")
    rep = martingale_residual(
        MartingaleFixture(spec, payoff, interval, grid), scheme_constant)
    rep.name = f"polynomial-{rep.name}"
    rep.details["degree"] = payoff.growth_degree
    return rep


def frozen_source_comparison(
    spec: GeneratorSpec,
    payoff: Payoff,
    source: Payoff,
    horizon: float,
    grid: Grid,
    x0: float = 0.0,
    partitions: Sequence[int] = (1, 2, 3),
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> "FrozenSourceResult":
    """Compare the running source against left-frozen piecewise sources.

    For each n the quantity E[phi(Z_T) + sum_i f(Z_{t_i}) dt] with t_i =
    i T / n (left endpoints, t_0 = 0 contributing the deterministic
    f(x0) dt) is evaluated through the cylinder recursion and held against
    the PDE value with the true source f.  The gap measures the frozen-vs-
    continuous source error, which vanishes as the partition refines.
    """
    sourced = solve_cauchy(spec, payoff, horizon, grid, source=source).at([x0])
    diffs, values, runs = [], [], []
    for n in partitions:
        dt_i = horizon / n
        times = tuple(i * horizon / n for i in range(1, n + 1))
        frozen0 = dt_i * float(source.func(np.array([[x0]]))[0])

        def combined(states, _n=n, _dt=dt_i, _c=frozen0):
            states = np.asarray(states, dtype=float)
            vals = payoff.func(states[..., -1:]) + _c
            for i in range(_n - 1):
                vals = vals + _dt * source.func(states[..., i:i + 1])
            return vals

        xi = CylinderFunctional(
            times, Payoff(combined, n, name=f"frozen-{source.name}-n{n}"), x0)
        run = expectation_run(spec, xi, grid, policy, scheme_constant)
        runs.append(run)
        values.append(run.value)
        diffs.append(abs(run.value - sourced))
    return FrozenSourceResult(
        partitions=tuple(partitions), differences=diffs, values=values,
        sourced_value=sourced, runs=runs,
        noise_floor=max(r.tolerance(1.0, 1e-12) for r in runs),
    )


@dataclass
class FrozenSourceResult:
    partitions: tuple
    differences: list
    values: list
    sourced_value: float
    runs: list
    noise_floor: float

    def non_increasing(self, slack: float = 0.0) -> bool:
        d = self.differences
        return all(d[i + 1] <= d[i] + slack for i in range(len(d) - 1))

    def non_increasing_within_noise(self) -> bool:
        """Monotone up to gaps below the accumulated budget floor."""
        d = self.differences
        return all(
            d[i + 1] <= max(d[i], self.noise_floor)
            for i in range(len(d) - 1)
        )


class LiftedPlaneSpec(GeneratorSpec):
    """Two-coordinate lift of a line generator in z = x + y.

    Members keep their diffusion in the x coordinate only and their drift in
    the y coordinate only, evaluated at z = x + y; martingale and finite-
    variation roles stay separated the way the two-coordinate evolution
    separates them.
    """

    def __init__(self, base: GeneratorSpec):
        if base.dimension != 1:
            raise ValueError("only line generators can be lifted")
        self.base = base
        self.dimension = 2
        if base.dominating is None:
            self.dominating = None
        elif base.dominating is base:
            self.dominating = self
        else:
            self.dominating = LiftedPlaneSpec(base.dominating)

    @property
    def is_sublinear(self):
        return self.base.is_sublinear

    @property
    def control_shape(self):
        return self.base.control_shape

    def member_coeffs(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        z = (xs[:, 0] + xs[:, 1])[:, None]
        a1, b1 = self.base.member_coeffs(z)
        cs = self.base.control_shape
        n = max(a1.shape[len(cs)], b1.shape[len(cs)])
        a = np.zeros(cs + (n, 2, 2))
        b = np.zeros(cs + (n, 2))
        a[..., 0, 0] = np.broadcast_to(a1[..., 0, 0], cs + (n,))
        b[..., 1] = np.broadcast_to(b1[..., 0], cs + (n,))
        return a, b

    def reduce(self, values):
        return self.base.reduce(values)

    def _argreduce(self, vals):
        return self.base._argreduce(vals)


def plane_reduction_crosscheck(
    spec: GeneratorSpec,
    payoff: Payoff,
    horizon: float,
    grid: Grid,
    nx_plane: int = 81,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ResidualReport:
    """Solve in z on the line and in (x, y) on the plane; compare on z = x + y.

    The plane solution with initial data phi(x + y) must coincide with the
    line solution evaluated at x + y.
    """
    from .solver import TRUST_SIGMAS

    line = solve_cauchy(spec, payoff, horizon, grid)
    lifted = LiftedPlaneSpec(spec)
    max_tr_a, max_b = spec.coefficient_bounds(grid.states())
    margin = TRUST_SIGMAS * np.sqrt(max_tr_a * horizon) + max_b * horizon
    center = 0.5 * float(grid.hi[0] + grid.lo[0])
    plane_grid = Grid.centered(margin + 1.5, nx_plane, d=2,
                               center=[center / 2.0, center / 2.0])

    def phi_xy(states):
        z = np.asarray(states)[..., 0] + np.asarray(states)[..., 1]
        return payoff.func(z[..., None])

    plane = solve_cauchy(lifted, Payoff(phi_xy, 2, name=f"{payoff.name}(x+y)"),
                         horizon, plane_grid)
    mask = trusted_mask(lifted, plane_grid, horizon)
    xs = plane_grid.states()
    z = (xs[:, 0] + xs[:, 1]).reshape(plane_grid.shape)
    # restrict to where z = x + y also sits in the line solve's trusted window
    mask = mask & (np.abs(z - center) <= max(
        float(grid.hi[0] - center) - margin, 0.0))
    if not mask.any():
        raise ValueError("no overlap between plane window and line window")
    line_vals = np.interp(z.ravel(), grid.axes[0], line.field.values).reshape(z.shape)
    residual = float(np.max(np.abs(plane.field.values - line_vals)[mask]))
    budget = scheme_constant * (
        float(np.min(grid.dx)) + line.dt
        + float(np.min(plane_grid.dx)) + plane.dt
    )
    return ResidualReport(
        name=f"plane-reduction[{payoff.name}]",
        residual=residual,
        tolerance=max(1e-9, 3.0 * budget),
        params={"nx_line": grid.nx, "nx_plane": plane_grid.nx,
                "window_nodes": int(mask.sum())},
        details={"dt_line": line.dt, "dt_plane": plane.dt},
    )
