"""Nonlinear expectations on cylinder functionals via backward recursion.

A cylinder functional pins the path at finitely many times,
``xi = phi0(X_{t1}, ..., X_{tN})`` with ``0 < t1 < ... < tN``.  Its
expectation is built backwards: solve the Cauchy problem in the last
coordinate over ``[t_{N-1}, t_N]`` for every retained prefix, evaluate the
solution on the diagonal, and repeat until a scalar remains at the start
state.  Conditional values are the intermediate stage tensors and exist only
at the cylinder times; conditioning anywhere else means inserting that time
with a coordinate-ignoring payoff first.

Retained coordinates live either on the full solver lattice (exact diagonal
evaluation, no interpolation, batch cost ``nx`` per retained axis) or on a
coarser sublattice with multilinear interpolation back to the solver grid
(the documented default when the batch would not fit the cost budget).  Every
run reports the scheme and interpolation budgets it accumulated, so property
checks can state their tolerances as multiples of those budgets.

This construction hinges on the evolution having no zero-order source: a
source makes the recursion's value depend on which times were inserted.
:func:`time_inconsistency_demo` reproduces that failure in closed form for
the linear heat equation with source ``x``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .generators import GeneratorSpec
from .grids import Field, Grid, Payoff
from .reporting import ResidualReport
from .solver import (
    DEFAULT_SCHEME_CONSTANT,
    cfl_timestep,
    evolve,
    solve_cauchy,
)

MAX_CYLINDER_TIMES = 3


@dataclass(frozen=True)
class CylinderFunctional:
    """phi0(X_{t1}, ..., X_{tN}) started from x0 (d = 1 state)."""

    times: tuple
    payoff: Payoff
    x0: float = 0.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if len(times) < 1 or len(times) > MAX_CYLINDER_TIMES:
            raise ValueError(f"need 1..{MAX_CYLINDER_TIMES} cylinder times")
        if times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("cylinder times must satisfy 0 < t1 < ... < tN")
        if self.payoff.dimension != len(times):
            raise ValueError(
                f"payoff takes {self.payoff.dimension} arguments, "
                f"{len(times)} times given"
            )

    @property
    def n_times(self) -> int:
        return len(self.times)

    def with_inserted_time(self, t_new: float) -> "CylinderFunctional":
        """Insert a pinned time whose coordinate the payoff ignores."""
        if t_new <= 0 or t_new in self.times:
            raise ValueError("inserted time must be positive and new")
        if self.n_times + 1 > MAX_CYLINDER_TIMES:
            raise ValueError("cylinder time budget exceeded")
        times = sorted(self.times + (t_new,))
        k = times.index(t_new)
        keep = [i for i in range(len(times)) if i != k]
        func = self.payoff.func

        def wrapped(states, _keep=tuple(keep), _f=func):
            return _f(np.asarray(states)[..., _keep])

        payoff = Payoff(wrapped, len(times),
                        growth_degree=self.payoff.growth_degree,
                        name=f"{self.payoff.name} [ignores t={t_new}]")
        return CylinderFunctional(tuple(times), payoff, self.x0)


@dataclass
class PrefixPolicy:
    """How retained coordinates are gridded.

    ``auto`` keeps retained axes on the solver lattice until the stage batch
    would exceed ``max_batch`` nodes, then coarsens the latest axes to the
    ``n_prefix`` sublattice; ``coarse`` always uses the sublattice;
    ``lattice`` always uses the full grid and refuses oversized batches.
    """

    n_prefix: int = 41
    max_batch: int = 20000
    mode: str = "auto"

    def __post_init__(self):
        if self.mode not in ("auto", "coarse", "lattice"):
            raise ValueError(f"unknown prefix mode {self.mode!r}")
        if self.n_prefix < 5:
            raise ValueError("prefix grids need at least 5 nodes")


@dataclass
class _Axis:
    nodes: np.ndarray
    idx_in_solver: np.ndarray        # positions of the nodes in the solver axis
    coarse: bool


def _sublattice(grid: Grid, n_prefix: int) -> _Axis:
    n = grid.nx[0]
    stride = max(1, round((n - 1) / (n_prefix - 1)))
    while (n - 1) % stride != 0:
        stride -= 1
    idx = np.arange(0, n, stride)
    return _Axis(grid.axes[0][idx], idx, coarse=stride > 1)


def _full_axis(grid: Grid) -> _Axis:
    return _Axis(grid.axes[0], np.arange(grid.nx[0]), coarse=False)


def _plan_axes(grid: Grid, n_retained: int, policy: PrefixPolicy):
    """Retained-axis grids for coordinates x1..x_{n_retained}."""
    if n_retained == 0:
        return []
    full = _full_axis(grid)
    coarse = _sublattice(grid, policy.n_prefix)
    if policy.mode == "coarse":
        return [coarse] * n_retained
    axes = [full] * n_retained

    def worst_batch(axs):
        return max(
            int(np.prod([len(a.nodes) for a in axs[:j]], initial=1))
            for j in range(1, n_retained + 1)
        )

    if policy.mode == "lattice":
        if worst_batch(axes) > policy.max_batch:
            raise ValueError(
                f"lattice prefix mode needs batch {worst_batch(axes)} "
                f"> max_batch {policy.max_batch}"
            )
        return axes
    for j in range(n_retained - 1, -1, -1):
        if worst_batch(axes) <= policy.max_batch:
            break
        axes[j] = coarse
    if worst_batch(axes) > policy.max_batch:
        raise ValueError("cylinder recursion exceeds the batch budget even coarsened")
    return axes


@dataclass
class ConditionalValue:
    """Stage tensor: the conditional expectation at a cylinder time.

    ``tensor[i1, ..., ij]`` is the value given X_{t1} = axes[0][i1], ...,
    X_{tj} = axes[j-1][ij]; at j = 0 it degenerates to a scalar.  Between
    nodes the tensor is read by multilinear interpolation.
    """

    conditioning_time: float
    retained_times: tuple
    axes: list
    tensor: np.ndarray
    x0: float
    scheme_budget: float
    interp_budget: float
    interpolation: str = "multilinear"

    def as_payoff(self, name: Optional[str] = None) -> Payoff:
        axes = [np.asarray(a, dtype=float) for a in self.axes]
        tensor = self.tensor

        def func(states):
            states = np.atleast_2d(np.asarray(states, dtype=float))
            return _multilinear(axes, tensor, states)

        return Payoff(func, len(axes),
                      name=name or f"conditional@{self.conditioning_time}")

    def at(self, prefix) -> float:
        prefix = np.atleast_1d(np.asarray(prefix, dtype=float))
        return float(_multilinear(
            [np.asarray(a) for a in self.axes], self.tensor, prefix[None, :])[0])


def _multilinear(axes, tensor, points):
    """Multilinear interpolation of ``tensor`` over ``axes`` at ``points`` (m, j)."""
    j = len(axes)
    locs, wts = [], []
    for i in range(j):
        a = axes[i]
        h = a[1] - a[0]
        t = np.clip((points[:, i] - a[0]) / h, 0.0, len(a) - 1.0)
        i0 = np.minimum(t.astype(int), len(a) - 2)
        locs.append(i0)
        wts.append(t - i0)
    out = np.zeros(points.shape[0])
    for corner in itertools.product((0, 1), repeat=j):
        w = np.ones(points.shape[0])
        idx = []
        for i, c in enumerate(corner):
            w = w * (wts[i] if c else 1.0 - wts[i])
            idx.append(locs[i] + c)
        out += w * tensor[tuple(idx)]
    return out


@dataclass
class ExpectationRun:
    """Value plus the error budgets the recursion accumulated."""

    value: float
    scheme_budget: float
    interp_budget: float
    stages: list = field(default_factory=list)

    def tolerance(self, multiplier: float = 3.0, floor: float = 1e-9) -> float:
        return max(floor, multiplier * (self.scheme_budget + self.interp_budget))


class _Recursion:
    def __init__(self, spec: GeneratorSpec, xi: CylinderFunctional, grid: Grid,
                 policy: PrefixPolicy, scheme_constant: float):
        if grid.d != 1 or spec.dimension != 1:
            raise NotImplementedError("cylinder recursion is implemented for d = 1")
        self.spec = spec
        self.xi = xi
        self.grid = grid
        self.policy = policy
        self.C = scheme_constant
        self.dt = cfl_timestep(spec, grid, horizon=max(xi.times))
        self.scheme_budget = 0.0
        self.interp_budget = 0.0
        self.stages = []

    def _evolve(self, values: np.ndarray, horizon: float) -> np.ndarray:
        if horizon <= 0:
            return values
        res = evolve(self.spec, values, horizon, self.grid, dt=self.dt)
        self.scheme_budget += self.C * (float(self.grid.dx[0]) + res.dt)
        self.stages.append({"horizon": horizon, "dt": res.dt, "batch": values.shape[:-1]})
        return res.field.values

    def _resample_last(self, tensor: np.ndarray, axis: _Axis) -> np.ndarray:
        """Stage tensor, last axis from ``axis.nodes`` onto the solver axis."""
        if not axis.coarse:
            return tensor
        nodes = axis.nodes
        h = nodes[1] - nodes[0]
        if tensor.shape[-1] >= 3:
            curv = np.max(np.abs(np.diff(tensor, 2, axis=-1))) / (h * h)
            self.interp_budget += curv * h * h / 8.0
        t = (self.grid.axes[0] - nodes[0]) / h
        t = np.clip(t, 0.0, len(nodes) - 1.0)
        i0 = np.minimum(t.astype(int), len(nodes) - 2)
        w = t - i0
        return tensor[..., i0] * (1.0 - w) + tensor[..., i0 + 1] * w

    def run(self, stop_at: int):
        """Run stages until ``stop_at`` retained coordinates remain.

        Returns the tensor over the first ``stop_at`` retained axes (a scalar
        for ``stop_at = 0``).
        """
        xi, grid = self.xi, self.grid
        N = xi.n_times
        axes = _plan_axes(grid, N - 1, self.policy)

        # innermost stage: evolve the last coordinate on the solver grid
        mesh = np.meshgrid(*[a.nodes for a in axes], grid.axes[0], indexing="ij")
        states = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        tensor = np.asarray(xi.payoff.func(states), dtype=float)
        tensor = tensor.reshape([len(a.nodes) for a in axes] + [grid.nx[0]])
        del mesh, states

        spans = [xi.times[0]] + [b - a for a, b in zip(xi.times, xi.times[1:])]
        for j in range(N - 1, stop_at - 1, -1):
            # tensor axes: retained x1..xj, then the solver axis for x_{j+1}
            flat = tensor.reshape(-1, grid.nx[0])
            flat = self._evolve(flat, spans[j])
            tensor = flat.reshape(tensor.shape)
            if j == 0:
                return float(grid.interpolate(tensor[..., :], np.array([[xi.x0]]))[0])
            # diagonal: evaluate the solved field at x_{j+1} = x_j
            take = axes[j - 1].idx_in_solver.reshape(
                (1,) * (j - 1) + (len(axes[j - 1].nodes), 1))
            tensor = np.take_along_axis(tensor, take, axis=-1)[..., 0]
            if j > stop_at:
                tensor = self._resample_last(tensor, axes[j - 1])
        return tensor, axes[:stop_at]


def semigroup_apply(spec: GeneratorSpec, payoff: Payoff, h: float,
                    grid: Grid) -> Field:
    """One application of the solution operator; h = 0 is the identity."""
    if h < 0:
        raise ValueError("duration must be non-negative")
    if h == 0.0:
        return Field(grid, payoff.sample(grid), t=0.0)
    return solve_cauchy(spec, payoff, h, grid).field


def expectation_run(
    spec: GeneratorSpec,
    xi: CylinderFunctional,
    grid: Grid,
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ExpectationRun:
    """Full backward recursion with budget accounting."""
    rec = _Recursion(spec, xi, grid, policy, scheme_constant)
    value = rec.run(stop_at=0)
    return ExpectationRun(value=value, scheme_budget=rec.scheme_budget,
                          interp_budget=rec.interp_budget, stages=rec.stages)


def expectation(
    spec: GeneratorSpec,
    xi: CylinderFunctional,
    grid: Grid,
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> float:
    """The nonlinear expectation of a cylinder functional."""
    return expectation_run(spec, xi, grid, policy, scheme_constant).value


def conditional(
    spec: GeneratorSpec,
    xi: CylinderFunctional,
    t_j: float,
    grid: Grid,
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ConditionalValue:
    """Conditional expectation at a cylinder time (or 0).

    The construction defines conditional values only at the pinned times;
    other times require inserting the time into the cylinder first.
    """
    t_j = float(t_j)
    if t_j == 0.0:
        run = expectation_run(spec, xi, grid, policy, scheme_constant)
        return ConditionalValue(0.0, (), [], np.asarray(run.value), xi.x0,
                                run.scheme_budget, run.interp_budget)
    try:
        j = xi.times.index(t_j) + 1
    except ValueError:
        raise ValueError(
            f"{t_j} is not a cylinder time of {xi.times}; insert it first"
        ) from None
    rec = _Recursion(spec, xi, grid, policy, scheme_constant)
    if j == xi.n_times:
        # conditioning at the last pinned time: the payoff itself, sampled
        axes = _plan_axes(grid, j - 1, policy) + [_full_axis(grid)]
        mesh = np.meshgrid(*[a.nodes for a in axes], indexing="ij")
        states = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        tensor = np.asarray(xi.payoff.func(states), dtype=float)
        tensor = tensor.reshape([len(a.nodes) for a in axes])
    else:
        tensor, axes = rec.run(stop_at=j)
    return ConditionalValue(
        conditioning_time=t_j,
        retained_times=xi.times[:j],
        axes=[a.nodes for a in axes],
        tensor=tensor,
        x0=xi.x0,
        scheme_budget=rec.scheme_budget,
        interp_budget=rec.interp_budget,
    )


def tower_residual(
    spec: GeneratorSpec,
    xi: CylinderFunctional,
    t_mid: float,
    grid: Grid,
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ResidualReport:
    """|E[xi] - E[E_{t_mid}[xi]]| against the accumulated budgets."""
    direct = expectation_run(spec, xi, grid, policy, scheme_constant)
    cond = conditional(spec, xi, t_mid, grid, policy, scheme_constant)
    j = len(cond.retained_times)
    xi_outer = CylinderFunctional(xi.times[:j], cond.as_payoff(), xi.x0)
    outer = expectation_run(spec, xi_outer, grid, policy, scheme_constant)
    residual = abs(direct.value - outer.value)
    budget = (direct.scheme_budget + direct.interp_budget
              + cond.scheme_budget + cond.interp_budget
              + outer.scheme_budget + outer.interp_budget)
    return ResidualReport(
        name=f"tower@{t_mid}",
        residual=residual,
        tolerance=max(1e-9, 3.0 * budget),
        params={"times": xi.times, "t_mid": t_mid, "nx": grid.nx[0],
                "payoff": xi.payoff.name, "mode": policy.mode},
        details={"direct": direct.value, "recursed": outer.value,
                 "scheme_budget": direct.scheme_budget + outer.scheme_budget
                 + cond.scheme_budget,
                 "interp_budget": direct.interp_budget + outer.interp_budget
                 + cond.interp_budget},
    )


def _hinge_payoff(level: float) -> Payoff:
    """max(0, |x| - level): the vanishing tail family for monotone decrease."""
    lvl = float(level)
    return Payoff(
        lambda s: np.maximum(0.0, np.abs(np.asarray(s)[..., 0]) - lvl),
        1, name=f"max(0,|x|-{lvl})",
    )


@dataclass
class PropertyFixtures:
    """Cylinder fixtures for the expectation property suite (d = 1).

    Defaults follow the worked cases: a two-time squared-increment tower
    fixture, quadratic/cosine payoffs for domination and subadditivity, a
    product payoff for the sign-split identity, linear-plus-quadratic for
    the symmetric-linearity check, and the hinge family for monotone
    decrease to zero.
    """

    tower_times: tuple = (0.25, 0.75)
    tower_payoff: str = "(x1 - x0)^2"
    tower_n3_times: tuple = (0.3, 0.6, 0.9)
    tower_n3_payoff: str = "(x2 - x1)^2 + x0^2"
    pair_time: float = 1.0
    payoff_a: str = "x0^2"
    payoff_b: str = "cos(x0)"
    shift: float = 5.0
    alpha: float = 2.0
    signsplit_s: float = 0.5
    signsplit_h: float = 0.5
    signsplit_left: str = "x0"
    signsplit_right: str = "cos(x0)"
    linearity_alpha: float = -2.0
    linearity_time: float = 0.5
    hinge_levels: tuple = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    hinge_time: float = 1.0
    hinge_terminal_bound: float = 1e-3
    x0: float = 0.0


def check_expectation_properties(
    spec: GeneratorSpec,
    grid: Grid,
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
    fixtures: PropertyFixtures = PropertyFixtures(),
    float_slack: float = 1e-9,
) -> ResidualReport:
    """Property suite for the constructed expectation; see module docstring.

    ``spec`` may be any dominated generator; its ``dominating`` member (or
    itself, when sublinear) supplies the sublinear expectation used by the
    domination, subadditivity, sign-split, and symmetric-linearity parts.
    Exact-at-scheme-level parts (monotonicity, constant shift, homogeneity,
    subadditivity, monotone decrease) are held to float slack; dual-route
    parts are held to three times the accumulated scheme plus interpolation
    budgets.
    """
    from .reporting import combine_reports

    fx = fixtures
    sub = spec if spec.is_sublinear else spec.dominating
    if sub is None or not sub.is_sublinear:
        raise ValueError("need a sublinear dominating generator for the suite")
    parts = []

    def ev(s, payoff, times) -> ExpectationRun:
        xi = CylinderFunctional(times, payoff, fx.x0)
        return expectation_run(s, xi, grid, policy, scheme_constant)

    pa = Payoff.from_expr(fx.payoff_a, 1)
    pb = Payoff.from_expr(fx.payoff_b, 1)
    t1 = (fx.pair_time,)

    # (II) monotonicity on an ordered payoff pair
    lo = ev(spec, Payoff.from_expr(f"{fx.payoff_a} - 1", 1), t1).value
    hi = ev(spec, pa, t1).value
    parts.append(ResidualReport("monotonicity", lo - hi, float_slack))

    # (III) constant preserving / shift
    base = ev(spec, pa, t1)
    shifted = ev(spec, pa + fx.shift, t1)
    parts.append(ResidualReport(
        "constant-shift", abs(shifted.value - base.value - fx.shift), float_slack))

    # (VII special case) positive homogeneity of the value
    scaled = ev(spec, pa.scaled(fx.alpha), t1)
    parts.append(ResidualReport(
        "positive-homogeneity", abs(scaled.value - fx.alpha * base.value),
        float_slack))

    # (IV) tower at both depths
    xi2 = CylinderFunctional(fx.tower_times, Payoff.from_expr(fx.tower_payoff, 2),
                             fx.x0)
    parts.append(tower_residual(spec, xi2, fx.tower_times[0], grid, policy,
                                scheme_constant))
    xi3 = CylinderFunctional(fx.tower_n3_times,
                             Payoff.from_expr(fx.tower_n3_payoff, 3), fx.x0)
    for t_mid in fx.tower_n3_times[:2]:
        parts.append(tower_residual(spec, xi3, t_mid, grid, policy,
                                    scheme_constant))
    # inserted-time invariance: pinning an ignored coordinate changes nothing
    xi_ins = CylinderFunctional(t1, pa, fx.x0).with_inserted_time(fx.pair_time / 2)
    ins = ev(spec, xi_ins.payoff, xi_ins.times)
    parts.append(ResidualReport(
        "inserted-time", abs(ins.value - base.value),
        max(1e-9, 3.0 * (base.tolerance(1.0, 0.0) + ins.tolerance(1.0, 0.0)))))

    # (V) domination of the pair by the sublinear expectation
    ea = ev(spec, pa, t1)
    eb = ev(spec, pb, t1)
    ed = ev(sub, pa.minus(pb), t1)
    tol = max(1e-9, 3.0 * sum(r.tolerance(1.0, 0.0) for r in (ea, eb, ed)))
    parts.append(ResidualReport(
        "domination", ea.value - eb.value - ed.value, tol,
        details={"lhs": ea.value - eb.value, "rhs": ed.value}))

    # (VI) subadditivity of the sublinear expectation (shared pinned time)
    s_ab = ev(sub, Payoff.from_expr(f"{fx.payoff_a} + {fx.payoff_b}", 1), t1)
    s_a = ev(sub, pa, t1)
    s_b = ev(sub, pb, t1)
    parts.append(ResidualReport(
        "subadditivity", s_ab.value - s_a.value - s_b.value, float_slack))

    # (VII) sign-split of a factor known at the conditioning time
    parts.append(sign_split_residual(
        sub, fx.signsplit_left, fx.signsplit_right, fx.signsplit_s,
        fx.signsplit_h, grid, fx.x0, policy, scheme_constant))

    # symmetric linearity: E[a xi + eta] = a E[xi] + E[eta] for symmetric xi
    # precondition of the linearity property: E[xi] = -E[-xi]
    tl = (fx.linearity_time,)
    sym_plus = ev(sub, Payoff.from_expr("x0", 1), tl).value
    sym_minus = ev(sub, Payoff.from_expr("-x0", 1), tl).value
    parts.append(ResidualReport(
        "symmetric-payoff", abs(sym_plus + sym_minus), float_slack,
        details={"E[X]": sym_plus, "E[-X]": sym_minus}))
    al = fx.linearity_alpha
    from .expressions import parse
    combo = ev(spec, Payoff.from_expr(parse(f"x0^2 + ({al})*x0"), 1), tl)
    eta_only = ev(spec, Payoff.from_expr("x0^2", 1), tl)
    lin_res = abs(combo.value - (al * sym_plus + eta_only.value))
    parts.append(ResidualReport(
        "symmetric-linearity", lin_res,
        max(1e-9, 3.0 * (combo.tolerance(1.0, 0.0)
                         + eta_only.tolerance(1.0, 0.0)))))

    # monotone decrease to zero along the hinge family
    vals = [ev(spec, _hinge_payoff(lvl), (fx.hinge_time,)).value
            for lvl in fx.hinge_levels]
    worst_increase = max(
        (vals[i + 1] - vals[i] for i in range(len(vals) - 1)), default=0.0)
    parts.append(ResidualReport(
        "monotone-decrease", max(worst_increase, 0.0), float_slack,
        details={"values": vals}))
    parts.append(ResidualReport(
        "vanishing-tail", vals[-1], fx.hinge_terminal_bound,
        params={"level": fx.hinge_levels[-1]}))

    report = combine_reports("expectation-properties", parts)
    report.params.update({"nx": grid.nx[0], "mode": policy.mode, "x0": fx.x0})
    return report


def sign_split_residual(
    sub: GeneratorSpec,
    left_payoff: str,
    right_payoff: str,
    s: float,
    h: float,
    grid: Grid,
    x0: float = 0.0,
    policy: PrefixPolicy = PrefixPolicy(),
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ResidualReport:
    """E_s[xi eta] = xi+ E_s[eta] + xi- E_s[-eta] on the trusted window.

    xi is pinned at s, eta at s + h; the left side is the conditional stage
    tensor of the product payoff, the right side is assembled from two plain
    solves split by the sign of xi.
    """
    from .expressions import parse
    from .solver import trusted_mask

    if not sub.is_sublinear:
        raise ValueError("the sign-split identity needs a sublinear expectation")
    lhs_payoff = Payoff.from_expr(
        parse(left_payoff) * _shift_vars(right_payoff), 2,
        name=f"({left_payoff})*({right_payoff} at +h)")
    xi = CylinderFunctional((s, s + h), lhs_payoff, x0)
    cond = conditional(sub, xi, s, grid, policy, scheme_constant)

    axis = np.asarray(cond.axes[0])
    states = axis[:, None]
    left = Payoff.from_expr(left_payoff, 1).func(states)
    u_plus = semigroup_apply(sub, Payoff.from_expr(right_payoff, 1), h, grid).values
    u_minus = semigroup_apply(
        sub, Payoff.from_expr(f"-({right_payoff})", 1), h, grid).values
    u_plus = np.interp(axis, grid.axes[0], u_plus)
    u_minus = np.interp(axis, grid.axes[0], u_minus)
    rhs = np.maximum(left, 0.0) * u_plus + np.maximum(-left, 0.0) * u_minus

    mask = trusted_mask(sub, grid, s + h)
    mask = np.interp(axis, grid.axes[0], mask.astype(float)) >= 1.0
    residual = float(np.max(np.abs(cond.tensor - rhs)[mask]))
    budget = cond.scheme_budget + cond.interp_budget + 2 * scheme_constant * (
        float(grid.dx[0]) + cfl_timestep(sub, grid, horizon=h))
    return ResidualReport(
        "sign-split", residual, max(1e-9, 3.0 * budget),
        params={"s": s, "h": h, "window_nodes": int(mask.sum())},
    )


def _shift_vars(text: str):
    """Parse a payoff in x0 and shift its variable to x1."""
    from .expressions import parse, Var, Const, Add, Mul, Neg, Pow, Sin, Cos, Abs

    def shift(e):
        if isinstance(e, Var):
            return Var("x1") if e.name == "x0" else e
        if isinstance(e, Const):
            return e
        if isinstance(e, Add):
            return Add(shift(e.left), shift(e.right))
        if isinstance(e, Mul):
            return Mul(shift(e.left), shift(e.right))
        if isinstance(e, Neg):
            return Neg(shift(e.arg))
        if isinstance(e, Pow):
            return Pow(shift(e.base), e.exponent)
        if isinstance(e, Sin):
            return Sin(shift(e.arg))
        if isinstance(e, Cos):
            return Cos(shift(e.arg))
        if isinstance(e, Abs):
            return Abs(shift(e.arg))
        raise TypeError(f"cannot shift {type(e).__name__}")

    return shift(parse(text))


@dataclass
class InconsistencyDemo:
    """Closed-form failure of the recursion for a sourced linear equation."""

    constant_value: float
    recursed_value: float
    mismatch: float
    predicted_mismatch: float


def time_inconsistency_demo(t1: float, t2: float, c: float,
                            x0: float) -> InconsistencyDemo:
    """Evaluate the constant c two ways under d/dt u = u'' + x.

    Affine data alpha*x + beta evolves in closed form to (alpha + h)*x +
    beta, so the recursion is exact rational arithmetic here: treating c as
    a bare constant gives c, while pinning it at (t1, t2) drags in t2 * x0.
    A well-defined construction would be insensitive to pinned times the
    payoff ignores; the zero-order source x breaks exactly that.
    """
    if not 0 < t1 < t2:
        raise ValueError("need 0 < t1 < t2")
    alpha, beta = 0.0, float(c)          # payoff: constant in x2
    alpha += t2 - t1                      # evolve over [t1, t2]
    alpha += t1                           # evolve over [0, t1]
    recursed = alpha * x0 + beta
    return InconsistencyDemo(
        constant_value=float(c),
        recursed_value=recursed,
        mismatch=recursed - float(c),
        predicted_mismatch=t2 * x0,
    )
