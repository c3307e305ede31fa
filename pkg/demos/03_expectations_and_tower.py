"""From PDE semigroup to nonlinear expectation, and why sources break it.

A cylinder functional pins the path at finitely many times; its expectation
comes from solving the Cauchy problem backwards through the pinned times.
This script evaluates second moments and squared increments, reads off a
conditional value as a function of the earlier state, verifies the tower
property along two evaluation routes, and replays the closed-form
counterexample showing that a zero-order source makes the whole
construction depend on which times were pinned.
"""

from gexpect import (
    CylinderFunctional,
    Grid,
    Payoff,
    conditional,
    expectation_run,
    gheat_spec,
    time_inconsistency_demo,
    tower_residual,
)

g = gheat_spec(0.25, 1.0)
grid = Grid([-10.0], [10.0], 401)

# the terminal second moment picks the upper variance: E[X_1^2] = 1
xi = CylinderFunctional((1.0,), Payoff.from_expr("x0^2", 1), x0=0.0)
run = expectation_run(g, xi, grid)
print(f"E[X_1^2]           = {run.value:.12f}")

# squared increments see only the elapsed time
xi2 = CylinderFunctional((0.25, 0.75), Payoff.from_expr("(x1 - x0)^2", 2), 0.0)
run2 = expectation_run(g, xi2, grid)
print(f"E[(X_.75-X_.25)^2] = {run2.value:.12f}   "
      f"(budgets: scheme {run2.scheme_budget:.1e}, interp {run2.interp_budget:.1e})")

# conditioning at an inserted time recovers the running solution x^2 + s
cond = conditional(g, xi.with_inserted_time(0.5), 0.5, grid)
mid = len(cond.axes[0]) // 2
print(f"conditional value at X_.5 = 0: {cond.tensor[mid]:.6f}  (closed form 0.5)")

# tower property: direct evaluation vs conditioning first
rep = tower_residual(g, xi2, 0.25, grid)
print(rep.line())
xi3 = CylinderFunctional((0.3, 0.6, 0.9),
                         Payoff.from_expr("(x2 - x1)^2 + x0^2", 3), 0.0)
rep3 = tower_residual(g, xi3, 0.6, Grid([-8.0], [8.0], 161))
print(rep3.line())

# the closed-form failure: under d/dt u = u'' + x the "expectation" of the
# constant c depends on the pinned times through t2 * x0
demo = time_inconsistency_demo(t1=0.5, t2=1.0, c=1.0, x0=2.0)
print(f"\nbare constant:        {demo.constant_value}")
print(f"pinned at (0.5, 1.0): {demo.recursed_value}")
print(f"mismatch:             {demo.mismatch}  (= t2 * x0 = {demo.predicted_mismatch})")
