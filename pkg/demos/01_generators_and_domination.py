"""Generators: finite control sets, game orders, and the domination test.

Every operator in this package is a finite extremum of linear operators
1/2 tr[a D^2 u] + <b, Du>.  This script builds the two workhorse examples
(the variance-uncertainty generator and a two-player game with
state-dependent volatility), checks the sublinearity axioms on a seeded
sample, and shows how the pairwise domination inequality separates a game
generator from the product-sup that bounds it.
"""

import numpy as np

from gexpect import (
    IsaacsSpec,
    SamplePlan,
    check_axioms,
    check_domination,
    gheat_spec,
)

# --- the variance-uncertainty generator -----------------------------------
# Two members: diffusion 1.0 and 0.25, no drift.  Its value on a Hessian A
# is (sig_hi2 * A^+ - sig_lo2 * A^-)/2: the worst case over an interval of
# variances.
g = gheat_spec(sig_lo2=0.25, sig_hi2=1.0)
print("value on convex data  (A = +2):", g.evaluate([0.0], [0.0], [[2.0]]))
print("value on concave data (A = -2):", g.evaluate([0.0], [0.0], [[-2.0]]))

plan = SamplePlan(n_samples=10_000, seed=7)
print(check_axioms(g, plan).line())
print("self-domination:", check_domination(g, g, plan).line())

# --- a stochastic game with state-dependent volatility ---------------------
# gamma scales the volatility (maximiser), lam pushes the drift (minimiser).
def sigma(xs, gamma, lam):
    return ((1.0 + 0.1 * np.sin(xs[:, 0])) * gamma)[:, None, None]


def drift(xs, gamma, lam):
    return (0.1 * lam * np.ones(len(xs)))[:, None]


game = IsaacsSpec([0.5, 1.0], [-1.0, 1.0], sigma, drift, dimension=1,
                  order="sup-inf", x_lipschitz=0.2)
product_sup = game.with_order("sup-sup")

# the game value is sandwiched between the two orders of play, exactly,
# because the control sets are finite
xs, ps, _, As, _, _ = plan.draw(1)
lo = game.evaluate_many(xs, ps, As)
hi = game.with_order("inf-sup").evaluate_many(xs, ps, As)
print("sup-inf <= inf-sup everywhere:", bool(np.all(lo <= hi + 1e-12)))

# the product sup dominates the game ...
print("game vs product sup:", check_domination(game, product_sup, plan).line())

# ... but not the other way round: the checker finds a concrete witness
swapped = check_domination(product_sup, game, plan)
print("swapped roles:", swapped.line())
if swapped.witness:
    w = swapped.witness
    print(f"  witness: x={w['x']}, violation={w['violation']:.4f}")
