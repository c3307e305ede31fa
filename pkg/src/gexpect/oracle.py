"""Monte Carlo lower bounds for sublinear expectations.

A sublinear expectation over a finite control set is a sup of classical
expectations: freezing any measurable control selection yields one ordinary
diffusion whose sample mean is (up to confidence width) a lower bound for
the sup.  The oracle simulates Euler paths for a family of piecewise-
constant and threshold-feedback selections and keeps the best estimate.
Values can only be trusted one-sidedly: enlarging the family never lowers
the bound, and no completeness claim is made about any finite family.

Randomness uses counter-based Philox streams keyed by the recorded seed
(policies get distinct subkeys), and reductions are fixed-order numpy
pairwise sums, so estimates reproduce bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .expectation import CylinderFunctional
from .generators import SublinearSpec
from .reporting import ResidualReport


@dataclass(frozen=True)
class Policy:
    """Control selection: piecewise constant in time, optional state feedback.

    ``members[i]`` applies on the i-th interval delimited by ``switch_times``.
    When ``feedback`` is set to (edges, indices) the member is re-selected
    each step from the first state coordinate: index ``indices[k]`` applies
    when the coordinate falls in the k-th bin of ``edges``.
    """

    members: tuple = (0,)
    switch_times: tuple = ()
    feedback: Optional[tuple] = None
    label: str = ""

    def __post_init__(self):
        if len(self.members) != len(self.switch_times) + 1:
            raise ValueError("need one member per time interval")
        if any(b <= a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise ValueError("switch times must increase")

    def name(self) -> str:
        if self.label:
            return self.label
        if self.feedback is not None:
            return f"feedback{self.feedback[1]}@{list(self.feedback[0])}"
        if not self.switch_times:
            return f"const[{self.members[0]}]"
        return f"switch{list(self.members)}@{list(self.switch_times)}"

    def member_at(self, t: float) -> int:
        i = int(np.searchsorted(np.asarray(self.switch_times), t, side="right"))
        return self.members[i]


@dataclass
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    policy: str = ""

    def ci(self, k: float = 3.0) -> float:
        return k * self.std_error

    def __repr__(self):
        return (f"McEstimate({self.mean:.6f} +- {self.std_error:.2e}, "
                f"n={self.n_paths}, policy={self.policy or '-'})")


def _member_arrays(spec: SublinearSpec):
    roots, drifts = [], []
    for pt in spec.points:
        w, v = np.linalg.eigh(pt.a)
        if w.min() < -1e-12:
            raise ValueError("control point diffusion is not PSD")
        roots.append(v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T)
        drifts.append(pt.b)
    return np.stack(roots), np.stack(drifts)


def simulate(
    spec: SublinearSpec,
    policy: Policy,
    xi: CylinderFunctional,
    dt: float = 0.01,
    n_paths: int = 10_000,
    seed: int = 0,
) -> McEstimate:
    """Sample mean of the payoff under one frozen control selection.

    Steps are sized so every pinned time is hit exactly; within an interval
    the Euler step uses the policy's member (re-selected per state when the
    policy is feedback).
    """
    if not isinstance(spec, SublinearSpec):
        raise ValueError("the oracle needs a finite sublinear control set")
    if max(policy.members) >= len(spec.points):
        raise ValueError("policy references a member outside the control set")
    roots, drifts = _member_arrays(spec)
    d = spec.dimension
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    z = np.full((n_paths, d), float(xi.x0))
    pinned = []
    t = 0.0
    for t_next in xi.times:
        n = max(1, int(np.ceil((t_next - t) / dt - 1e-12)))
        h = (t_next - t) / n
        for k in range(n):
            if policy.feedback is not None:
                edges, indices = policy.feedback
                idx = np.take(np.asarray(indices),
                              np.digitize(z[:, 0], np.asarray(edges)))
            else:
                idx = np.full(n_paths, policy.member_at(t + k * h))
            dw = rng.normal(0.0, np.sqrt(h), size=(n_paths, d))
            z = z + drifts[idx] * h + np.einsum("nij,nj->ni", roots[idx], dw)
        pinned.append(z.copy())
        t = t_next
    states = np.concatenate(pinned, axis=1)       # (n_paths, N*d)
    vals = np.asarray(xi.payoff.func(states), dtype=float)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return McEstimate(mean=mean, std_error=se, n_paths=n_paths, seed=seed,
                      policy=policy.name())


def constant_policies(spec: SublinearSpec) -> list:
    return [Policy(members=(k,), label=f"const[{k}]")
            for k in range(len(spec.points))]


def default_policy_family(spec: SublinearSpec, horizon: float) -> list:
    """Constants, mid-horizon single switches, and sign-threshold feedback."""
    fam = constant_policies(spec)
    k_count = len(spec.points)
    half = 0.5 * horizon
    for i in range(k_count):
        for j in range(k_count):
            if i != j:
                fam.append(Policy(members=(i, j), switch_times=(half,)))
    if k_count >= 2:
        fam.append(Policy(members=(0,), feedback=((0.0,), (0, 1))))
        fam.append(Policy(members=(0,), feedback=((0.0,), (1, 0))))
    return fam


@dataclass
class LowerBoundResult:
    best: McEstimate
    table: list                           # [(policy name, McEstimate)]
    seed: int

    def line(self) -> str:
        return (f"lower bound {self.best.mean:.6f} +- {self.best.std_error:.2e} "
                f"via {self.best.policy} over {len(self.table)} policies")


def lower_bound(
    spec: SublinearSpec,
    xi: CylinderFunctional,
    policies: Optional[Sequence[Policy]] = None,
    dt: float = 0.01,
    n_paths: int = 10_000,
    seed: int = 0,
) -> LowerBoundResult:
    """Best sample mean across the policy family; one-sided by construction."""
    if policies is None:
        policies = default_policy_family(spec, max(xi.times))
    table = []
    for i, pol in enumerate(policies):
        sub = int(np.uint64(seed) ^ np.uint64(0x9E3779B97F4A7C15 * (i + 1) % 2**64))
        table.append((pol.name(), simulate(spec, pol, xi, dt, n_paths, sub)))
    best = max(table, key=lambda kv: kv[1].mean)[1]
    return LowerBoundResult(best=best, table=table, seed=seed)


def bound_report(
    result: LowerBoundResult,
    pde_value: float,
    scheme_budget: float,
    name: str = "mc-lower-bound",
) -> ResidualReport:
    """Check the one-sided consistency: bound <= PDE value + 3 se + budget."""
    excess = result.best.mean - pde_value - result.best.ci(3.0) - scheme_budget
    return ResidualReport(
        name=name,
        residual=excess,
        tolerance=0.0,
        params={"n_paths": result.best.n_paths, "seed": result.seed,
                "policies": len(result.table)},
        details={"mc": result.best.mean, "pde": pde_value,
                 "se": result.best.std_error, "budget": scheme_budget,
                 "best_policy": result.best.policy},
    )
