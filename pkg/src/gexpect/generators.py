"""Finite, evaluable generators for fully nonlinear parabolic operators.

Every generator here is a finite extremum of linear operators

    L_k u = 1/2 tr[a_k(x) D^2 u] + <b_k(x), Du>,

reduced over one control axis (a sup: the sublinear case) or two (a sup-inf
or inf-sup: the game case).  Working with an explicit finite family keeps
evaluation exact, makes positive homogeneity and subadditivity hold by
construction, and lets the finite-difference solver assemble one monotone
one-step operator per member before taking the outer extremum.

Continuum control sets are represented by finite subsets; every downstream
guarantee is relative to that finite representation, which each report
records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .reporting import DominationReport, ResidualReport

PSD_EIG_FLOOR = -1e-12


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class ControlPoint:
    """One linear member: diffusion matrix ``a`` (PSD) and drift vector ``b``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
            raise ValueError(f"inconsistent control point shapes {a.shape}, {b.shape}")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("control point entries must be finite")
        if np.max(np.abs(a - a.T)) > 1e-9 * (1.0 + np.max(np.abs(a))):
            raise ValueError("diffusion matrix must be symmetric")
        a = _sym(a)
        if np.linalg.eigvalsh(a).min() < PSD_EIG_FLOOR:
            raise ValueError("diffusion matrix must be positive semidefinite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dimension(self) -> int:
        return self.b.shape[0]


class GeneratorSpec:
    """Common interface: evaluate, enumerate members, reduce over controls."""

    dimension: int
    is_sublinear: bool = False
    dominating: Optional["GeneratorSpec"] = None

    @property
    def control_shape(self) -> tuple:
        raise NotImplementedError

    def member_coeffs(self, xs: np.ndarray):
        """Coefficients at states ``xs`` of shape (n, d).

        Returns ``(a, b)`` with shapes ``control_shape + (n or 1, d, d)`` and
        ``control_shape + (n or 1, d)``; the node axis may broadcast.
        """
        raise NotImplementedError

    def reduce(self, values: np.ndarray) -> np.ndarray:
        """Apply the outer extremum over the leading control axes."""
        raise NotImplementedError

    def evaluate(self, x, p, A) -> float:
        """Value of the generator at one state, gradient, and Hessian."""
        x, p, A = self._validate(x, p, A)
        vals = self._member_values(x[None], p[None], A[None])
        return float(self.reduce(vals)[0])

    def evaluate_many(self, xs, ps, As) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ps = np.asarray(ps, dtype=float)
        As = _sym(np.asarray(As, dtype=float))
        return self.reduce(self._member_values(xs, ps, As))

    def argext(self, x, p, A) -> tuple:
        """First control index attaining the extremum (deterministic ties)."""
        x, p, A = self._validate(x, p, A)
        vals = self._member_values(x[None], p[None], A[None])[..., 0]
        return self._argreduce(vals)

    def coefficient_bounds(self, xs: np.ndarray) -> tuple:
        """(max trace of a, max l1-norm of b) over members and nodes."""
        a, b = self.member_coeffs(np.atleast_2d(np.asarray(xs, dtype=float)))
        tr = np.trace(a, axis1=-2, axis2=-1)
        return float(np.max(tr)), float(np.max(np.sum(np.abs(b), axis=-1)))

    def lipschitz_constant(self, xs: np.ndarray) -> float:
        """L with |G(x,p,A) - G(x,q,B)| <= L (|p-q| + ||A-B||_F) on the box."""
        a, b = self.member_coeffs(np.atleast_2d(np.asarray(xs, dtype=float)))
        half_a = 0.5 * np.sqrt(np.sum(a * a, axis=(-2, -1)))
        b_norm = np.sqrt(np.sum(b * b, axis=-1))
        return float(max(np.max(half_a), np.max(b_norm)))

    # -- internals ---------------------------------------------------------

    def _member_values(self, xs, ps, As):
        a, b = self.member_coeffs(xs)
        quad = 0.5 * np.einsum("...ij,...ji->...", a, As)
        lin = np.einsum("...i,...i->...", b, ps)
        return quad + lin

    def _argreduce(self, vals: np.ndarray) -> tuple:
        raise NotImplementedError

    def _validate(self, x, p, A):
        d = self.dimension
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if x.shape != (d,) or p.shape != (d,) or A.shape != (d, d):
            raise ValueError(
                f"dimension mismatch: expected d={d}, got x{x.shape} p{p.shape} A{A.shape}"
            )
        if not (np.isfinite(x).all() and np.isfinite(p).all() and np.isfinite(A).all()):
            raise ValueError("non-finite input to generator evaluation")
        return x, p, _sym(A)


class SublinearSpec(GeneratorSpec):
    """Finite sup of linear operators over state-independent control points."""

    is_sublinear = True

    def __init__(self, points: Sequence[ControlPoint], dominating=None):
        points = list(points)
        if not points:
            raise ValueError("control set must be non-empty")
        d = points[0].dimension
        if any(pt.dimension != d for pt in points):
            raise ValueError("control points must share one dimension")
        self.points = points
        self.dimension = d
        self.dominating = dominating
        self._a = np.stack([pt.a for pt in points])[:, None]   # (K, 1, d, d)
        self._b = np.stack([pt.b for pt in points])[:, None]   # (K, 1, d)

    @property
    def control_shape(self):
        return (len(self.points),)

    def member_coeffs(self, xs):
        return self._a, self._b

    def reduce(self, values):
        return np.max(values, axis=0)

    def _argreduce(self, vals):
        return (int(np.argmax(vals)),)

    def __repr__(self):
        return f"SublinearSpec(d={self.dimension}, members={len(self.points)})"


#: signature: (xs of shape (n, d), gamma value, lam value) -> (n, d, d) / (n, d)
CoefficientMap = Callable[[np.ndarray, float, float], np.ndarray]


class IsaacsSpec(GeneratorSpec):
    """Two-player extremum of linear operators with state-dependent maps.

    The gamma list always indexes the maximising player and the lam list the
    minimising player; ``order`` only decides who commits first.  sup-inf is
    max over gamma of min over lam, inf-sup is min over lam of max over
    gamma, so the two values are ordered (sup-inf <= inf-sup) pointwise and
    exactly on the finite sets.  The sup-sup order enumerates the same
    coefficients as a plain sup over the product control set and therefore
    is itself sublinear; it is the natural dominating generator for either
    game order.
    """

    def __init__(
        self,
        gammas: Sequence[float],
        lams: Sequence[float],
        sigma: CoefficientMap,
        drift: CoefficientMap,
        dimension: int,
        order: str = "sup-inf",
        x_lipschitz: float = 0.0,
        dominating=None,
    ):
        if order not in ("sup-inf", "inf-sup", "sup-sup"):
            raise ValueError(f"unknown order {order!r}")
        if len(gammas) == 0 or len(lams) == 0:
            raise ValueError("control index lists must be non-empty")
        self.gammas = list(gammas)
        self.lams = list(lams)
        self.sigma = sigma
        self.drift = drift
        self.dimension = dimension
        self.order = order
        self.x_lipschitz = float(x_lipschitz)
        self.dominating = dominating

    @property
    def is_sublinear(self):
        return self.order == "sup-sup" or (
            self.order in ("sup-inf", "inf-sup") and len(self.lams) == 1
        )

    @property
    def control_shape(self):
        return (len(self.gammas), len(self.lams))

    def member_coeffs(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        n, d = xs.shape
        G, L = self.control_shape
        a = np.empty((G, L, n, d, d))
        b = np.empty((G, L, n, d))
        for i, g in enumerate(self.gammas):
            for j, l in enumerate(self.lams):
                s = np.asarray(self.sigma(xs, g, l), dtype=float).reshape(n, d, d)
                a[i, j] = np.einsum("nik,njk->nij", s, s)
                b[i, j] = np.asarray(self.drift(xs, g, l), dtype=float).reshape(n, d)
        return a, b

    def reduce(self, values):
        if self.order == "sup-inf":
            return np.max(np.min(values, axis=1), axis=0)
        if self.order == "inf-sup":
            return np.min(np.max(values, axis=0), axis=0)
        return np.max(np.max(values, axis=1), axis=0)

    def _argreduce(self, vals):
        if self.order == "sup-inf":
            inner = np.min(vals, axis=1)
            i = int(np.argmax(inner))
            return (i, int(np.argmin(vals[i])))
        if self.order == "inf-sup":
            inner = np.max(vals, axis=0)
            j = int(np.argmin(inner))
            return (int(np.argmax(vals[:, j])), j)
        flat = int(np.argmax(vals))
        return tuple(int(v) for v in np.unravel_index(flat, vals.shape))

    def with_order(self, order: str) -> "IsaacsSpec":
        return IsaacsSpec(
            self.gammas, self.lams, self.sigma, self.drift,
            self.dimension, order=order, x_lipschitz=self.x_lipschitz,
        )

    def __repr__(self):
        return (
            f"IsaacsSpec(d={self.dimension}, {self.order}, "
            f"|gamma|={len(self.gammas)}, |lam|={len(self.lams)})"
        )


def gheat_spec(sig_lo2: float = 0.25, sig_hi2: float = 1.0) -> SublinearSpec:
    """One-dimensional variance-uncertainty generator max(a*A, a_lo*A)/2.

    Members carry the extreme variances only; the finite sup over the two of
    them reproduces the positive/negative-part form
    (sig_hi2 * A^+ - sig_lo2 * A^-) / 2 exactly.
    """
    if not 0 <= sig_lo2 <= sig_hi2:
        raise ValueError("need 0 <= sig_lo2 <= sig_hi2")
    pts = [ControlPoint(np.array([[sig_hi2]]), np.zeros(1)),
           ControlPoint(np.array([[sig_lo2]]), np.zeros(1))]
    spec = SublinearSpec(pts)
    spec.dominating = spec
    return spec


def singleton_spec(a, b) -> SublinearSpec:
    """Classical linear generator: a single control point."""
    spec = SublinearSpec([ControlPoint(np.atleast_2d(a), np.atleast_1d(b))])
    spec.dominating = spec
    return spec


@dataclass
class SamplePlan:
    """Seeded sampling plan for the pointwise generator checks.

    States are drawn from ``[-x_radius, x_radius]^d``, gradients from
    ``[-p_scale, p_scale]^d``, Hessians are symmetrised matrices with entries
    in ``[-a_scale, a_scale]``.
    """

    n_samples: int = 256
    seed: int = 0
    x_radius: float = 5.0
    p_scale: float = 2.0
    a_scale: float = 2.0

    def draw(self, d: int):
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        n = self.n_samples
        xs = rng.uniform(-self.x_radius, self.x_radius, size=(n, d))
        ps = rng.uniform(-self.p_scale, self.p_scale, size=(n, d))
        qs = rng.uniform(-self.p_scale, self.p_scale, size=(n, d))
        As = _sym(rng.uniform(-self.a_scale, self.a_scale, size=(n, d, d)))
        Bs = _sym(rng.uniform(-self.a_scale, self.a_scale, size=(n, d, d)))
        betas = rng.uniform(0.0, 3.0, size=n)
        return xs, ps, qs, As, Bs, betas


def check_domination(
    g_tilde: GeneratorSpec,
    g: GeneratorSpec,
    plan: SamplePlan = SamplePlan(),
    tolerance: float = 1e-9,
) -> DominationReport:
    """Sample the pairwise inequality Gt(x,p,A) - Gt(x,q,B) <= G(x,p-q,A-B).

    A candidate dominator that is not sublinear is still evaluated (that is
    how a swapped pair is shown to fail); the report records the flag.
    """
    if g_tilde.dimension != g.dimension:
        raise ValueError("dimension mismatch between the two generators")
    xs, ps, qs, As, Bs, _ = plan.draw(g_tilde.dimension)
    lhs = g_tilde.evaluate_many(xs, ps, As) - g_tilde.evaluate_many(xs, qs, Bs)
    rhs = g.evaluate_many(xs, ps - qs, As - Bs)
    viol = lhs - rhs
    worst = int(np.argmax(viol))
    witness = None
    if viol[worst] > tolerance:
        witness = {
            "x": xs[worst], "p": ps[worst], "A": As[worst],
            "p_prime": qs[worst], "A_prime": Bs[worst],
            "violation": float(viol[worst]),
        }
    if witness is not None:
        witness["dominator_sublinear"] = g.is_sublinear
    return DominationReport(
        samples=plan.n_samples,
        worst_violation=float(viol[worst]),
        tolerance=tolerance,
        seed=plan.seed,
        witness=witness,
    )


def check_axioms(
    spec: GeneratorSpec,
    plan: SamplePlan = SamplePlan(),
    tolerance: float = 1e-9,
) -> ResidualReport:
    """Verify sublinearity axioms pointwise on a seeded sample.

    Checks subadditivity and positive homogeneity in (p, A), monotonicity in
    the Hessian argument, the beta = 0 degenerate case G(x,0,0) = 0, and the
    empirical Lipschitz quotient against the constant the members imply.
    """
    if not spec.is_sublinear:
        raise ValueError("axiom check applies to sublinear generators only")
    d = spec.dimension
    xs, ps, qs, As, Bs, betas = plan.draw(d)
    scale = max(plan.p_scale, plan.a_scale)
    slack = tolerance * max(1.0, scale)

    g_p_A = spec.evaluate_many(xs, ps, As)
    g_q_B = spec.evaluate_many(xs, qs, Bs)

    sub = spec.evaluate_many(xs, ps + qs, As + Bs) - (g_p_A + g_q_B)
    hom = np.abs(
        spec.evaluate_many(xs, betas[:, None] * ps, betas[:, None, None] * As)
        - betas * g_p_A
    )
    zero = abs(spec.evaluate(xs[0], np.zeros(d), np.zeros((d, d))))
    psd = np.einsum("nij,nkj->nik", Bs, Bs)          # B B^T >= 0
    mono = g_p_A - spec.evaluate_many(xs, ps, As + psd)

    L = spec.lipschitz_constant(xs)
    gaps = np.abs(g_p_A - g_q_B)
    dist = np.sqrt(np.sum((ps - qs) ** 2, axis=-1)) + np.sqrt(
        np.sum((As - Bs) ** 2, axis=(-2, -1))
    )
    lip = gaps - L * dist

    residual = max(
        float(np.max(sub)), float(np.max(hom)), zero,
        float(np.max(mono)), float(np.max(lip)),
    )
    return ResidualReport(
        name="generator-axioms",
        residual=residual,
        tolerance=slack,
        params={"samples": plan.n_samples, "seed": plan.seed, "lipschitz": L},
        details={
            "subadditivity": float(np.max(sub)),
            "homogeneity": float(np.max(hom)),
            "zero_at_origin": zero,
            "monotonicity": float(np.max(mono)),
            "lipschitz_excess": float(np.max(lip)),
        },
    )
