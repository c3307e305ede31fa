"""Weak solutions of SDEs under variance uncertainty.

Given coefficients (b, r, sigma) and a sublinear monotone matrix function
Gbar with Gbar(A) >= lambda tr[A], the derived scalar generator is

    G(z, p, A) = Gbar(2 r(z) p + sigma(z)^T A sigma(z)) + <b(z), p>,

whose members inherit diffusion sigma a_m sigma^T and drift b + rho_m from
the members a_m of Gbar.  The driving noise is recovered pathwise from a
state path by inverting the Euler relations at left points:

    d<B> = sigma^{-1} d<z> sigma^{-T},
    dB   = sigma^{-1} dz - sigma^{-1} b dt - sigma^{-1} r . d<B>,

which is algebraically exact at the discrete level, so the round trip back
to dz reproduces the input increments to float round-off.  Realised
quadratic variation (sums of squared increments) stands in for the
compensated bracket throughout.

Martingale checks for the integrands N^{p,eta} = int p dz
+ 1/2 int tr[eta d<z>] - int [Gbar(2 r p + sigma^T eta sigma) + p^T b] run at
the PDE level through the stationarity residual.  The payoff-based surrogate
matches the integrand exactly only when the eta-weighted bracket term cannot
interact with the drift, i.e. for eta = 0 (any coefficients) or for b = 0,
r = 0 (any constant eta); fixture families are chosen inside that exact
regime, and the state-dependent demo exercises eta = 0 plus compensator
payoffs built from analytic derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .generators import ControlPoint, GeneratorSpec, SublinearSpec
from .grids import Grid, Payoff
from .reporting import ResidualReport
from .solver import DEFAULT_SCHEME_CONSTANT, evolve, trusted_mask


def _as_map(value, shape_tail):
    """Lift a constant or callable to a vectorised map zs (n, d) -> (n, *tail)."""
    if callable(value):
        def call(zs, _f=value, _tail=shape_tail):
            out = np.asarray(_f(zs), dtype=float)
            return out.reshape((len(zs),) + _tail)
        return call
    const = np.broadcast_to(np.asarray(value, dtype=float), shape_tail).copy()

    def constant(zs, _c=const, _tail=shape_tail):
        return np.broadcast_to(_c, (len(zs),) + _tail)

    return constant


@dataclass
class SdeCoefficients:
    """Coefficient triple plus the sublinear matrix function driving it.

    ``drift``: zs (n, d) -> (n, d); ``qv_load`` r: zs -> (n, d, d, d) with
    component order [k, i, j] so (r . M)^k = r^k_ij M_ij; ``sigma``: zs ->
    (n, d, d), invertible on the working box.  Hoelder data (L0, alpha) is
    declared, spot-checked, and never enforced.
    """

    dimension: int
    drift: Callable
    qv_load: Callable
    sigma: Callable
    gbar: SublinearSpec
    lambda_min: float = 0.0
    holder_const: float = 1.0
    holder_exp: float = 1.0

    def __post_init__(self):
        d = self.dimension
        if self.gbar.dimension != d:
            raise ValueError("gbar dimension must match the state dimension")
        if any(np.any(pt.b != 0.0) for pt in self.gbar.points):
            raise ValueError("gbar acts on matrices only; its members carry no drift")
        self.drift = _as_map(self.drift, (d,))
        self.qv_load = _as_map(self.qv_load, (d, d, d))
        self.sigma = _as_map(self.sigma, (d, d))

    @classmethod
    def line(cls, drift=0.0, qv_load=0.0, sigma=1.0,
             sig_lo2: float = 0.25, sig_hi2: float = 1.0,
             holder_const: float = 1.0, holder_exp: float = 1.0,
             lambda_min: Optional[float] = None) -> "SdeCoefficients":
        """One-dimensional coefficients from scalars or scalar callables."""
        gbar = SublinearSpec([
            ControlPoint(np.array([[sig_hi2]]), np.zeros(1)),
            ControlPoint(np.array([[sig_lo2]]), np.zeros(1)),
        ])

        def wrap(v):
            if callable(v):
                return lambda zs, _f=v: np.asarray(_f(zs[:, 0]), dtype=float)
            return v

        return cls(
            dimension=1, drift=wrap(drift), qv_load=wrap(qv_load),
            sigma=wrap(sigma), gbar=gbar,
            lambda_min=0.5 * sig_lo2 if lambda_min is None else lambda_min,
            holder_const=holder_const, holder_exp=holder_exp,
        )


class DerivedSpec(GeneratorSpec):
    """Generator induced by SDE coefficients; sublinear and state dependent."""

    is_sublinear = True

    def __init__(self, coeffs: SdeCoefficients):
        self.coeffs = coeffs
        self.dimension = coeffs.dimension
        self._abar = np.stack([pt.a for pt in coeffs.gbar.points])  # (M, d, d)
        self.dominating = self

    @property
    def control_shape(self):
        return (self._abar.shape[0],)

    def member_coeffs(self, xs):
        zs = np.atleast_2d(np.asarray(xs, dtype=float))
        sig = self.coeffs.sigma(zs)                       # (n, d, d)
        r = self.coeffs.qv_load(zs)                       # (n, d, d, d)
        b = self.coeffs.drift(zs)                         # (n, d)
        a = np.einsum("nik,mkl,njl->mnij", sig, self._abar, sig)
        rho = np.einsum("mij,nkij->mnk", self._abar, r)
        return a, b[None] + rho

    def reduce(self, values):
        return np.max(values, axis=0)

    def _argreduce(self, vals):
        return (int(np.argmax(vals)),)

    def quadratic_compensator(self, zs: np.ndarray, p: np.ndarray,
                              eta: np.ndarray) -> np.ndarray:
        """Gbar(2 r(z) p + sigma^T eta sigma) + p^T b(z) for constant (p, eta)."""
        zs = np.atleast_2d(np.asarray(zs, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        sig = self.coeffs.sigma(zs)
        r = self.coeffs.qv_load(zs)
        b = self.coeffs.drift(zs)
        m = 2.0 * np.einsum("nkij,k->nij", r, p) + np.einsum(
            "nik,kl,njl->nij", sig, eta, sig)
        vals = 0.5 * np.einsum("mij,nji->mn", self._abar, m)
        return np.max(vals, axis=0) + b @ p


def build_weak_generator(
    coeffs: SdeCoefficients,
    grid: Grid,
    cond_limit: float = 1e8,
    n_samples: int = 256,
    seed: int = 0,
) -> tuple:
    """Derived generator plus its validation report.

    Rejects a sigma that is singular (or nearly so) at any grid node, checks
    Gbar(A) >= lambda tr[A] on sampled matrices, and spot-checks the declared
    Hoelder data of the coefficients; the Hoelder part warns in the report
    rather than rejecting.
    """
    zs = grid.states()
    sig = coeffs.sigma(zs)
    # bounded inverse: the smallest singular value must stay away from zero
    smin = np.linalg.svd(sig, compute_uv=False)[..., -1]
    worst = int(np.argmin(smin))
    if smin[worst] <= 1.0 / cond_limit:
        raise ValueError(
            f"sigma is ill-conditioned at node {worst} (z = {zs[worst]}, "
            f"smallest singular value = {smin[worst]:.3e})"
        )

    rng = np.random.Generator(np.random.Philox(key=seed))
    d = coeffs.dimension
    As = rng.uniform(-2.0, 2.0, size=(n_samples, d, d))
    As = 0.5 * (As + np.swapaxes(As, -1, -2))
    gvals = coeffs.gbar.evaluate_many(np.zeros((n_samples, d)),
                                      np.zeros((n_samples, d)), As)
    floor_gap = float(np.max(coeffs.lambda_min * np.trace(As, axis1=-2, axis2=-1)
                             - gvals))
    if floor_gap > 1e-9:
        raise ValueError(
            f"gbar fails the uniform ellipticity floor by {floor_gap:.3e}"
        )

    idx = rng.integers(0, len(zs), size=(n_samples, 2))
    za, zb = zs[idx[:, 0]], zs[idx[:, 1]]
    dist = np.sqrt(np.sum((za - zb) ** 2, axis=-1))
    keep = dist > 1e-12
    coeff_gap = (
        np.sum(np.abs(coeffs.drift(za) - coeffs.drift(zb)), axis=-1)
        + np.sum(np.abs(coeffs.qv_load(za) - coeffs.qv_load(zb)), axis=(-3, -2, -1))
        + np.sum(np.abs(coeffs.sigma(za) - coeffs.sigma(zb)), axis=(-2, -1))
    )
    quotient = coeff_gap[keep] / dist[keep] ** coeffs.holder_exp
    worst_quot = float(np.max(quotient, initial=0.0))

    spec = DerivedSpec(coeffs)
    # continuity of the derived generator itself: the state gap at shared
    # (p, A) normalised by (1 + |A|) ((1 + |p|) |z - zbar|)^alpha
    ps = rng.uniform(-2.0, 2.0, size=(n_samples, d))
    gap = np.abs(spec.evaluate_many(za, ps, As) - spec.evaluate_many(zb, ps, As))
    a_norm = np.sqrt(np.sum(As * As, axis=(-2, -1)))
    p_norm = np.sqrt(np.sum(ps * ps, axis=-1))
    denom = (1.0 + a_norm) * ((1.0 + p_norm) * np.maximum(dist, 1e-12)) \
        ** coeffs.holder_exp
    gen_quot = float(np.max((gap / denom)[keep], initial=0.0))

    report = ResidualReport(
        name="weak-generator-validation",
        residual=max(floor_gap, 0.0),
        tolerance=1e-9,
        params={"nodes": len(zs), "samples": n_samples, "seed": seed},
        details={
            "sigma_inverse_norm_max": float(1.0 / smin[worst]),
            "ellipticity_gap": floor_gap,
            "holder_quotient": worst_quot,
            "holder_declared": coeffs.holder_const,
            "holder_warning": worst_quot > coeffs.holder_const * (1 + 1e-6),
            "generator_continuity_quotient": gen_quot,
        },
    )
    return spec, report


@dataclass
class DiscretePath:
    """Time-stamped states with realised quadratic-variation accumulators."""

    times: np.ndarray                 # (M+1,)
    states: np.ndarray                # (M+1, d)
    qv: np.ndarray                    # (M+1, d, d), qv[k] = sum_{j<k} dz dz^T

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.qv = np.asarray(self.qv, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("path times must be strictly increasing")
        if self.qv.shape != (len(self.times), self.d, self.d):
            raise ValueError("qv accumulator shape mismatch")

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def increments(self):
        return np.diff(self.times), np.diff(self.states, axis=0)

    @classmethod
    def from_increments(cls, t0, z0, dts, dzs) -> "DiscretePath":
        times = np.concatenate([[t0], t0 + np.cumsum(dts)])
        states = np.concatenate([np.atleast_2d(z0), np.atleast_2d(z0)
                                 + np.cumsum(dzs, axis=0)])
        dq = np.einsum("ki,kj->kij", dzs, dzs)
        qv = np.concatenate([np.zeros((1,) + dq.shape[1:]), np.cumsum(dq, axis=0)])
        return cls(times, states, qv)


@dataclass
class SimulatedPair:
    """A state path together with the noise path that generated it."""

    z: DiscretePath
    b_noise: DiscretePath             # the driving noise with its realised qv


def simulate_state_paths(
    coeffs: SdeCoefficients,
    z0,
    horizon: float,
    n_steps: int,
    n_paths: int = 1,
    member: int = 0,
    seed: int = 0,
) -> list:
    """Euler paths under one fixed member measure of gbar.

    The member index selects a_m from gbar; the noise increment is the PSD
    square root of a_m times a standard Gaussian step, its realised square
    feeds the quadratic-variation channel, and the state follows
    dz = b dt + sigma dB + r . d<B>.
    """
    d = coeffs.dimension
    abar = coeffs.gbar.points[member].a
    w, v = np.linalg.eigh(abar)
    root = v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T
    dt = horizon / n_steps
    rng = np.random.Generator(np.random.Philox(key=seed))
    z = np.broadcast_to(np.atleast_1d(np.asarray(z0, dtype=float)),
                        (n_paths, d)).copy()
    dB = np.empty((n_steps, n_paths, d))
    dz = np.empty((n_steps, n_paths, d))
    for k in range(n_steps):
        dw = rng.normal(0.0, np.sqrt(dt), size=(n_paths, d))
        step_b = dw @ root.T
        dq_b = np.einsum("ni,nj->nij", step_b, step_b)
        sig = coeffs.sigma(z)
        r = coeffs.qv_load(z)
        b = coeffs.drift(z)
        step_z = (b * dt + np.einsum("nij,nj->ni", sig, step_b)
                  + np.einsum("nkij,nij->nk", r, dq_b))
        dB[k] = step_b
        dz[k] = step_z
        z = z + step_z
    out = []
    dts = np.full(n_steps, dt)
    for p in range(n_paths):
        zp = DiscretePath.from_increments(0.0, np.atleast_1d(z0), dts, dz[:, p])
        bp = DiscretePath.from_increments(0.0, np.zeros(d), dts, dB[:, p])
        out.append(SimulatedPair(z=zp, b_noise=bp))
    return out


@dataclass
class ReconstructionResult:
    b_path: DiscretePath
    db: np.ndarray                    # (M, d) reconstructed noise increments
    dqv_b: np.ndarray                 # (M, d, d) bracket increments
    flagged_nodes: list               # indices where sigma was ill-conditioned


def reconstruct_noise(path: DiscretePath, coeffs: SdeCoefficients,
                      cond_limit: float = 1e8) -> ReconstructionResult:
    """Invert the Euler relations at left points; see module docstring."""
    dts, dzs = path.increments
    left = path.states[:-1]
    sig = coeffs.sigma(left)
    smin = np.linalg.svd(sig, compute_uv=False)[..., -1]
    flagged = [int(i) for i in np.nonzero(smin <= 1.0 / cond_limit)[0]]
    if np.any(smin == 0.0):
        raise ValueError("sigma is singular along the path")
    sig_inv = np.linalg.inv(sig)
    dq_z = np.diff(path.qv, axis=0)
    dq_b = np.einsum("nij,njk,nlk->nil", sig_inv, dq_z, sig_inv)
    r = coeffs.qv_load(left)
    b = coeffs.drift(left)
    rq = np.einsum("nkij,nij->nk", r, dq_b)
    db = np.einsum("nij,nj->ni", sig_inv, dzs - b * dts[:, None] - rq)
    # the bracket channel of B comes from the state bracket, not from db
    qv = np.concatenate([np.zeros((1, path.d, path.d)), np.cumsum(dq_b, axis=0)])
    states = np.concatenate([np.zeros((1, path.d)),
                             np.cumsum(db, axis=0)])
    b_path = DiscretePath(path.times, states, qv)
    return ReconstructionResult(b_path=b_path, db=db, dqv_b=dq_b,
                                flagged_nodes=flagged)


def roundtrip_residual(path: DiscretePath, coeffs: SdeCoefficients) -> float:
    """Max per-step defect of rebuilding dz from the reconstructed noise."""
    rec = reconstruct_noise(path, coeffs)
    dts, dzs = path.increments
    left = path.states[:-1]
    sig = coeffs.sigma(left)
    r = coeffs.qv_load(left)
    b = coeffs.drift(left)
    rebuilt = (b * dts[:, None] + np.einsum("nij,nj->ni", sig, rec.db)
               + np.einsum("nkij,nij->nk", r, rec.dqv_b))
    return float(np.max(np.abs(rebuilt - dzs)))


def bracket_identity_residual(pair: SimulatedPair,
                              coeffs: SdeCoefficients) -> float:
    """Sup distance between reconstructed and simulated noise brackets."""
    rec = reconstruct_noise(pair.z, coeffs)
    return float(np.max(np.abs(rec.b_path.qv - pair.b_noise.qv)))


def quadratic_payoff(p: float, eta: float, dimension: int = 1) -> Payoff:
    """phi(z) = p z + eta z^2 / 2 with analytic derivatives (d = 1)."""
    if dimension != 1:
        raise NotImplementedError("quadratic fixtures are one-dimensional")
    return Payoff(
        lambda s: p * s[..., 0] + 0.5 * eta * s[..., 0] ** 2,
        1,
        grad=lambda s: (p + eta * s[..., 0])[..., None],
        hess=lambda s: np.broadcast_to(eta, s.shape[:-1])[..., None, None].astype(float),
        growth_degree=2.0,
        name=f"{p}*z + {eta}/2*z^2",
    )


def ito_residual(
    x_path: DiscretePath,
    phi: Payoff,
    alpha=0.0,
    beta=1.0,
    eta=0.0,
    kappa=0.0,
    y_path: Optional[DiscretePath] = None,
    float_slack: float = 1e-10,
) -> ResidualReport:
    """Discrete chain-rule identity along one path (scalar process, d = 1).

    The integrator path is xi_0 + int alpha dt + int beta dX + int eta d<X>
    + int kappa dy with left-point sums; both sides of

        phi(xi_T) - phi(xi_0) = sum phi'(xi) dxi
                                + 1/2 sum phi''(xi) beta^2 d<X>

    are accumulated, as is the bracket identity <xi> = int beta^2 d<X>.
    Coefficients are constants or callables of the running xi.  Linear phi
    and pure-noise quadratics are exact at the discrete level; everything
    else shrinks with the step.
    """
    if x_path.d != 1:
        raise NotImplementedError("the chain-rule check is one-dimensional")
    if not phi.analytic:
        raise ValueError("the chain-rule check needs analytic derivatives")
    dts, dxs = x_path.increments
    dq_x = np.diff(x_path.qv, axis=0)[:, 0, 0]
    dys = (np.diff(y_path.states, axis=0)[:, 0]
           if y_path is not None else np.zeros_like(dts))
    m = len(dts)

    def coef(c, xi_k):
        return float(c(xi_k)) if callable(c) else float(c)

    xi = np.empty(m + 1)
    xi[0] = 0.0
    betas = np.empty(m)
    dxi = np.empty(m)
    for k in range(m):
        b_k = coef(beta, xi[k])
        betas[k] = b_k
        dxi[k] = (coef(alpha, xi[k]) * dts[k] + b_k * dxs[k, 0]
                  + coef(eta, xi[k]) * dq_x[k] + coef(kappa, xi[k]) * dys[k])
        xi[k + 1] = xi[k] + dxi[k]

    states = xi[:-1][:, None]
    d1 = phi.grad(states)[:, 0]
    d2 = phi.hess(states)[:, 0, 0]
    lhs = float(phi.func(xi[-1:][:, None])[0] - phi.func(xi[:1][:, None])[0])
    rhs = float(np.sum(d1 * dxi) + 0.5 * np.sum(d2 * betas ** 2 * dq_x))
    chain_res = abs(lhs - rhs)

    qv_xi = np.cumsum(dxi * dxi)
    qv_int = np.cumsum(betas ** 2 * dq_x)
    qv_res = float(np.max(np.abs(qv_xi - qv_int)))

    return ResidualReport(
        name=f"ito[{phi.name}]",
        residual=chain_res,
        tolerance=float_slack,
        params={"steps": m, "max_dx": float(np.max(np.abs(dxs)))},
        details={"chain_rule": chain_res, "bracket": qv_res,
                 "lhs": lhs, "rhs": rhs},
    )


def check_integrand_martingale(
    coeffs: SdeCoefficients,
    p: float,
    eta: float,
    horizon: float,
    grid: Grid,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ResidualReport:
    """Stationarity residual for N^{p,eta} with constant (p, eta), d = 1.

    The compensator is the closed formula Gbar(2 r p + sigma^T eta sigma)
    + p b.  The payoff surrogate p z + eta z^2/2 represents the integrand
    exactly when eta = 0 or when both b and r vanish; outside that regime
    the report flags the surrogate gap instead of pretending the check is
    sharp.
    """
    spec = DerivedSpec(coeffs)
    payoff = quadratic_payoff(p, eta, coeffs.dimension)
    zs = grid.states()
    f = spec.quadratic_compensator(zs, [p], [[eta]]).reshape(grid.shape)
    phi0 = payoff.sample(grid)
    res = evolve(spec, phi0, horizon, grid, source=-f)
    mask = trusted_mask(spec, grid, horizon)
    residual = float(np.max(np.abs(res.field.values - phi0)[mask]))
    drift_scale = float(np.max(np.abs(coeffs.drift(zs))))
    load_scale = float(np.max(np.abs(coeffs.qv_load(zs))))
    exact_regime = eta == 0.0 or (drift_scale == 0.0 and load_scale == 0.0)
    budget = scheme_constant * (float(np.min(grid.dx)) + res.dt)
    return ResidualReport(
        name=f"integrand-martingale[p={p}, eta={eta}]",
        residual=residual,
        tolerance=max(1e-9, 3.0 * budget) if not (p == 0.0 and eta == 0.0)
        else 1e-15,
        params={"horizon": horizon, "nx": grid.nx, "dt": res.dt},
        details={"surrogate_exact": exact_regime,
                 "scheme_budget": budget},
    )


def noise_characterization_trio(
    coeffs: SdeCoefficients,
    horizon: float,
    grid: Grid,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
    float_slack: float = 1e-9,
) -> list:
    """The three d = 1 laws pinning the reconstructed noise distribution.

    For constant sigma with no drift and no bracket load, B = (z - z0) /
    sigma, so symmetry of B, the upper-variance compensation B^2 -
    sig_hi2 t, and the lower-variance compensation sig_lo2 t - B^2 all
    reduce to integrand-martingale checks with constant (p, eta): p = +-
    1/sigma with eta = 0 and p = 0 with eta = +- 2/sigma^2.  All four sit in
    the exact surrogate regime, so they are held to float slack.
    """
    zs = grid.states()
    sig = coeffs.sigma(zs)
    if float(np.max(np.abs(sig - sig[0]))) > 1e-12:
        raise ValueError("the trio needs a constant sigma")
    if float(np.max(np.abs(coeffs.drift(zs)))) > 0.0 or \
            float(np.max(np.abs(coeffs.qv_load(zs)))) > 0.0:
        raise ValueError("the trio needs zero drift and zero bracket load")
    s = float(sig[0, 0, 0])
    cases = [
        ("noise-symmetric[+]", 1.0 / s, 0.0),
        ("noise-symmetric[-]", -1.0 / s, 0.0),
        ("upper-variance-compensation", 0.0, 2.0 / (s * s)),
        ("lower-variance-compensation", 0.0, -2.0 / (s * s)),
    ]
    out = []
    for name, p, eta in cases:
        rep = check_integrand_martingale(coeffs, p, eta, horizon, grid,
                                         scheme_constant)
        rep.name = name
        rep.tolerance = float_slack
        out.append(rep)
    return out


def weak_solution_demo(
    coeffs: SdeCoefficients,
    horizon: float,
    grid: Grid,
    z0: float = 0.0,
    dtaus: Sequence[float] = (1e-2, 1e-3, 1e-4),
    n_paths: int = 4,
    seed: int = 2024,
    scheme_constant: float = DEFAULT_SCHEME_CONSTANT,
) -> ResidualReport:
    """End-to-end weak-solution pipeline for one coefficient set.

    Builds and validates the derived generator, runs the integrand
    martingale family (the full trio when the coefficients allow it, the
    drift-robust eta = 0 cases plus compensator payoffs otherwise),
    reconstructs the noise on simulated paths with the round-trip bound,
    and checks that the bracket identity tightens as the step refines.
    """
    from .martingale import MartingaleFixture, martingale_residual
    from .reporting import combine_reports

    spec, validation = build_weak_generator(coeffs, grid)
    parts = [validation]

    parts.append(check_integrand_martingale(coeffs, 0.0, 0.0, horizon, grid,
                                            scheme_constant))
    for p in (1.0, -1.0):
        parts.append(check_integrand_martingale(coeffs, p, 0.0, horizon, grid,
                                                scheme_constant))
    zs = grid.states()
    constant_sigma = float(np.max(np.abs(coeffs.sigma(zs)
                                         - coeffs.sigma(zs)[0]))) <= 1e-12
    driftless = (float(np.max(np.abs(coeffs.drift(zs)))) == 0.0
                 and float(np.max(np.abs(coeffs.qv_load(zs)))) == 0.0)
    if constant_sigma and driftless:
        parts.extend(noise_characterization_trio(coeffs, horizon, grid,
                                                 scheme_constant))
    else:
        # drifted or state-dependent: quadratic/cosine compensator payoffs
        for payoff in (quadratic_payoff(0.0, 1.0), Payoff.from_expr("cos(x)")):
            rep = martingale_residual(
                MartingaleFixture(spec, payoff, (0.0, horizon), grid),
                scheme_constant)
            parts.append(rep)

    rt_worst = 0.0
    bracket = []
    for dtau in dtaus:
        n_steps = max(2, round(horizon / dtau))
        pairs = simulate_state_paths(coeffs, z0, horizon, n_steps,
                                     n_paths=n_paths, seed=seed)
        rt_worst = max(rt_worst,
                       max(roundtrip_residual(p.z, coeffs) for p in pairs))
        bracket.append(float(np.mean(
            [bracket_identity_residual(p, coeffs) for p in pairs])))
    parts.append(ResidualReport(
        "noise-roundtrip", rt_worst, 1e-12,
        params={"dtaus": list(dtaus), "n_paths": n_paths, "seed": seed}))
    # exact transforms (constant sigma, no drift) sit at float dust for every
    # step size; only a genuinely nonzero sequence must decrease
    bracket_ok = all(
        bracket[i + 1] < bracket[i] or bracket[i + 1] <= 1e-12
        for i in range(len(bracket) - 1)
    )
    parts.append(ResidualReport(
        "bracket-refinement", 0.0 if bracket_ok else 1.0, 0.5,
        params={"dtaus": list(dtaus)},
        details={"residuals": bracket}))

    report = combine_reports("weak-solution-demo", parts)
    report.params.update({"horizon": horizon, "nx": grid.nx, "seed": seed})
    return report
