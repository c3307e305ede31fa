"""Uniform lattices on truncated boxes, sampled fields, and payoffs.

The solver works on a box large enough that boundary effects cannot reach
the evaluation window over the horizon of interest; :func:`domain_radius`
encodes the sizing rule (start point plus worst-case drift plus six
diffusion standard deviations) and :meth:`Grid.window_mask` the matching
trusted interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .expressions import Expr


def domain_radius(x0, max_tr_a: float, max_b: float, horizon: float) -> float:
    """Box radius |x0| + sup|b| T + 6 sqrt(max tr a * T)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return float(
        np.max(np.abs(x0)) + max_b * horizon + 6.0 * np.sqrt(max(max_tr_a, 0.0) * horizon)
    )


class Grid:
    """Uniform lattice on a box in d in {1, 2} dimensions."""

    def __init__(self, lo, hi, nx: Union[int, Sequence[int]],
                 boundary: str = "zero-curvature"):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        d = lo.shape[0]
        if d not in (1, 2) or hi.shape != lo.shape:
            raise ValueError("grids support d in {1, 2} with matching box corners")
        nxs = (nx,) * d if np.isscalar(nx) else tuple(int(n) for n in nx)
        if len(nxs) != d or any(n < 5 for n in nxs):
            raise ValueError("need at least 5 points per axis")
        if np.any(hi <= lo):
            raise ValueError("box must have positive extent")
        self.d = d
        self.lo = lo
        self.hi = hi
        self.nx = nxs
        self.dx = (hi - lo) / (np.array(nxs) - 1.0)
        self.boundary = boundary
        self.axes = [np.linspace(lo[i], hi[i], nxs[i]) for i in range(d)]

    @classmethod
    def centered(cls, radius: float, nx, d: int = 1, center=None) -> "Grid":
        c = np.zeros(d) if center is None else np.atleast_1d(np.asarray(center, float))
        return cls(c - radius, c + radius, nx)

    @property
    def shape(self) -> tuple:
        return tuple(self.nx)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nx))

    def states(self) -> np.ndarray:
        """All nodes, flattened C-order, shape (n_nodes, d)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def window_mask(self, center, margin: float) -> np.ndarray:
        """Nodes within box ``center +- margin``; the trusted interior."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        masks = [np.abs(self.axes[i] - c[i]) <= margin + 1e-12 for i in range(self.d)]
        if self.d == 1:
            return masks[0]
        return masks[0][:, None] & masks[1][None, :]

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of ``values`` (..., *shape) at ``points`` (m, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx, wts = [], []
        for i in range(self.d):
            t = (points[:, i] - self.lo[i]) / self.dx[i]
            t = np.clip(t, 0.0, self.nx[i] - 1.0)
            i0 = np.minimum(t.astype(int), self.nx[i] - 2)
            idx.append(i0)
            wts.append(t - i0)
        if self.d == 1:
            i0, w = idx[0], wts[0]
            return values[..., i0] * (1 - w) + values[..., i0 + 1] * w
        i0, j0 = idx
        wi, wj = wts
        v00 = values[..., i0, j0]
        v01 = values[..., i0, j0 + 1]
        v10 = values[..., i0 + 1, j0]
        v11 = values[..., i0 + 1, j0 + 1]
        return ((1 - wi) * ((1 - wj) * v00 + wj * v01)
                + wi * ((1 - wj) * v10 + wj * v11))

    def __repr__(self):
        return f"Grid(d={self.d}, nx={self.nx}, box=[{self.lo}, {self.hi}])"


@dataclass
class Field:
    """One time slice of a scalar function sampled on a grid."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-self.grid.d:] != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not end in {self.grid.shape}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")

    def at(self, x) -> float:
        return float(self.grid.interpolate(self.values, np.atleast_2d(x))[..., 0])


class Payoff:
    """Terminal/initial data with optional analytic first/second derivatives.

    ``func`` maps a state array of shape (..., d) to values of shape (...).
    Payoffs built from the expression grammar carry exact derivative
    expressions; payoffs from bare callables fall back to central differences
    on the grid, and reports are flagged accordingly.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        dimension: int,
        grad: Optional[Callable] = None,
        hess: Optional[Callable] = None,
        growth_degree: float = 0.0,
        name: str = "payoff",
    ):
        self.func = func
        self.dimension = dimension
        self.grad = grad
        self.hess = hess
        self.growth_degree = growth_degree
        self.name = name

    @property
    def analytic(self) -> bool:
        return self.grad is not None and self.hess is not None

    @classmethod
    def from_expr(cls, expr: Union[Expr, str], dimension: int = 1,
                  name: Optional[str] = None) -> "Payoff":
        from .expressions import parse

        if isinstance(expr, str):
            text, expr = expr, parse(expr)
        else:
            text = repr(expr)
        names = [f"x{i}" for i in range(dimension)]
        extra = expr.variables() - set(names)
        if extra:
            raise ValueError(f"payoff references unknown variables {sorted(extra)}")

        def env_of(states):
            states = np.asarray(states, dtype=float)
            return {n: states[..., i] for i, n in enumerate(names)}

        def func(states):
            return np.broadcast_to(
                np.asarray(expr.eval(env_of(states)), dtype=float),
                np.asarray(states).shape[:-1],
            ).copy()

        d1 = [expr.diff(n) for n in names]
        d2 = [[d1[i].diff(n) for n in names] for i in range(dimension)]

        def grad(states):
            env = env_of(states)
            base = np.asarray(states).shape[:-1]
            out = np.empty(base + (dimension,))
            for i in range(dimension):
                out[..., i] = np.broadcast_to(d1[i].eval(env), base)
            return out

        def hess(states):
            env = env_of(states)
            base = np.asarray(states).shape[:-1]
            out = np.empty(base + (dimension, dimension))
            for i in range(dimension):
                for j in range(dimension):
                    out[..., i, j] = np.broadcast_to(d2[i][j].eval(env), base)
            return out

        return cls(func, dimension, grad=grad, hess=hess,
                   growth_degree=float(expr.degree()), name=name or text)

    def sample(self, grid: Grid) -> np.ndarray:
        vals = np.asarray(self.func(grid.states()), dtype=float)
        if not np.isfinite(vals).all():
            raise ValueError(f"payoff {self.name!r} non-finite on the grid")
        return vals.reshape(grid.shape)

    def derivatives_on_grid(self, grid: Grid):
        """(grad, hess, analytic) on the lattice; numeric fallback is central.

        Shapes: grad (n_nodes, d), hess (n_nodes, d, d), both C-ordered like
        ``grid.states()``.
        """
        states = grid.states()
        if self.analytic:
            return (
                np.asarray(self.grad(states), dtype=float),
                np.asarray(self.hess(states), dtype=float),
                True,
            )
        vals = self.sample(grid)
        d = grid.d
        grad = np.zeros(grid.shape + (d,))
        hess = np.zeros(grid.shape + (d, d))
        for i in range(d):
            dx = grid.dx[i]
            g = np.gradient(vals, dx, axis=i, edge_order=2)
            grad[..., i] = g
            hess[..., i, i] = np.gradient(g, dx, axis=i, edge_order=2)
            for j in range(i + 1, d):
                gij = np.gradient(g, grid.dx[j], axis=j, edge_order=2)
                hess[..., i, j] = gij
                hess[..., j, i] = gij
        n = grid.n_nodes
        return grad.reshape(n, d), hess.reshape(n, d, d), False

    def __add__(self, other):
        if np.isscalar(other):
            return Payoff(
                lambda s, f=self.func, c=float(other): f(s) + c,
                self.dimension,
                grad=self.grad, hess=self.hess,
                growth_degree=self.growth_degree,
                name=f"{self.name}+{other}",
            )
        return NotImplemented

    def scaled(self, alpha: float) -> "Payoff":
        a = float(alpha)
        return Payoff(
            lambda s, f=self.func: a * f(s),
            self.dimension,
            grad=(None if self.grad is None else lambda s, g=self.grad: a * g(s)),
            hess=(None if self.hess is None else lambda s, h=self.hess: a * h(s)),
            growth_degree=self.growth_degree,
            name=f"{alpha}*{self.name}",
        )

    def minus(self, other: "Payoff") -> "Payoff":
        if other.dimension != self.dimension:
            raise ValueError("payoff dimension mismatch")
        both = self.analytic and other.analytic
        return Payoff(
            lambda s, f=self.func, g=other.func: f(s) - g(s),
            self.dimension,
            grad=(lambda s, a=self.grad, b=other.grad: a(s) - b(s)) if both else None,
            hess=(lambda s, a=self.hess, b=other.hess: a(s) - b(s)) if both else None,
            growth_degree=max(self.growth_degree, other.growth_degree),
            name=f"{self.name}-({other.name})",
        )

    def __repr__(self):
        return f"Payoff({self.name!r}, d={self.dimension}, analytic={self.analytic})"
