"""TOML run configurations: generators, grids, and suite fixtures.

Coefficient and payoff functions come from the closed expression grammar
(:mod:`gexpect.expressions`); nothing in a config file is executed as code.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .expressions import parse
from .generators import ControlPoint, GeneratorSpec, IsaacsSpec, SublinearSpec
from .grids import Grid
from .gsde import SdeCoefficients


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _parse(text: str):
    from .expressions import ExpressionError

    try:
        return parse(text)
    except ExpressionError as exc:
        raise ConfigError(f"bad expression {text!r}: {exc}") from None


def _coefficient_map(text: str, d: int):
    """Expression in x0..x{d-1}, gamma, lam -> vectorised (xs, g, l) map."""
    expr = _parse(text)
    allowed = {f"x{i}" for i in range(d)} | {"gamma", "lam"}
    extra = expr.variables() - allowed
    if extra:
        raise ConfigError(f"coefficient {text!r} uses unknown symbols {sorted(extra)}")

    def call(xs, g, l, _e=expr):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        env = {f"x{i}": xs[:, i] for i in range(xs.shape[1])}
        env["gamma"], env["lam"] = g, l
        return np.broadcast_to(np.asarray(_e.eval(env), dtype=float),
                               (len(xs),)).copy()

    return call


def _state_map(text: str, d: int):
    expr = _parse(text)
    allowed = {f"x{i}" for i in range(d)}
    extra = expr.variables() - allowed
    if extra:
        raise ConfigError(f"coefficient {text!r} uses unknown symbols {sorted(extra)}")

    def call(zs, _e=expr):
        zs = np.atleast_2d(np.asarray(zs, dtype=float))
        env = {f"x{i}": zs[:, i] for i in range(zs.shape[1])}
        return np.broadcast_to(np.asarray(_e.eval(env), dtype=float),
                               (len(zs),)).copy()

    return call


def _build_sublinear(table: dict) -> SublinearSpec:
    pts = []
    d = int(table.get("dimension", 1))
    for entry in table.get("control_points", []):
        a = np.asarray(entry["a"], dtype=float).reshape(d, d)
        b = np.asarray(entry.get("b", [0.0] * d), dtype=float)
        pts.append(ControlPoint(a, b))
    if not pts:
        raise ConfigError("sublinear generator needs control_points")
    return SublinearSpec(pts)


def _build_isaacs(table: dict) -> IsaacsSpec:
    d = int(table.get("dimension", 1))
    if d != 1:
        raise ConfigError("config-driven game generators are one-dimensional")
    sig = _coefficient_map(table["sigma"], d)
    dri = _coefficient_map(table.get("drift", "0"), d)

    def sigma(xs, g, l, _f=sig):
        return _f(xs, g, l)[:, None, None]

    def drift(xs, g, l, _f=dri):
        return _f(xs, g, l)[:, None]

    return IsaacsSpec(
        gammas=[float(v) for v in table["gammas"]],
        lams=[float(v) for v in table["lams"]],
        sigma=sigma,
        drift=drift,
        dimension=d,
        order=table.get("order", "sup-inf"),
        x_lipschitz=float(table.get("x_lipschitz", 0.0)),
    )


def build_generator(table: dict) -> GeneratorSpec:
    kind = table.get("kind")
    if kind == "sublinear":
        spec = _build_sublinear(table)
    elif kind == "isaacs":
        spec = _build_isaacs(table)
    elif kind == "gsde":
        from .gsde import DerivedSpec

        spec = DerivedSpec(build_sde_coefficients(table))
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")

    dom = table.get("dominating")
    if dom == "self":
        if not spec.is_sublinear:
            raise ConfigError("only a sublinear generator can dominate itself")
        spec.dominating = spec
    elif dom == "sup-sup":
        if not isinstance(spec, IsaacsSpec):
            raise ConfigError("'sup-sup' shorthand applies to game generators")
        spec.dominating = spec.with_order("sup-sup")
    elif isinstance(dom, dict):
        spec.dominating = build_generator(dom)
    elif dom is not None:
        raise ConfigError(f"bad dominating entry {dom!r}")
    if spec.dominating is None and spec.is_sublinear:
        spec.dominating = spec
    return spec


def build_sde_coefficients(table: dict) -> SdeCoefficients:
    d = int(table.get("dimension", 1))
    if d != 1:
        raise ConfigError("config-driven SDE coefficients are one-dimensional")
    return SdeCoefficients.line(
        drift=_line_scalar(table.get("drift", "0")),
        qv_load=_line_scalar(table.get("qv_load", "0")),
        sigma=_line_scalar(table.get("sigma", "1")),
        sig_lo2=float(table.get("sig_lo2", 0.25)),
        sig_hi2=float(table.get("sig_hi2", 1.0)),
        holder_const=float(table.get("holder_const", 1.0)),
        holder_exp=float(table.get("holder_exp", 1.0)),
    )


def _line_scalar(value):
    if isinstance(value, str):
        m = _state_map(value, 1)
        return lambda z, _f=m: _f(np.atleast_1d(np.asarray(z))[:, None])
    return float(value)


def build_grid(table: dict) -> Grid:
    return Grid(
        lo=[float(v) for v in table["lo"]],
        hi=[float(v) for v in table["hi"]],
        nx=table["nx"],
    )


@dataclass
class RunConfig:
    path: Path
    raw_bytes: bytes
    generator: GeneratorSpec
    grid: Grid
    seed: int
    x0: float
    horizon: float
    scheme_constant: float
    out_dir: Optional[Path]
    suites: dict = field(default_factory=dict)
    sde: Optional[SdeCoefficients] = None

    def suite(self, name: str) -> dict:
        return self.suites.get(name, {})


def load_config(path, grid_scale: float = 1.0,
                seed_override: Optional[int] = None) -> RunConfig:
    path = Path(path)
    raw = path.read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    try:
        gen = build_generator(data["generator"])
        grid_tab = dict(data["grid"])
    except KeyError as exc:
        raise ConfigError(f"missing required section {exc}") from None
    if grid_scale != 1.0:
        nx = grid_tab["nx"]
        scale = lambda n: int(round((int(n) - 1) * grid_scale)) + 1
        grid_tab["nx"] = (scale(nx) if np.isscalar(nx)
                          else [scale(n) for n in nx])
    grid = build_grid(grid_tab)
    if gen.dimension != grid.d:
        raise ConfigError("generator and grid dimension differ")
    run = data.get("run", {})
    suites = data.get("suites", {})
    if not isinstance(suites, dict):
        raise ConfigError("[suites] must be a table of suite tables")
    tolerances = [v.get("tolerance") for v in suites.values()
                  if isinstance(v, dict) and "tolerance" in v]
    if any(t is not None and t <= 0 for t in tolerances):
        raise ConfigError("tolerances must be positive")
    sde = None
    if data["generator"].get("kind") == "gsde" or "sde" in data:
        sde = build_sde_coefficients(data.get("sde", data["generator"]))
    seed = int(run.get("seed", 0)) if seed_override is None else int(seed_override)
    return RunConfig(
        path=path,
        raw_bytes=raw,
        generator=gen,
        grid=grid,
        seed=seed,
        x0=float(run.get("x0", 0.0)),
        horizon=float(run.get("horizon", 1.0)),
        scheme_constant=float(run.get("scheme_constant", 0.05)),
        out_dir=Path(run["out"]) if "out" in run else None,
        suites=suites,
        sde=sde,
    )
