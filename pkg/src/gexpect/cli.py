"""Command-line runner: load a config, run suites, write reproducible reports.

Usage::

    gexpect CONFIG.toml [--suite solve,axioms] [--out DIR] [--seed N]
                        [--grid-scale F]

Reports land in the output directory as ``report.jsonl`` (one JSON object
per check, sorted keys, byte-identical for identical config and seed) plus
CSV side files; wall-clock timings go to the separate ``timings.txt`` so
the deterministic artifact stays clean.  Exit status: 0 when every selected
check passes, 1 when any residual exceeds its tolerance, 2 for bad
configurations or usage.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .expressions import ExpressionError
from .expectation import (
    CylinderFunctional,
    PrefixPolicy,
    check_expectation_properties,
    conditional,
    expectation_run,
    time_inconsistency_demo,
)
from .generators import SamplePlan, check_axioms, check_domination
from .grids import Field, Payoff
from .gsde import DiscretePath, simulate_state_paths, weak_solution_demo
from .martingale import (
    MartingaleFixture,
    frozen_source_comparison,
    martingale_residual,
    plane_reduction_crosscheck,
)
from .oracle import bound_report, lower_bound
from .reporting import ResidualReport, _plain
from .solver import (
    check_comparison,
    check_solution_properties,
    cfl_timestep,
    convergence_study,
    scheme_budget,
    solve_cauchy,
)

SUITES = ("axioms", "domination", "solve", "properties", "expectation",
          "martingale", "gsde", "oracle")


def emit_csv(obj, destination) -> Path:
    """Write a field, a conditional tensor, or a path as plain CSV."""
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(obj, Field):
            axes = ["x", "y"][: obj.grid.d]
            writer.writerow(axes + ["value"])
            states = obj.grid.states()
            for row, v in zip(states, obj.values.ravel()):
                writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])
        elif isinstance(obj, DiscretePath):
            d = obj.d
            writer.writerow(["time"] + [f"z{i}" for i in range(d)]
                            + [f"qv{i}{j}" for i in range(d) for j in range(d)])
            for k in range(len(obj.times)):
                writer.writerow([repr(float(obj.times[k]))]
                                + [repr(float(v)) for v in obj.states[k]]
                                + [repr(float(v)) for v in obj.qv[k].ravel()])
        elif hasattr(obj, "tensor") and hasattr(obj, "axes"):
            j = len(obj.axes)
            writer.writerow([f"x{i}" for i in range(j)] + ["value"])
            mesh = np.meshgrid(*obj.axes, indexing="ij") if j else []
            flat = [m.ravel() for m in mesh]
            for k, v in enumerate(np.asarray(obj.tensor).ravel()):
                writer.writerow([repr(float(f[k])) for f in flat]
                                + [repr(float(v))])
        else:
            raise TypeError(f"cannot serialise {type(obj).__name__} to CSV")
    return destination


def _payoff(text: str, dimension: int = 1) -> Payoff:
    return Payoff.from_expr(text, dimension)


def suite_axioms(cfg: RunConfig, out: Path) -> list:
    spec = cfg.generator if cfg.generator.is_sublinear else cfg.generator.dominating
    if spec is None:
        raise ConfigError("axioms suite needs a sublinear generator")
    params = cfg.suite("axioms")
    plan = SamplePlan(n_samples=int(params.get("samples", 4096)), seed=cfg.seed)
    return [check_axioms(spec, plan)]


def suite_domination(cfg: RunConfig, out: Path) -> list:
    spec = cfg.generator
    if spec.dominating is None:
        raise ConfigError("domination suite needs a dominating generator")
    params = cfg.suite("domination")
    plan = SamplePlan(n_samples=int(params.get("samples", 4096)), seed=cfg.seed)
    reports = [check_domination(spec, spec.dominating, plan)]
    if spec.is_sublinear:
        reports.append(check_domination(spec, spec, plan))   # self-domination
    return reports


def suite_solve(cfg: RunConfig, out: Path) -> list:
    params = cfg.suite("solve")
    reports = []
    for i, fx in enumerate(params.get("fixtures", [{"payoff": "x^2"}])):
        payoff = _payoff(fx["payoff"], cfg.grid.d)
        horizon = float(fx.get("horizon", cfg.horizon))
        res = solve_cauchy(cfg.generator, payoff, horizon, cfg.grid)
        emit_csv(res.field, out / f"solve_{i}_{_slug(fx['payoff'])}.csv")
        x_eval = fx.get("x_eval", [cfg.x0] * cfg.grid.d)
        value = res.at(x_eval)
        if "reference" in fx:
            tol = float(fx.get("tolerance",
                               3 * scheme_budget(cfg.grid, res.dt,
                                                 cfg.scheme_constant)))
            reports.append(ResidualReport(
                name=f"solve[{fx['payoff']}]",
                residual=abs(value - float(fx["reference"])),
                tolerance=tol,
                params={"nx": cfg.grid.nx, "dt": res.dt, "horizon": horizon},
                details={"value": value, "reference": float(fx["reference"])},
            ))
        else:
            reports.append(ResidualReport(
                name=f"solve[{fx['payoff']}]", residual=0.0, tolerance=1.0,
                params={"nx": cfg.grid.nx, "dt": res.dt},
                details={"value": value}))
    conv = params.get("convergence")
    if conv:
        grids = [type(cfg.grid)(cfg.grid.lo, cfg.grid.hi, int(n))
                 for n in conv.get("nx", [101, 201, 401])]
        table = convergence_study(
            cfg.generator, _payoff(conv["payoff"], cfg.grid.d),
            float(conv.get("horizon", cfg.horizon)), grids,
            reference=conv.get("reference"))
        ok = table.monotone_decreasing() and table.order >= float(
            conv.get("min_order", 0.8))
        reports.append(ResidualReport(
            name=f"convergence[{conv['payoff']}]",
            residual=0.0 if ok else 1.0,
            tolerance=0.5,
            params={"nx": [r.nx for r in table.rows]},
            details={"errors": table.errors(), "order": table.order,
                     "scheme_constant": table.scheme_constant()},
        ))
    return reports


def suite_properties(cfg: RunConfig, out: Path) -> list:
    params = cfg.suite("properties")
    horizon = float(params.get("horizon", cfg.horizon))
    phi = _payoff(params.get("phi", "x^2"), cfg.grid.d)
    psi = _payoff(params.get("psi", "cos(x)"), cfg.grid.d)
    lo = _payoff(params.get("phi_low", f"{params.get('phi', 'x^2')} - 1"),
                 cfg.grid.d)
    dt = cfl_timestep(cfg.generator, cfg.grid, horizon=horizon)
    budget = scheme_budget(cfg.grid, dt, cfg.scheme_constant)
    reports = [
        check_comparison(cfg.generator, lo, phi, horizon, cfg.grid),
        check_solution_properties(
            cfg.generator, phi, psi,
            shift=float(params.get("shift", 5.0)),
            alpha=float(params.get("alpha", 2.0)),
            horizon=horizon, grid=cfg.grid,
            domination_budget=max(1e-9, 3 * budget)),
    ]
    return reports


def _regrid(cfg: RunConfig, params: dict):
    """Optional per-suite resolution override on the configured box."""
    nx = params.get("nx")
    if nx is None:
        return cfg.grid
    from .grids import Grid

    return Grid(cfg.grid.lo, cfg.grid.hi, int(nx))


def suite_expectation(cfg: RunConfig, out: Path) -> list:
    params = cfg.suite("expectation")
    grid = _regrid(cfg, params)
    policy = PrefixPolicy(mode=params.get("prefix_mode", "auto"))
    reports = [check_expectation_properties(
        cfg.generator, grid, policy, cfg.scheme_constant)]
    demo_params = params.get("demo", {})
    demo = time_inconsistency_demo(
        t1=float(demo_params.get("t1", 0.5)),
        t2=float(demo_params.get("t2", 1.0)),
        c=float(demo_params.get("c", 1.0)),
        x0=float(demo_params.get("x0", 2.0)),
    )
    reports.append(ResidualReport(
        name="pinned-time-mismatch-demo",
        residual=abs(demo.mismatch - demo.predicted_mismatch),
        tolerance=1e-12,
        params=demo_params,
        details={"constant_value": demo.constant_value,
                 "recursed_value": demo.recursed_value,
                 "mismatch": demo.mismatch},
    ))
    xi = CylinderFunctional((cfg.horizon / 2, cfg.horizon),
                            _payoff("(x1 - x0)^2", 2), cfg.x0)
    cond = conditional(cfg.generator, xi, cfg.horizon / 2, grid, policy)
    emit_csv(cond, out / "conditional_tensor.csv")
    return reports


def suite_martingale(cfg: RunConfig, out: Path) -> list:
    params = cfg.suite("martingale")
    interval = tuple(params.get("interval", (0.0, cfg.horizon)))
    reports = []
    for text in params.get("payoffs", ["x^2", "x^4"]):
        fx = MartingaleFixture(cfg.generator, _payoff(text, cfg.grid.d),
                               interval, cfg.grid)
        reports.append(martingale_residual(fx, cfg.scheme_constant))
    frozen = params.get("frozen_source")
    if frozen:
        res = frozen_source_comparison(
            cfg.generator, _payoff(frozen.get("payoff", "x^2")),
            _payoff(frozen["source"]), float(frozen.get("horizon", cfg.horizon)),
            cfg.grid, x0=cfg.x0,
            partitions=tuple(frozen.get("partitions", (1, 2, 3))),
            scheme_constant=cfg.scheme_constant)
        ok = res.non_increasing_within_noise()
        reports.append(ResidualReport(
            name=f"frozen-source[{frozen['source']}]",
            residual=0.0 if ok else 1.0, tolerance=0.5,
            params={"partitions": res.partitions},
            details={"differences": res.differences,
                     "noise_floor": res.noise_floor,
                     "sourced_value": res.sourced_value}))
    if cfg.grid.d == 1 and params.get("plane_crosscheck", False):
        reports.append(plane_reduction_crosscheck(
            cfg.generator, _payoff(params.get("plane_payoff", "cos(x)")),
            min(cfg.horizon, 0.5), cfg.grid,
            scheme_constant=cfg.scheme_constant))
    return reports


def suite_gsde(cfg: RunConfig, out: Path) -> list:
    if cfg.sde is None:
        raise ConfigError("gsde suite needs SDE coefficients "
                          "([generator] kind='gsde' or an [sde] table)")
    params = cfg.suite("gsde")
    report = weak_solution_demo(
        cfg.sde, float(params.get("horizon", min(cfg.horizon, 0.5))),
        cfg.grid, z0=cfg.x0,
        dtaus=tuple(params.get("dtaus", (1e-2, 1e-3, 1e-4))),
        n_paths=int(params.get("n_paths", 4)),
        seed=cfg.seed, scheme_constant=cfg.scheme_constant)
    pair = simulate_state_paths(cfg.sde, cfg.x0, float(
        params.get("horizon", min(cfg.horizon, 0.5))), 200, seed=cfg.seed)[0]
    emit_csv(pair.z, out / "sample_path.csv")
    return [report]


def suite_oracle(cfg: RunConfig, out: Path) -> list:
    from .generators import SublinearSpec

    spec = cfg.generator
    if not isinstance(spec, SublinearSpec):
        raise ConfigError("oracle suite needs a finite sublinear control set")
    params = cfg.suite("oracle")
    t = float(params.get("time", cfg.horizon))
    n_paths = int(params.get("n_paths", 100_000))
    dt = float(params.get("dt", 0.01))
    reports = []
    for text in params.get("payoffs", ["x0^2", "-(x0^2)"]):
        xi = CylinderFunctional((t,), _payoff(text, 1), cfg.x0)
        run = expectation_run(spec, xi, cfg.grid,
                              scheme_constant=cfg.scheme_constant)
        bound = lower_bound(spec, xi, dt=dt, n_paths=n_paths, seed=cfg.seed)
        reports.append(bound_report(bound, run.value,
                                    run.tolerance(1.0, 0.0),
                                    name=f"mc-lower-bound[{text}]"))
    return reports


_DISPATCH = {
    "axioms": suite_axioms,
    "domination": suite_domination,
    "solve": suite_solve,
    "properties": suite_properties,
    "expectation": suite_expectation,
    "martingale": suite_martingale,
    "gsde": suite_gsde,
    "oracle": suite_oracle,
}


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text)[:40]


def run(config_path, suites=None, out_dir=None, seed=None,
        grid_scale: float = 1.0) -> int:
    """Execute the selected suites; returns the process exit status."""
    try:
        cfg = load_config(config_path, grid_scale=grid_scale,
                          seed_override=seed)
        selected = list(suites) if suites else [s for s in SUITES
                                                if s in cfg.suites]
        if not selected:
            raise ConfigError("no suites selected and none configured")
        unknown = [s for s in selected if s not in _DISPATCH]
        if unknown:
            raise ConfigError(f"unknown suites: {unknown}")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(out_dir) if out_dir else (cfg.out_dir or Path("gexpect-out"))
    out.mkdir(parents=True, exist_ok=True)

    all_reports = []
    timings = []
    failed = []
    for name in selected:
        t0 = time.perf_counter()
        try:
            reports = _DISPATCH[name](cfg, out)
        except ConfigError as exc:
            print(f"config error in suite {name}: {exc}", file=sys.stderr)
            return 2
        except ExpressionError as exc:
            print(f"bad expression in suite {name}: {exc}", file=sys.stderr)
            return 2
        timings.append((name, time.perf_counter() - t0))
        for rep in reports:
            all_reports.append((name, rep))
            print(f"{name}: {rep.line()}")
            if not rep.passed:
                failed.append((name, rep))

    meta = {
        "config_sha256": hashlib.sha256(cfg.raw_bytes).hexdigest(),
        "version": __version__,
        "seed": cfg.seed,
        "grid_scale": grid_scale,
        "suites": selected,
    }
    with (out / "report.jsonl").open("w") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for name, rep in all_reports:
            row = {"suite": name}
            row.update(rep.as_dict())
            fh.write(json.dumps(_plain(row), sort_keys=True) + "\n")
    with (out / "timings.txt").open("w") as fh:
        for name, dt_s in timings:
            fh.write(f"{name}\t{dt_s:.3f}s\n")

    if failed:
        print(f"\n{len(failed)} check(s) failed:", file=sys.stderr)
        for name, rep in failed:
            print(f"  {name}: {rep.line()}", file=sys.stderr)
        return 1
    print(f"\nall {len(all_reports)} checks passed; report at {out/'report.jsonl'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gexpect",
        description="Run verification suites for PDE-driven nonlinear expectations.",
    )
    parser.add_argument("config", help="TOML run configuration")
    parser.add_argument("--suite", default=None,
                        help="comma-separated subset of: " + ",".join(SUITES))
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    parser.add_argument("--grid-scale", type=float, default=1.0,
                        help="uniformly refine every grid by this factor")
    args = parser.parse_args(argv)
    suites = args.suite.split(",") if args.suite else None
    return run(args.config, suites=suites, out_dir=args.out,
               seed=args.seed, grid_scale=args.grid_scale)


if __name__ == "__main__":
    sys.exit(main())
