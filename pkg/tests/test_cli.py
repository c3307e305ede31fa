import json

import numpy as np
import pytest

from gexpect.cli import emit_csv, main, run
from gexpect.config import ConfigError, load_config
from gexpect.grids import Field, Grid, Payoff
from gexpect.gsde import DiscretePath

BASE_CONFIG = """
[generator]
kind = "sublinear"
dimension = 1
control_points = [{a = [1.0], b = [0.0]}, {a = [0.25], b = [0.0]}]
dominating = "self"

[grid]
lo = [-10.0]
hi = [10.0]
nx = 201

[run]
seed = 999
horizon = 1.0
x0 = 0.0
scheme_constant = 0.05

[suites.axioms]
samples = 512

[suites.solve]
fixtures = [{payoff = "x^2", reference = 1.0, tolerance = 1e-2}]

[suites.oracle]
payoffs = ["x0^2"]
n_paths = 20000
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(BASE_CONFIG)
    return path


class TestConfig:
    def test_loads_generator_and_grid(self, config_file):
        cfg = load_config(config_file)
        assert cfg.generator.dimension == 1
        assert cfg.grid.nx == (201,)
        assert cfg.seed == 999

    def test_grid_scale_refines(self, config_file):
        cfg = load_config(config_file, grid_scale=2.0)
        assert cfg.grid.nx == (401,)

    def test_seed_override(self, config_file):
        assert load_config(config_file, seed_override=7).seed == 7

    def test_isaacs_with_sup_sup_dominator(self, tmp_path):
        path = tmp_path / "isaacs.toml"
        path.write_text("""
[generator]
kind = "isaacs"
dimension = 1
gammas = [0.5, 1.0]
lams = [0.5, 1.0]
sigma = "(1 + 0.1*sin(x)) * gamma"
drift = "0.1 * lam"
order = "sup-inf"
dominating = "sup-sup"

[grid]
lo = [-8.0]
hi = [8.0]
nx = 101
""")
        cfg = load_config(path)
        assert not cfg.generator.is_sublinear
        assert cfg.generator.dominating.is_sublinear

    def test_rejects_unknown_kind(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("""
[generator]
kind = "mystery"

[grid]
lo = [-1.0]
hi = [1.0]
nx = 11
""")
        with pytest.raises(ConfigError, match="kind"):
            load_config(path)

    def test_rejects_expression_outside_grammar(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("""
[generator]
kind = "isaacs"
dimension = 1
gammas = [1.0]
lams = [1.0]
sigma = "exp(x)"
drift = "0"

[grid]
lo = [-1.0]
hi = [1.0]
nx = 11
""")
        with pytest.raises(ConfigError):
            load_config(path)


class TestRun:
    def test_exit_zero_and_report(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert run(config_file, out_dir=out) == 0
        lines = (out / "report.jsonl").read_text().splitlines()
        meta = json.loads(lines[0])["meta"]
        assert meta["seed"] == 999 and len(meta["config_sha256"]) == 64
        rows = [json.loads(l) for l in lines[1:]]
        assert all(r["passed"] for r in rows)
        assert (out / "timings.txt").exists()

    def test_reports_byte_identical_across_runs(self, config_file, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(config_file, out_dir=out1) == 0
        assert run(config_file, out_dir=out2) == 0
        assert (out1 / "report.jsonl").read_bytes() == \
            (out2 / "report.jsonl").read_bytes()

    def test_suite_subset_selection(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert run(config_file, suites=["axioms"], out_dir=out) == 0
        rows = (out / "report.jsonl").read_text().splitlines()
        assert len(rows) == 2    # meta + one check

    def test_failing_check_exits_one(self, tmp_path):
        path = tmp_path / "fail.toml"
        path.write_text(BASE_CONFIG.replace(
            'reference = 1.0, tolerance = 1e-2',
            'reference = 2.0, tolerance = 1e-2'))
        assert run(path, suites=["solve"], out_dir=tmp_path / "out") == 1

    def test_missing_config_exits_two(self, tmp_path):
        assert run(tmp_path / "nope.toml") == 2

    def test_unknown_suite_exits_two(self, config_file, tmp_path):
        assert run(config_file, suites=["warp"], out_dir=tmp_path / "o") == 2

    def test_main_entrypoint(self, config_file, tmp_path, capsys):
        rc = main([str(config_file), "--suite", "axioms",
                   "--out", str(tmp_path / "out"), "--seed", "5"])
        assert rc == 0
        assert "generator-axioms" in capsys.readouterr().out


class TestEmitCsv:
    def test_field_rows(self, tmp_path):
        g = Grid([-1.0], [1.0], 11)
        dest = emit_csv(Field(g, Payoff.from_expr("x^2").sample(g)),
                        tmp_path / "f.csv")
        lines = dest.read_text().splitlines()
        assert lines[0] == "x,value"
        assert len(lines) == 12

    def test_path_columns(self, tmp_path):
        p = DiscretePath.from_increments(0.0, np.zeros(1), np.full(4, 0.25),
                                         np.ones((4, 1)))
        dest = emit_csv(p, tmp_path / "p.csv")
        lines = dest.read_text().splitlines()
        assert lines[0] == "time,z0,qv00"
        assert len(lines) == 6

    def test_conditional_tensor_rows(self, tmp_path):
        from gexpect.expectation import CylinderFunctional, conditional
        from gexpect.generators import gheat_spec

        g = Grid([-6.0], [6.0], 41)
        xi = CylinderFunctional((0.5,), Payoff.from_expr("x0^2", 1), 0.0)
        cond = conditional(gheat_spec(), xi, 0.5, g)
        dest = emit_csv(cond, tmp_path / "c.csv")
        assert len(dest.read_text().splitlines()) == 42

    def test_rejects_unknown_objects(self, tmp_path):
        with pytest.raises(TypeError):
            emit_csv(object(), tmp_path / "x.csv")
