import json
import re
import subprocess
import sys
from pathlib import Path

import pytest

from moreaulab.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VIOLATION, main
from moreaulab.config import load_config, parse_config
from moreaulab.errors import ConfigError, SchemaError
from moreaulab.experiments.report import HEADER, ExperimentReport, read_rows
from moreaulab.plotting import polyline_points, render_svg

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def stability_doc(**extra):
    doc = json.loads((CONFIGS / "stability.json").read_text())
    doc["output_dir"] = "out"
    doc.update(extra)
    return doc


class TestConfig:
    def test_shipped_configs_parse(self):
        for p in sorted(CONFIGS.glob("*.json")):
            cfg = load_config(p)
            assert cfg.experiment == p.stem

    def test_reals_must_be_strings(self):
        doc = stability_doc(rho_bar=2.0)
        with pytest.raises(ConfigError, match="decimal strings"):
            parse_config(doc)

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(stability_doc(colour="red"))
        doc = stability_doc()
        doc["options"]["sweeps"] = 3
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(doc)

    def test_rho_bar_rule(self):
        cfg = parse_config(stability_doc())
        assert cfg.rho_bar_for(1.5) == pytest.approx(4.0)
        cfg = parse_config(stability_doc(rho_bar="3"))
        assert cfg.rho_bar_for(1.5) == 3.0

    def test_echo_is_verbatim(self):
        doc = stability_doc()
        assert json.loads(parse_config(doc).echo()) == doc


class TestRun:
    def test_missing_config(self, tmp_path, capsys):
        path = tmp_path / "nope.json"
        assert main(["run", "--config", str(path)]) == EXIT_CONFIG
        assert str(path) in capsys.readouterr().err

    def test_bad_config(self, tmp_path):
        assert main(["run", "--config", str(write(tmp_path, {"experiment": "bogus"}))]) == EXIT_CONFIG
        p = tmp_path / "broken.json"
        p.write_text("{")
        assert main(["run", "--config", str(p)]) == EXIT_CONFIG

    def test_stability_default_and_determinism(self, tmp_path):
        cfg = write(tmp_path, stability_doc())
        assert main(["run", "--config", str(cfg)]) == EXIT_OK
        first = (tmp_path / "out" / "report.csv").read_bytes()
        rows = read_rows(first.decode())
        assert len(rows) >= 50 and all(r.passed for r in rows)
        assert main(["run", "--config", str(cfg)]) == EXIT_OK
        assert (tmp_path / "out" / "report.csv").read_bytes() == first
        summary = (tmp_path / "out" / "summary.csv").read_text()
        assert "schema_version,1" in summary and "config" in summary

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, stability_doc(options={"swaps": 3}))
        main(["run", "--config", str(cfg), "--seed", "11"])
        rows = read_rows((tmp_path / "out" / "report.csv").read_text())
        assert len(rows) == 3

    def test_violation_exit(self, tmp_path, monkeypatch, capsys):
        import moreaulab.cli as cli

        def failing(cfg, threads):
            rep = ExperimentReport("stability")
            rep.add(0, 20, 1, 2.0, 1.0)
            return rep

        monkeypatch.setitem(cli.RUNNERS, "stability", failing)
        assert main(["run", "--config", str(write(tmp_path, stability_doc()))]) == EXIT_VIOLATION
        assert "violation: stability,0,20,1" in capsys.readouterr().err

    def test_solver_failure_exit(self, tmp_path):
        # rho_bar below the weak-convexity modulus cannot be certified
        doc = stability_doc(rho_bar="0.001")
        assert main(["run", "--config", str(write(tmp_path, doc))]) == EXIT_SOLVER

    def test_attouch_and_plot_skip(self, tmp_path):
        doc = {"experiment": "attouch", "loss": {"kind": "phase", "d": 1}, "rho_bar": "2",
               "options": {"delta": "0.01", "probes": 50}, "output_dir": "out"}
        assert main(["run", "--config", str(write(tmp_path, doc))]) == EXIT_OK
        assert len(read_rows((tmp_path / "out" / "report.csv").read_text())) == 2

    def test_rate_run_with_plot(self, tmp_path):
        doc = {"experiment": "functional_rate", "loss": {"kind": "glm", "d": 2, "params": {"K": 1, "noise": "0.5"}},
               "m": [64, 256], "trials": 4, "options": {"B": "0.1", "mega": 4096}, "output_dir": "out", "plot": True}
        assert main(["run", "--config", str(write(tmp_path, doc))]) == EXIT_OK
        svg = (tmp_path / "out" / "report.svg").read_text()
        assert svg.startswith("<?xml") and 'version="1.1"' in svg

    def test_console_script(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "moreaulab.cli", "run", "--config", str(tmp_path / "x.json")],
            capture_output=True, text=True,
        )
        assert out.returncode == EXIT_CONFIG


class TestPlot:
    def report(self, tmp_path, points):
        rep = ExperimentReport("demo")
        for m, v in points:
            rep.add(0, m, 0, v, 1.0)
        p = tmp_path / "report.csv"
        p.write_text(rep.to_csv())
        return p

    def test_power_law_slope_text(self, tmp_path):
        src = self.report(tmp_path, [(10, 1.0), (100, 10**-0.5), (1000, 0.1)])
        out = tmp_path / "p.svg"
        assert main(["plot", "--in", str(src), "--out", str(out)]) == EXIT_OK
        assert "slope −0.500" in out.read_text()

    def test_empty_report(self, tmp_path):
        src = tmp_path / "empty.csv"
        src.write_text(",".join(HEADER) + "\n")
        assert main(["plot", "--in", str(src), "--out", str(tmp_path / "p.svg")]) == EXIT_CONFIG
        src.write_text("")
        assert main(["plot", "--in", str(src), "--out", str(tmp_path / "p.svg")]) == EXIT_CONFIG
        assert main(["plot", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "p.svg")]) == EXIT_CONFIG

    def test_monotone_series_renders_descending(self):
        svg, _ = render_svg([(m, 5.0 / m**0.3) for m in (8, 16, 32, 64, 128)])
        ys = [y for _, y in polyline_points(svg)]
        xs = [x for x, _ in polyline_points(svg)]
        # pixel y grows downward, so a decreasing series has increasing pixel y
        assert all(b > a for a, b in zip(ys, ys[1:]))
        assert all(b > a for a, b in zip(xs, xs[1:]))

    def test_single_m_rejected(self):
        with pytest.raises(SchemaError):
            render_svg([(10, 1.0)])


class TestBounds:
    def test_shipped_spec(self, capsys):
        assert main(["bounds", "--spec", str(CONFIGS / "bounds" / "table.json")]) == EXIT_OK
        assert "robust.D" in capsys.readouterr().out

    def test_table(self, tmp_path, capsys):
        spec = {"bounds": [
            {"name": "stability", "params": {"L_i": "1", "L_i_prime": "1", "rho": "0", "rho_bar": "1", "m": 10}},
            {"name": "attouch", "params": {"u": "0.01", "l": "-0.01", "rho": "1", "rho_bar": "2"}},
            {"name": "covering_l2", "params": {"B": "1", "d": 1, "delta": "2"}},
            {"name": "robust_gaussian", "params": {"d": 10, "p_fail": "0.1", "a": "2", "xbar_norm": "1", "m": 10000, "t": "0"}},
        ]}
        p = write(tmp_path, spec, "b.json")
        assert main(["bounds", "--spec", str(p)]) == EXIT_OK
        out = capsys.readouterr().out
        assert re.search(r"^stability\s+0\.2", out, re.M)
        assert re.search(r"^attouch\.dsym\s+0\.02", out, re.M)
        assert "robust.D" in out and "log_covering_l2" in out

    def test_errors(self, tmp_path):
        bad = write(tmp_path, {"bounds": [{"name": "nonsense", "params": {}}]}, "b.json")
        assert main(["bounds", "--spec", str(bad)]) == EXIT_CONFIG
        bad = write(tmp_path, {"bounds": [{"name": "attouch", "params": {"u": "0", "l": "1", "rho": "0", "rho_bar": "1"}}]}, "c.json")
        assert main(["bounds", "--spec", str(bad)]) == EXIT_CONFIG
        assert main(["bounds", "--spec", str(tmp_path / "none.json")]) == EXIT_CONFIG
