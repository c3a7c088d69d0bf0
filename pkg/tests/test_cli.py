import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from privacy_hcr import DiscreteLTISystem, StepScenario, estimate_change, hcr_bound, simulate_noisy
from privacy_hcr.cli import main, parse_sweep
from privacy_hcr.config import ConfigError, ScenarioConfig, read_measurements


def write_model(path, **overrides):
    doc = {"n": 1, "A": [0.5], "B": [1.0], "C": [1.0], "sigma2": 1.0, "dt_minutes": 1.0}
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stream=out)
    return code, out.getvalue()


def field(text, key):
    return [line.split(": ", 1)[1] for line in text.splitlines() if line.startswith(key + ": ")]


@pytest.fixture
def model(tmp_path):
    return write_model(tmp_path / "model.json")


class TestBound:
    def test_scalar_example(self, model, tmp_path):
        code, text = run("bound", "--model", model, "--k-star", "2", "--horizon", "5",
                         "--out", str(tmp_path / "s.csv"))
        assert code == 0
        steps = field(text, "bound")[0]
        assert steps.endswith("steps^2") and float(steps.split()[0]) == pytest.approx(0.3682, abs=1e-4)
        assert field(text, "tau_star") == ["1"]
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert json.loads(lines[0][len("# config: "):])["k_star"] == 2
        assert lines[1] == "tau,S,quotient_steps2"
        assert lines[2].startswith("1,1.3125,")

    def test_zero_noise_is_domain_error(self, tmp_path, capsys):
        m = write_model(tmp_path / "m.json", sigma2=0.0)
        code, _ = run("bound", "--model", m, "--k-star", "2", "--horizon", "5")
        assert code == 3
        assert "noise variance must be positive" in capsys.readouterr().err

    def test_empty_tau_range(self, model):
        assert run("bound", "--model", model, "--k-star", "5", "--horizon", "5")[0] == 3

    def test_minutes(self, tmp_path):
        m = write_model(tmp_path / "m.json", dt_minutes=9.0)
        code, text = run("bound", "--model", m, "--k-star", "2", "--horizon", "5")
        steps, mins = (float(v.split()[0]) for v in field(text, "bound"))
        assert mins == pytest.approx(steps * 81, rel=1e-5)
        assert "min^2" in field(text, "bound")[1]

    def test_scenario_in_model_and_sidecar(self, tmp_path):
        m = write_model(tmp_path / "m.json", k_star=2, N=5)
        assert field(run("bound", "--model", m)[1], "N") == ["5"]
        side = tmp_path / "scen.json"
        side.write_text(json.dumps({"k_star": 1, "N": 7}))
        assert field(run("bound", "--model", m, "--scenario", str(side))[1], "N") == ["7"]

    @pytest.mark.parametrize("doc,msg", [
        ({"n": 2, "A": [0.5], "B": [1.0], "C": [1.0], "sigma2": 1.0}, "'A' must have 4 entries"),
        ({"n": 1, "A": [0.5], "B": [1.0], "C": ["x"], "sigma2": 1.0}, "'C'[0]"),
        ({"n": 1, "A": [0.5], "B": [1.0], "C": [1.0]}, "missing field 'sigma2'"),
        ({"n": 1, "A": [0.5], "B": [1.0], "C": [1.0], "sigma2": 1, "bogus": 1}, "unknown field"),
        ({"n": 1, "A": [0.5], "B": [1.0], "C": [1.0], "sigma2": -1.0}, "'sigma2' must be >= 0"),
    ])
    def test_config_errors(self, tmp_path, capsys, doc, msg):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(doc))
        assert run("bound", "--model", str(p), "--k-star", "1", "--horizon", "5")[0] == 2
        assert msg in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"n": 1,\n "A": [0.5,}')
        assert run("bound", "--model", str(p), "--k-star", "1", "--horizon", "5")[0] == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_scenario(self, model, capsys):
        assert run("bound", "--model", model)[0] == 2
        assert "--k-star" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("bound", "--model", str(tmp_path / "nope.json"), "--k-star", "1", "--horizon", "3")[0] == 2


class TestSimulateEstimate:
    def test_noiseless_round_trip(self, tmp_path):
        m = write_model(tmp_path / "m.json", n=2, A=[0.8, 0.1, -0.2, 0.6], B=[1.0, 0.5], C=[0.3, -1.0])
        data = tmp_path / "y.csv"
        assert run("simulate", "--model", m, "--k-star", "7", "--horizon", "30", "--out", str(data))[0] == 0
        code, text = run("estimate", "--model", m, "--data", str(data), "--out", str(tmp_path / "r.csv"))
        assert code == 0
        assert field(text, "k_hat") == ["7"]
        assert float(field(text, "u_hat")[0]) == pytest.approx(1.0)
        rows = (tmp_path / "r.csv").read_text().splitlines()
        assert rows[1] == "kappa,u_hat,residual"
        assert [int(r.split(",")[0]) for r in rows[2:]] == list(range(30))

    def test_noisy_matches_library(self, tmp_path):
        m = write_model(tmp_path / "m.json", sigma2=0.25)
        data = tmp_path / "y.csv"
        assert run("simulate", "--model", m, "--k-star", "10", "--horizon", "60", "--seed", "42",
                   "--noisy", "--out", str(data))[0] == 0
        sys_ = DiscreteLTISystem.scalar(0.5, 1.0, 1.0, 0.25)
        ref = simulate_noisy(sys_, StepScenario(10, 60), seed=42)
        np.testing.assert_array_equal(read_measurements(data), ref.values)
        _, text = run("estimate", "--model", m, "--data", str(data))
        assert int(field(text, "k_hat")[0]) == estimate_change(ref, sys_).k_hat

    def test_simulate_byte_identical(self, model, tmp_path):
        for name in ("a.csv", "b.csv"):
            run("simulate", "--model", model, "--k-star", "3", "--horizon", "20", "--seed", "5",
                "--noisy", "--out", str(tmp_path / name))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_zero_amplitude(self, model, tmp_path):
        out = tmp_path / "z.csv"
        run("simulate", "--model", model, "--k-star", "3", "--horizon", "10", "--amplitude", "0",
            "--out", str(out))
        assert np.all(read_measurements(out) == 0)

    def test_all_zero_fixed_amplitude(self, model, tmp_path):
        data = tmp_path / "y.csv"
        data.write_text("k,y\n" + "".join(f"{k},0\n" for k in range(11)))
        code, text = run("estimate", "--model", model, "--data", str(data), "--mode", "fixed:1",
                         "--out", str(tmp_path / "r.csv"))
        assert code == 0
        res = [float(r.split(",")[2]) for r in (tmp_path / "r.csv").read_text().splitlines()[2:]]
        # R(kappa) = ||s(kappa)||^2 shrinks as the step starts later
        assert all(x > y for x, y in zip(res, res[1:]))
        assert field(text, "k_hat") == ["9"]

    @pytest.mark.parametrize("body,msg", [
        ("k,y\n0,1\n1,abc\n", "line 3"),
        ("k,y\n0,1\n2,1\n", "line 3: expected k=1"),
        ("k,y\n0,1\n1\n", "line 3: expected 2 columns"),
        ("t,v\n0,1\n1,2\n", "header"),
    ])
    def test_malformed_csv(self, model, tmp_path, capsys, body, msg):
        data = tmp_path / "bad.csv"
        data.write_text(body)
        assert run("estimate", "--model", model, "--data", str(data))[0] == 2
        assert msg in capsys.readouterr().err

    def test_row_count_mismatch(self, model, tmp_path, capsys):
        data = tmp_path / "y.csv"
        data.write_text("k,y\n0,0\n1,1\n2,1.5\n")
        assert run("estimate", "--model", model, "--data", str(data), "--horizon", "5")[0] == 2
        assert "expected N+1 = 6 rows" in capsys.readouterr().err

    def test_unwritable(self, model, tmp_path):
        out = tmp_path / "missing_dir" / "y.csv"
        assert run("simulate", "--model", model, "--k-star", "1", "--horizon", "4", "--out", str(out))[0] == 2


class TestMonteCarlo:
    def test_report(self, tmp_path):
        m = write_model(tmp_path / "m.json", dt_minutes=9.0)
        hist = tmp_path / "h.csv"
        code, text = run("montecarlo", "--model", m, "--k-star", "10", "--horizon", "60",
                         "--trials", "500", "--seed", "3", "--out", str(hist))
        assert code == 0
        v_steps, v_min = (float(v.split()[0]) for v in field(text, "empirical_variance"))
        assert v_min == pytest.approx(81 * v_steps, rel=1e-5)
        b_steps = float(field(text, "bound")[0].split()[0])
        assert b_steps == pytest.approx(hcr_bound(DiscreteLTISystem.scalar(0.5, 1, 1, 1), 10, 60).bound_steps2,
                                        rel=1e-5)
        assert field(text, "bound_holds") == ["yes"]
        rows = hist.read_text().splitlines()
        assert rows[1] == "k,count"
        ks = [int(r.split(",")[0]) for r in rows[2:]]
        assert ks == sorted(ks)
        assert sum(int(r.split(",")[1]) for r in rows[2:]) == 500

    def test_tiny_noise(self, tmp_path):
        m = write_model(tmp_path / "m.json", sigma2=1e-12)
        code, text = run("montecarlo", "--model", m, "--k-star", "4", "--horizon", "20", "--trials", "50")
        assert code == 0
        assert field(text, "empirical_variance")[0] == "0 steps^2"


class TestSweep:
    def rows(self, path):
        lines = path.read_text().splitlines()
        header = lines[1].split(",")
        return [dict(zip(header, line.split(","))) for line in lines[2:]]

    def test_sigma2(self, model, tmp_path):
        out = tmp_path / "s.csv"
        assert run("sweep", "--model", model, "--k-star", "2", "--horizon", "20",
                   "--sweep", "sigma2:0.25:2.25:2", "--out", str(out))[0] == 0
        rows = self.rows(out)
        assert [float(r["sigma2"]) for r in rows] == [0.25, 2.25]
        assert float(rows[0]["bound_steps2"]) < float(rows[1]["bound_steps2"])

    def test_pole(self, model, tmp_path):
        out = tmp_path / "a.csv"
        run("sweep", "--model", model, "--k-star", "0", "--horizon", "20", "--sweep", "a:0.1:0.9:9",
            "--out", str(out))
        b = [float(r["bound_steps2"]) for r in self.rows(out)]
        assert len(b) == 9 and all(x > y for x, y in zip(b, b[1:]))

    def test_pole_multistate_rejected(self, tmp_path):
        m = write_model(tmp_path / "m.json", n=2, A=[0.5, 0, 0, 0.2], B=[1, 1], C=[1, 0])
        assert run("sweep", "--model", m, "--k-star", "0", "--horizon", "20", "--sweep", "a:0.1:0.9:3")[0] == 2

    def test_dt_fixed_window(self, tmp_path):
        # continuous pole f = 0.05 /min, 600 min window, change at 300 min
        m = tmp_path / "c.json"
        m.write_text(json.dumps({"continuous": {"f": 0.05, "h": 0.1, "c": 1.0},
                                 "sigma2": 0.25, "dt_minutes": 2.0}))
        out = tmp_path / "dt.csv"
        assert run("sweep", "--model", str(m), "--k-star", "150", "--horizon", "300",
                   "--sweep", "dt:2:0.25:8", "--out", str(out))[0] == 0
        rows = self.rows(out)
        for r in rows:
            assert int(r["N"]) * float(r["dt"]) == pytest.approx(600, abs=float(r["dt"]))
        phys = [float(r["bound_min2"]) for r in rows]
        assert all(x >= y for x, y in zip(phys, phys[1:]))

    def test_dt_needs_continuous(self, model):
        assert run("sweep", "--model", model, "--k-star", "1", "--horizon", "10", "--sweep", "dt:1:2:2")[0] == 2

    def test_horizon_with_variance(self, model, tmp_path, capsys):
        code, text = run("sweep", "--model", model, "--k-star", "5", "--horizon", "10",
                         "--sweep", "N:10:30:3", "--trials", "200")
        assert code == 0
        lines = text.splitlines()
        assert lines[0].split(",")[-3:] == ["variance_steps2", "variance_min2", "variance_stderr_steps2"]
        assert [line.split(",")[0] for line in lines[1:]] == ["10", "20", "30"]

    @pytest.mark.parametrize("spec", ["x:0:1:2", "a:0:1", "a:0:1:0", "N:1:2:3", "a:0:z:2"])
    def test_bad_spec(self, spec):
        with pytest.raises(ConfigError):
            parse_sweep(spec)


def test_bad_mode_is_usage_error(model):
    with pytest.raises(SystemExit) as exc:
        main(["bound", "--model", model, "--mode", "weird"])
    assert exc.value.code == 2


def test_module_entry_point(model):
    proc = subprocess.run([sys.executable, "-m", "privacy_hcr", "bound", "--model", model,
                           "--k-star", "2", "--horizon", "5"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.368263 steps^2" in proc.stdout


def test_sigma2_override(model):
    cfg = ScenarioConfig.load(model, sigma2_override=2.25, k_star=1, N=4)
    assert cfg.system.sigma2 == 2.25 and cfg.scenario().N == 4
