import csv
import json

import pytest

from diracwalk import cli
from diracwalk.config import OUT_ENV, ConfigError, RunConfig
from diracwalk.report import write_csv


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = cli.main([*args, "--out", str(out)])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text(encoding="utf-8"))


def test_defaults(monkeypatch):
    monkeypatch.delenv(OUT_ENV, raising=False)
    cfg = cli.parse_config(["units"])
    assert (cfg.mu, cfg.epsilon, cfg.Lambda, cfg.nt, cfg.nx, cfg.seed) == (0.1, 0.0, 100, 256, 256, 42)
    assert cfg.out == "diracwalk-out"


def test_env_sets_output_dir(monkeypatch):
    monkeypatch.setenv(OUT_ENV, "/tmp/somewhere")
    assert cli.parse_config(["units"]).out == "/tmp/somewhere"


def test_flag_overrides_file(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("mu = 0.1\nlambda = 7\n", encoding="utf-8")
    cfg = cli.parse_config(["units", "--config", str(f), "--mu", "0.5"])
    assert cfg.mu == 0.5 and cfg.Lambda == 7


def test_file_with_section_and_tolerance(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[run]\nepsilon = 0.05\ntol.telescoping = 1e-10\n", encoding="utf-8")
    cfg = cli.parse_config(["units", "--config", str(f)])
    assert cfg.epsilon == 0.05 and cfg.tolerances == {"telescoping": 1e-10}


@pytest.mark.parametrize("text", ["bogus = 1\n", "[other]\nmu = 0.2\n", "mu = abc\n"])
def test_bad_file_rejected(tmp_path, text):
    f = tmp_path / "run.ini"
    f.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        cli.parse_config(["units", "--config", str(f)])


@pytest.mark.parametrize("args", [
    ["units", "--mu", "1.5"],
    ["units", "--epsilon", "1"],
    ["units", "--nt", "255"],
    ["units", "--state", "5"],
    ["units", "--tol", "nonsense=1"],
    ["units", "--tol", "telescoping"],
    ["units", "--roi-t", "5"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2(tmp_path, args):
    assert cli.main(args + ["--out", str(tmp_path)] if args else args) == 2


def test_mu_out_of_range_exit_code(tmp_path):
    code, _ = run(tmp_path, "units", "--mu", "1.5")
    assert code == 2


def test_derive(tmp_path, capsys):
    code, out = run(tmp_path, "derive")
    assert code == 0
    doc = json.loads((out / "derive.json").read_text(encoding="utf-8"))
    assert doc["hops"]["1,-1"][0][1] == "1/2"
    assert doc["unique"] and doc["matches_canonical"]
    assert all(v == 0 for v in doc["report"]["residuals"].values())
    m = manifest(out)
    assert m["status"] == "ok"
    assert "heaviside" in m["conventions"]


def test_dispersion_csv(tmp_path):
    code, out = run(tmp_path, "dispersion", "--mu", "0.05")
    assert code == 0
    with open(out / "dispersion.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["k", "omega_lattice", "omega_einstein", "rel_error", "in_regime"]
    small = [float(r["rel_error"]) for r in rows if abs(float(r["k"])) <= 0.1]
    assert small and max(small) <= 0.01


def test_evolve_outputs(tmp_path):
    code, out = run(tmp_path, "evolve", "--nt", "32", "--nx", "32", "--lambda", "10", "--mu", "0.5")
    assert code == 0
    for name, header in [("pbar.csv", "t_index,x_index,p1,p2,p3,p4"),
                         ("psi.csv", "t_index,x_index,psi1,psi2,psi3,psi4"),
                         ("currents.csv", "t_index,x_index,rho,j")]:
        lines = (out / name).read_text(encoding="utf-8").split("\n")
        assert lines[0] == header
        assert len(lines) == 32 * 32 + 2  # header, rows, trailing newline
    m = manifest(out)
    assert m["results"]["telescoping_residual"] <= 1e-12


def test_walk_outputs(tmp_path):
    code, out = run(tmp_path, "walk", "--n-walkers", "200", "--lambda", "30", "--nt", "64", "--nx", "64",
                    "--epsilon", "0.05")
    assert code == 0
    assert (out / "trajectory.csv").read_text(encoding="utf-8").startswith("lambda,t_index,x_index,state\n")
    obs = (out / "observation.csv").read_text(encoding="utf-8").splitlines()
    assert obs[0] == "t_index,x_observed,lambda_last"
    ts = [r.split(",")[0] for r in obs[1:]]
    assert len(ts) == len(set(ts))
    assert (out / "histogram.csv").exists()


def test_walk_requires_wrap_free(tmp_path):
    code, out = run(tmp_path, "walk", "--nt", "32", "--lambda", "20")
    assert code == 2
    m = manifest(out)
    assert m["status"] == "error" and "wrap-free" in m["error"]


def test_failed_check_exit_1(tmp_path):
    code, out = run(tmp_path, "evolve", "--nt", "16", "--nx", "16", "--lambda", "5", "--tol", "telescoping=-1")
    assert code == 1
    assert manifest(out)["status"] == "failed"


def test_units(tmp_path):
    code, out = run(tmp_path, "units", "--mu", "0.1")
    assert code == 0
    assert manifest(out)["results"]["dx_m"] == pytest.approx(3.8616e-14, rel=1e-4)


def test_manifest_excludes_output_dir_and_timing(tmp_path):
    code, out = run(tmp_path, "units")
    text = (out / "manifest.json").read_text(encoding="utf-8")
    assert str(out) not in text and "wall_clock" not in text
    assert "wall_clock_s" in json.loads((out / "timing.json").read_text(encoding="utf-8"))


def test_empty_table_header_only(tmp_path):
    p = write_csv(tmp_path / "e.csv", ("a", "b"), [])
    assert p.read_bytes() == b"a,b\n"


def test_float_format(tmp_path):
    p = write_csv(tmp_path / "f.csv", ("v",), [(0.1,), (True,), (3,)])
    assert p.read_text(encoding="utf-8") == "v\n0.10000000000000001\ntrue\n3\n"


def test_echo_fills_site():
    assert RunConfig(nt=8, nx=12).echo()["x0"] == 6
