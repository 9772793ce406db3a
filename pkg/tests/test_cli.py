import json
import math

import pytest

from switchreg.cli import DEFAULT_SCHEDULE, ConfigError, config_from_dict, load_config, main


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


SMOOTH = """
[problem]
f1 = "-1"
f2 = "0"
psi1 = "0.05+0.02*x^2"
psi2 = "0.05+0.02*x^2"
xmin = -2.0
xmax = 2.0
ymin = -2.0
ymax = 2.0
nx = 33
ny = 33
"""


def test_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "[problem]\n"))
    assert cfg.problem.f1 == "0" and cfg.problem.nx == 65
    assert cfg.solver.method == "minimal" and cfg.solver.eps_schedule == DEFAULT_SCHEDULE
    assert cfg.output.formats == ("csv", "json")
    assert cfg.regularity.radii is None


@pytest.mark.parametrize("raw,match", [
    ({"problem": {}, "solver": {"eps_schedule": [0.1, 0.2]}}, "schedule not decreasing"),
    ({"problem": {"f1": "x+"}}, "problem.f1"),
    ({"problem": {"nx": "a"}}, "problem.nx"),
    ({"problem": {"colour": 1}}, "problem.colour"),
    ({"problem": {}, "extra": {}}, "extra"),
    ({"solver": {}}, "problem"),
    ({"problem": {}, "solver": {"method": "newton"}}, "solver.method"),
    ({"problem": {}, "regularity": {"radii": [0.1, 0.2, 0.3, 0.4]}}, "regularity.radii"),
])
def test_config_errors_name_field(raw, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(raw)


def test_numeric_expressions_accepted():
    cfg = config_from_dict({"problem": {"f1": 2, "psi1": 0.5}})
    assert cfg.problem.f1 == "2.0" and cfg.problem.psi1 == "0.5"


def test_missing_config_file_exits_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 2


def test_toml_syntax_error_exits_2(tmp_path):
    assert main(["solve", "--config", str(write(tmp_path, "[problem\n")), "--out", str(tmp_path)]) == 2


def test_negative_cost_loads_but_solve_fails(tmp_path, capsys):
    path = write(tmp_path, '[problem]\npsi1 = "-1"\nnx = 9\nny = 9\n')
    load_config(path)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == 1
    assert "validation failed" in capsys.readouterr().err
    assert json.loads((tmp_path / "o" / "residuals.json").read_text())["passed"] is False


def test_solve_zero_problem(tmp_path):
    path = write(tmp_path, '[problem]\npsi1 = "1"\npsi2 = "1"\nnx = 9\nny = 9\n')
    out = tmp_path / "o"
    assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == 0
    lines = (out / "solution_minimal.csv").read_text().splitlines()
    assert lines[0] == "x,y,u1,u2,theta1,theta2,lapu1,lapu2"
    assert len(lines) == 82
    for line in lines[1:]:
        vals = line.split(",")
        assert float(vals[2]) == 0.0 and float(vals[3]) == 0.0
    rep = json.loads((out / "residuals.json").read_text())
    assert rep["passed"] and rep["config"]["problem"]["nx"] == 9


def test_solve_both_and_residuals_round_trip(tmp_path):
    path = write(tmp_path, SMOOTH + "[solver]\nmethod = \"both\"\neps_schedule = [1.0, 0.25, 0.0625, 0.015625]\n")
    out = tmp_path / "o"
    assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == 0
    rep = json.loads((out / "residuals.json").read_text())
    assert set(rep["results"]) == {"minimal", "penalized"}
    assert rep["minimal_vs_penalized_max_diff"] < 0.1
    code = main(["residuals", "--config", str(path), "--solution", str(out / "solution_minimal.csv"),
                 "--out", str(tmp_path / "r"), "--quiet"])
    assert code == 0


def test_residuals_grid_mismatch_exits_2(tmp_path):
    path = write(tmp_path, SMOOTH)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == 0
    code = main(["residuals", "--config", str(path), "--n", "17", "--solution", str(out / "solution_minimal.csv"),
                 "--out", str(tmp_path / "r"), "--quiet"])
    assert code == 2


def test_sweep_eps(tmp_path):
    path = write(tmp_path, SMOOTH + "[solver]\neps_schedule = [0.5, 0.25, 0.125, 0.0625, 0.03125]\n")
    assert main(["sweep-eps", "--config", str(path), "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "sweep.json").read_text())
    assert len(rep["rows"]) == 5 and 0.8 <= rep["slope"] <= 1.2


def test_nonminimal(tmp_path):
    path = write(tmp_path, '[problem]\nnx = 33\nny = 33\n[nonminimal]\npsi = "0.2*sin(x)*cos(y)"\nM = 1.0\n'
                           'q = ["1", "abs(x*y)"]\n')
    assert main(["nonminimal", "--config", str(path), "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "nonminimal.json").read_text())
    assert all(m["minimal_below"] for m in rep["members"])
    assert all(m["third_equation_violation"] >= 0.5 for m in rep["members"])


def test_nonminimal_requires_large_M(tmp_path, capsys):
    path = write(tmp_path, '[problem]\nnx = 17\nny = 17\n[nonminimal]\npsi = "x^2"\nM = 1.0\n')
    assert main(["nonminimal", "--config", str(path), "--out", str(tmp_path), "--quiet"]) == 2
    assert "2M" in capsys.readouterr().err


def test_regularity_on_solution(tmp_path):
    path = write(tmp_path, SMOOTH.replace("nx = 33\nny = 33", "nx = 129\nny = 129")
                 + "[regularity]\npoints = [[0.0, 0.0], [0.5, 0.5]]\nradii = [0.8, 0.6, 0.45, 0.35, 0.25]\n")
    assert main(["regularity", "--config", str(path), "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "regularity.json").read_text())
    assert [r["center"] for r in rep["reports"]] == [[0.0, 0.0], [0.5, 0.5]]
    assert all(r["bmo_ok"] for r in rep["reports"])


def test_counterexample_small_grid(tmp_path):
    assert main(["counterexample", "--n", "65", "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "counterexample.json").read_text())
    assert rep["passed"] and rep["rho_excl"] == pytest.approx(max(0.05, 4 * 2 / 64))
    assert rep["minimal_vs_oracle_max_error"] < 1e-3
    assert math.isfinite(rep["tol"])


def test_counterexample_bad_rho_exits_2(tmp_path):
    assert main(["counterexample", "--n", "33", "--rho", "0.01", "--out", str(tmp_path), "--quiet"]) == 2


def test_command_requires_config(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("command", [["counterexample", "--n", "65"], ["solve"]])
def test_byte_identical_reruns(tmp_path, command):
    cfg = write(tmp_path, SMOOTH)
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        extra = [] if command[0] == "counterexample" else ["--config", str(cfg)]
        assert main(command + extra + ["--out", str(out), "--quiet"]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1] and outputs[0]
