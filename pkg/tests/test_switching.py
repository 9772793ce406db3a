import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchreg.closedform import counterexample_spec, oracle_pair
from switchreg.grid import GridMismatchError, GridSpec, laplacian, sample
from switchreg.switching import (
    LABEL_NAMES,
    ContinuationError,
    JacobianSingularError,
    PenaltyFunction,
    ProblemSpec,
    SolutionPair,
    SolverConfig,
    constraint_violation,
    construct_nonminimal,
    continuation_solve,
    epsilon_sweep,
    example2_spec,
    partition_sets,
    read_pair_csv,
    residual_report,
    solve_minimal,
    solve_penalized,
    validate_spec,
    write_pair_csv,
)
from switchreg.switching.analysis import L_BOUNDARY, L0, OMEGA1, OMEGA2

G17 = GridSpec.square(17)
G33 = GridSpec.square(33)


def zero_spec(grid=G17, psi="1"):
    return ProblemSpec("0", "0", psi, psi, "0", "0", grid=grid)


# --- validation ---------------------------------------------------------------

def test_validate_zero_costs_pass():
    assert validate_spec(zero_spec(psi="0")).passed


def test_validate_negative_loop():
    rep = validate_spec(ProblemSpec("0", "0", "-1", "0", "0", "0", grid=G17))
    assert not rep.passed and not rep.loop_ok
    assert rep.loop_min == -1.0
    assert "loop violation" in rep.messages()[0]


def test_validate_boundary_compatibility():
    rep = validate_spec(ProblemSpec("0", "0", "0.1", "0.1", "1", "0", grid=G17))
    assert rep.loop_ok and not rep.boundary_ok
    assert rep.boundary_min == pytest.approx(-0.9)


def test_validate_example2_data_roundoff():
    spec = example2_spec("0.2*sin(x)*cos(y)", 1.0, "x*y", G33)
    assert validate_spec(spec).passed


def test_spec_scale_and_tolerances():
    spec = ProblemSpec("-3", "0", "0.5", "0.5", "x", "x", grid=G17)
    assert spec.scale == 4.0
    assert spec.tol_sys == pytest.approx(50 * G17.h**2 * 4.0)
    assert spec.tau == pytest.approx(10 * G17.h**2 * 4.0)
    assert float(spec.describe()["f1"]) == -3.0


# --- penalty --------------------------------------------------------------------

def test_beta_examples():
    pf = PenaltyFunction(eta=2.0)
    assert pf.beta(1.0) == 0.0
    assert pf.beta(-1.0) == pytest.approx(-2.0 / 8)
    assert pf.beta(-4.0) == pytest.approx(-3.0)
    assert pf.beta_eps(0.5, -0.5) == pf.beta(-1.0)
    with pytest.raises(ValueError):
        PenaltyFunction(eta=0.0)


@given(st.floats(-50, 50, allow_nan=False).filter(lambda v: v >= 0 or v < -1e-100), st.floats(0.1, 5))
def test_beta_conditions(s, eta):
    pf = PenaltyFunction(eta)
    if s >= 0:
        assert pf.beta(s) == 0.0
    else:
        assert pf.beta(s) < 0
        assert 0 < pf.dbeta(s) <= 1
    h = 1e-6
    if abs(s) > 2 * h and abs(s + eta) > 2 * h:
        fd = (pf.beta(s + h) - pf.beta(s - h)) / (2 * h)
        assert fd == pytest.approx(pf.dbeta(s), abs=1e-5)


def test_beta_unbounded_below():
    assert PenaltyFunction().beta(-1e12) < -1e11


# --- penalized path -----------------------------------------------------------------

def test_penalized_trivial():
    p = solve_penalized(zero_spec(), 0.1)
    assert p.u1.max_abs() == 0.0 and p.u2.max_abs() == 0.0
    assert p.method == "penalized" and p.eps_schedule == (0.1,)


def test_penalized_rejects_bad_eps():
    with pytest.raises(ValueError):
        solve_penalized(zero_spec(), 0.0)


SMOOTH = dict(f1="-1", f2="0", psi1="0.05+0.02*x^2", psi2="0.05+0.02*x^2", g1="0", g2="0")


def smooth_spec(n=33, L=2.0):
    return ProblemSpec(**SMOOTH, grid=GridSpec.square(n, -L, L))


def test_penalized_residual_and_boundary():
    spec = smooth_spec()
    p = solve_penalized(spec, 0.05)
    d = spec.data
    bnd = spec.grid.boundary_mask()
    assert np.array_equal(p.u1.values[bnd], d.g1.values[bnd])
    pf = PenaltyFunction()
    r1 = (d.f1 - laplacian(p.u1)).values + pf.beta_eps(0.05, (p.u1 - p.u2 + d.psi1).values)
    assert np.nanmax(np.abs(r1)) <= 1e-10 * spec.scale + 1e-9


def test_lemma1_interior_bounds():
    spec = smooth_spec()
    delta = 10 * spec.grid.h**2 * spec.scale
    d = spec.data
    fmax = max(d.f1.max_abs(), d.f2.max_abs())
    upper = spec.laplacian_bound()
    for eps in (1.0, 0.1, 0.01):
        p = solve_penalized(spec, eps)
        for u in (p.u1, p.u2):
            neg_lap = -laplacian(u)
            assert neg_lap.min() >= -fmax - delta
            assert neg_lap.max() <= upper + delta


def test_continuation_single_stage_equals_direct():
    spec = smooth_spec()
    a = continuation_solve(spec, [1.0])
    b = solve_penalized(spec, 1.0)
    assert a.max_diff(b) == 0.0


def test_continuation_schedule_checks():
    with pytest.raises(ValueError, match="not decreasing"):
        continuation_solve(zero_spec(), [0.1, 1.0])
    with pytest.raises(ValueError):
        continuation_solve(zero_spec(), [])


def test_continuation_cauchy_behaviour():
    spec = example2_spec("0.2*sin(x)*cos(y)", 1.0, "0", G33)
    sweep = epsilon_sweep(spec, [1.0, 0.1, 0.01, 0.001])
    changes = [r["change_from_previous"] for r in sweep["rows"][1:]]
    assert changes[0] > changes[1] > changes[2]


def test_continuation_reports_failing_eps():
    spec = smooth_spec()
    cfg = SolverConfig(max_newton=1)
    with pytest.raises(ContinuationError) as exc:
        continuation_solve(spec, [1.0, 1e-6], cfg)
    assert exc.value.eps in (1.0, 1e-6)


def test_jacobian_error_is_runtime_error():
    assert issubclass(JacobianSingularError, RuntimeError)


def test_violation_rate_linear():
    spec = smooth_spec(n=33)
    sweep = epsilon_sweep(spec, [2.0**-k for k in range(1, 9)])
    assert 0.8 <= sweep["slope"] <= 1.2 and sweep["r2"] >= 0.95


# --- minimal path -----------------------------------------------------------------

def test_minimal_trivial():
    p = solve_minimal(zero_spec())
    assert p.u1.max_abs() == 0.0 and p.u2.max_abs() == 0.0


def test_minimal_counterexample_matches_oracle():
    errs = []
    for n in (33, 65):
        spec = counterexample_spec(n)
        p = solve_minimal(spec)
        errs.append(p.max_diff(oracle_pair(spec.grid)))
        rep = residual_report(spec, p)
        assert rep.minimal_ok
    assert errs[1] < errs[0]


def test_minimal_third_equation_and_bound():
    spec = smooth_spec()
    rep = residual_report(spec, solve_minimal(spec)).to_dict()
    assert rep["eq3_max"] <= spec.tol_sys
    assert rep["laplacian_bound_ok"]
    assert rep["theta1_min"] >= -1e-12 and rep["theta2_min"] >= -1e-12


def test_minimal_agrees_with_penalized():
    spec = smooth_spec(n=33)
    pm = solve_minimal(spec)
    pp = continuation_solve(spec, [2.0**-k for k in range(0, 11)])
    assert pm.max_diff(pp) <= 5 * (2.0**-10 + spec.grid.h**2) * spec.scale


# --- non-minimal family ---------------------------------------------------------------

def test_nonminimal_trivial():
    p = construct_nonminimal("0", 1.0, "0", "0", G33)
    assert np.array_equal(p.u1.values, p.u2.values)
    assert np.allclose(-laplacian(p.u1).values[1:-1, 1:-1], 1.0)


def test_nonminimal_identity_to_rounding():
    p = construct_nonminimal("x", 1.0, "0", "0", G33)
    X, _ = G33.mesh()
    gap = p.u1.values - p.u2.values + X
    assert np.all(np.abs(gap) <= 4 * np.finfo(float).eps * (np.abs(p.u1.values) + np.abs(X)))


def test_nonminimal_members_differ():
    a = construct_nonminimal("x", 1.0, "0", "0", G33)
    b = construct_nonminimal("x", 1.0, "1", "0", G33)
    assert a.max_diff(b) > 0.1


def test_nonminimal_preconditions():
    with pytest.raises(ValueError, match="2M"):
        construct_nonminimal("10*x^2", 1.0, "0", "0", G33)
    with pytest.raises(ValueError, match="non-negative"):
        construct_nonminimal("0", 1.0, "-1", "0", G33)


def test_minimality_against_family():
    psi = "0.2*sin(x)*cos(y)"
    spec = example2_spec(psi, 1.0, "0", G33)
    pm = solve_minimal(spec)
    tol = 1e-6 * spec.scale
    for q in ("0", "1", "abs(x*y)"):
        v = construct_nonminimal(psi, 1.0, q, "0", G33)
        assert np.all(pm.u1.values <= v.u1.values + tol)
        assert np.all(pm.u2.values <= v.u2.values + tol)
        rep = residual_report(spec, v)
        assert rep.system_ok
    big = residual_report(spec, construct_nonminimal(psi, 1.0, "1", "0", G33))
    assert big.eq3.max_abs() >= 0.5


# --- residuals and partitions -------------------------------------------------------------

def test_residual_zero():
    spec = zero_spec(psi="0")
    z = sample("0", G17)
    rep = residual_report(spec, SolutionPair(z, z, method="minimal")).to_dict()
    assert rep["eq1_max"] == rep["eq2_max"] == rep["eq3_max"] == 0.0


def test_residual_grid_mismatch():
    z = sample("0", G33)
    with pytest.raises(GridMismatchError):
        residual_report(zero_spec(), SolutionPair(z, z, method="minimal"))


def test_pair_validation():
    with pytest.raises(ValueError):
        SolutionPair(sample("0", G17), sample("0", G17), method="magic")
    with pytest.raises(GridMismatchError):
        SolutionPair(sample("0", G17), sample("0", G33), method="minimal")


def test_partition_no_loop():
    spec = zero_spec(psi="0.5")
    part = partition_sets(spec, solve_minimal(spec))
    counts = part.counts()
    assert counts["L0"] == 0 and counts["boundary_of_L"] == 0
    assert part.meeting_points == ()


def test_partition_counterexample():
    spec = counterexample_spec(65)
    part = partition_sets(spec, solve_minimal(spec))
    g = spec.grid
    X, Y = g.mesh()
    lab = part.labels
    assert not (lab == L0).any()
    assert np.argwhere(lab == L_BOUNDARY).tolist() == [[32, 32]]
    q1 = (X > 2 * g.h) & (Y > 2 * g.h) & g.interior_mask()
    q3 = (X < -2 * g.h) & (Y < -2 * g.h) & g.interior_mask()
    assert np.all(lab[q1] == OMEGA1) and np.all(lab[q3] == OMEGA2)
    assert (32, 32) in part.meeting_points
    assert all(abs(i - 32) <= 2 and abs(j - 32) <= 2 for i, j in part.meeting_points)
    assert part.conflicts == 0
    assert set(part.to_dict()["counts"]) == set(LABEL_NAMES.values())


def test_partition_zero_loop_interior():
    spec = example2_spec("0.2*sin(x)*cos(y)", 1.0, "0", G17)
    part = partition_sets(spec, solve_minimal(spec))
    # the zero-loop set is the whole closed square, so every interior node is in its interior
    assert part.counts()["L0"] == (G17.nx - 2) * (G17.ny - 2)
    assert part.counts()["boundary_of_L"] == 0


def test_pair_csv_round_trip(tmp_path):
    spec = smooth_spec(n=17)
    p = solve_minimal(spec)
    path = tmp_path / "pair.csv"
    write_pair_csv(spec, p, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,u1,u2,theta1,theta2,lapu1,lapu2"
    assert lines[1].endswith("nan,nan")
    back = read_pair_csv(path, spec)
    assert back.max_diff(p) == 0.0


def test_constraint_violation_nonnegative():
    spec = zero_spec()
    assert constraint_violation(spec, solve_minimal(spec)) == 0.0
