import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from saddlelab.errors import (
    MissingQBasisError,
    NotSpdError,
    SingularSystemError,
)
from saddlelab.penalty import (
    error_report_csv,
    penalty_error_check,
    penalty_solve,
    penalty_solve_weighted,
    penalty_stability_check,
    stability_report_csv,
)
from saddlelab.problems import SaddleProblem, kkt_solve, to_div_gram

import oracles


def toy_problem():
    return SaddleProblem(
        A=np.eye(2), Dc=np.array([[0.0, 1.0]]), M_V=np.eye(2),
        M_Q=np.array([[1.0]]), F=np.array([1.0, 2.0]), Gq=np.array([3.0]),
    )


def oscillator_problem(a0=1.0, a1=-1.0, beta=1.0):
    return SaddleProblem(
        A=np.diag([a0, a1]), Dc=np.array([[0.0, beta]]), M_V=np.eye(2),
        M_Q=np.array([[1.0]]), F=np.array([0.0, 1.0]), Gq=np.array([0.0]),
    )


def random_spd_problem(rng, n, m, g_scale=1.0):
    return SaddleProblem(
        A=oracles.random_spd(rng, n, cond=20.0),
        Dc=rng.standard_normal((m, n)),
        M_V=oracles.random_spd(rng, n, cond=4.0),
        M_Q=oracles.random_spd(rng, m, cond=4.0),
        F=rng.standard_normal(n),
        Gq=g_scale * rng.standard_normal(m),
    )


# ------------------------------------------------------------- penalty_solve

@pytest.mark.parametrize("path", ["coupled", "eliminated", "both"])
def test_penalty_solve_toy(path):
    sol = penalty_solve(toy_problem(), 0.5, path=path)
    assert_allclose(sol.u, [1.0, 8.0 / 3.0], rtol=1e-12)
    assert_allclose(sol.p, [-2.0 / 3.0], rtol=1e-12)


def test_penalty_singular_at_critical_eps():
    with pytest.raises(SingularSystemError):
        penalty_solve(oscillator_problem(), 1.0, path="eliminated")
    with pytest.raises(SingularSystemError):
        penalty_solve(oscillator_problem(), 1.0, path="coupled")


def test_penalty_oscillator_below_critical():
    sol = penalty_solve(oscillator_problem(), 0.5)
    assert_allclose(sol.u, [0.0, 1.0], atol=1e-12)
    assert_allclose(sol.p, [2.0], rtol=1e-12)


def test_penalty_singular_scan_brackets_critical_eps():
    p = oscillator_problem(1.0, -1.0, 1.0)
    for eps in (0.9, 0.95, 1.05, 1.1):
        penalty_solve(p, eps)  # solvable on either side
    with pytest.raises(SingularSystemError):
        penalty_solve(p, 1.0)


def test_penalty_rejects_bad_args():
    with pytest.raises(ValueError):
        penalty_solve(toy_problem(), 0.0)
    with pytest.raises(ValueError):
        penalty_solve(toy_problem(), 1.0, path="fast")


@settings(deadline=None, max_examples=20)
@given(st.floats(1e-6, 1e3))
def test_penalty_paths_agree_toy(eps):
    sol = penalty_solve(toy_problem(), eps, path="both")
    elim = penalty_solve(toy_problem(), eps, path="eliminated")
    assert_allclose(sol.u, elim.u, rtol=1e-9, atol=1e-12)


def test_penalty_paths_agree_large_random():
    rng = np.random.default_rng(101)
    p = random_spd_problem(rng, 50, 12)
    for eps in (1e-3, 1.0):
        sol = penalty_solve(p, eps, path="both")
        assert sol.u.shape == (50,)


def test_penalty_div_gram_form():
    p = toy_problem()
    form = to_div_gram(p)
    sol = penalty_solve(form, 0.5, path="eliminated", want_pressure=False)
    assert_allclose(sol.u, [1.0, 8.0 / 3.0], rtol=1e-12)
    assert sol.p is None
    with pytest.raises(MissingQBasisError):
        penalty_solve(form, 0.5, path="eliminated")
    with pytest.raises(MissingQBasisError):
        penalty_solve(form, 0.5, path="both", want_pressure=False)


def test_eliminated_matches_kkt_over_grid():
    rng = np.random.default_rng(7)
    p = random_spd_problem(rng, 9, 4)
    for eps in (1e-4, 1e-2, 1.0, 10.0):
        ref = kkt_solve(p, eps)
        elim = penalty_solve(p, eps, path="eliminated")
        scale = np.linalg.norm(ref.u)
        assert np.linalg.norm(ref.u - elim.u) <= 1e-10 * scale


# ---------------------------------------------------- penalty_solve_weighted

def test_weighted_reduces_to_plain():
    p = toy_problem()
    res = penalty_solve_weighted(p, 0.5, p.M_Q)
    plain = penalty_solve(p, 0.5, path="coupled")
    assert_allclose(res.solution.u, plain.u, rtol=1e-12)
    assert_allclose(res.solution.p, plain.p, rtol=1e-12)
    assert_allclose([res.kappa, res.M_c], [1.0, 1.0], atol=1e-12)


def test_weighted_toy_hand_values():
    res = penalty_solve_weighted(toy_problem(), 1.0, np.array([[2.0]]))
    assert_allclose(res.solution.u, [1.0, 7.0 / 3.0], rtol=1e-12)
    assert_allclose(res.solution.p, [-1.0 / 3.0], rtol=1e-12)
    assert_allclose([res.kappa, res.M_c], [2.0, 2.0], rtol=1e-12)
    assert_allclose(res.M_D_c, 1.0 / math.sqrt(2.0), rtol=1e-12)
    assert_allclose(res.beta_c, 1.0 / math.sqrt(2.0), rtol=1e-12)


def test_weighted_rejects_indefinite_weight():
    with pytest.raises(NotSpdError):
        penalty_solve_weighted(toy_problem(), 1.0, np.array([[-1.0]]))


# ------------------------------------------------------------ stability check

def test_stability_toy_grid():
    reports = penalty_stability_check(toy_problem(), [1e-3, 1e-1, 1.0])
    assert all(r.ok for r in reports)


def test_stability_random_a3_problems():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(4, 11))
        m = int(rng.integers(1, n))
        p = random_spd_problem(rng, n, m)
        reports = penalty_stability_check(p, [1e-3, 1e-1, 1.0])
        for r in reports:
            assert r.ok, (
                f"bound violated at eps={r.eps}: z {r.norm_z}/{r.bound_z}, "
                f"zt {r.norm_ztilde}/{r.bound_ztilde}, p {r.norm_p}/{r.bound_p}"
            )


def test_stability_includes_eps_zero():
    reports = penalty_stability_check(toy_problem(), [0.0])
    assert reports[0].ok
    assert_allclose(reports[0].solution.u, [1.0, 3.0], atol=1e-12)


def test_stability_csv_round():
    reports = penalty_stability_check(toy_problem(), [0.5])
    text = stability_report_csv(reports)
    lines = text.strip().split("\n")
    assert lines[0].startswith("eps,norm_z")
    assert len(lines) == 2
    assert lines[1].split(",")[0] == "0.5"


# --------------------------------------------------------------- error check

def test_error_toy_tight_pressure_bound():
    rows = penalty_error_check(toy_problem(), [0.5])
    r = rows[0]
    assert r.z_match
    assert_allclose(r.err_p, 1.0 / 3.0, rtol=1e-10)
    assert_allclose(r.bound_p, 1.0 / 3.0, rtol=1e-10)
    assert r.pass_p and r.pass_ztilde
    assert_allclose(r.err_ztilde, 1.0 / 3.0, rtol=1e-10)


def test_error_pressure_linear_in_eps():
    grid = [1e-2, 1e-4, 1e-6]
    rows = penalty_error_check(toy_problem(), grid)
    errs = [r.err_p for r in rows]
    slope = np.polyfit(np.log10(grid), np.log10(errs), 1)[0]
    assert slope >= 0.99


def test_error_kernel_supported_load_invariant():
    # G = 0 and a load that only acts on the constraint kernel: the
    # penalized solution equals the reference for every eps.
    p = SaddleProblem(
        A=np.eye(2), Dc=np.array([[0.0, 1.0]]), M_V=np.eye(2),
        M_Q=np.array([[1.0]]), F=np.array([1.0, 0.0]), Gq=np.array([0.0]),
    )
    rows = penalty_error_check(p, [1e-3, 1.0, 100.0])
    for r in rows:
        assert r.z_match
        assert r.err_ztilde <= 1e-12
        assert r.err_p <= 1e-12
        assert r.ok


def test_error_kernel_supported_load_random():
    # A load of the form A @ z with z in the constraint kernel makes the
    # exact solution (z, 0), which every penalized solve reproduces.
    rng = np.random.default_rng(31)
    n, m = 8, 3
    A = oracles.random_spd(rng, n, cond=10.0)
    Dc = rng.standard_normal((m, n))
    Z = oracles.nullspace_oracle(Dc)
    F = A @ (Z @ rng.standard_normal(Z.shape[1]))
    p = SaddleProblem(
        A=A, Dc=Dc, M_V=np.eye(n), M_Q=np.eye(m), F=F, Gq=np.zeros(m),
    )
    rows = penalty_error_check(p, [1e-2, 1.0])
    for r in rows:
        assert r.ok, (r.err_ztilde, r.bound_ztilde, r.err_p, r.bound_p)


def test_error_random_spd_bounds():
    rng = np.random.default_rng(41)
    for _ in range(10):
        n = int(rng.integers(4, 10))
        m = int(rng.integers(1, n))
        p = random_spd_problem(rng, n, m)
        rows = penalty_error_check(p, [1e-4, 1e-2, 1.0])
        for r in rows:
            assert r.ok, (
                f"eps={r.eps}: zt {r.err_ztilde}/{r.bound_ztilde}, "
                f"p {r.err_p}/{r.bound_p}"
            )
            # SPD-class refinement: the first pressure branch alone holds.
            assert r.err_p <= r.bound_p * (1 + 1e-8) + 1e-12


def test_error_reports_energy_seminorm():
    rows = penalty_error_check(toy_problem(), [0.5])
    # For the identity form the energy seminorm equals the V-norm.
    assert_allclose(rows[0].err_ztilde_a, rows[0].err_ztilde, rtol=1e-12)


def test_error_csv_layout():
    rows = penalty_error_check(toy_problem(), [0.5, 0.25])
    text = error_report_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0].startswith("eps,z_deviation")
    assert len(lines) == 3
