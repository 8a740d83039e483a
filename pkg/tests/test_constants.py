import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from saddlelab.constants import (
    AppendixReport,
    SpectralBase,
    appendix_checks,
    base_constants,
    classify_assumption,
    constants_to_json,
    continuity_constants,
    decompose_kernel,
    derived_constants,
    dz_spectrum,
    hat_complement_basis,
    hat_dual_norm,
    inf_sup_beta,
    kernel_alpha,
    kernel_dual_norm,
    multiplier_dual_norm,
)
from saddlelab.errors import NotApplicableError, RateUndefinedError
from saddlelab.problems import SaddleProblem, to_div_gram

import oracles


def make_problem(A, Dc, M_V=None, M_Q=None, F=None, Gq=None):
    A = np.asarray(A, dtype=float)
    Dc = np.asarray(Dc, dtype=float)
    n, m = A.shape[0], Dc.shape[0]
    return SaddleProblem(
        A=A,
        Dc=Dc,
        M_V=np.eye(n) if M_V is None else M_V,
        M_Q=np.eye(m) if M_Q is None else M_Q,
        F=np.zeros(n) if F is None else np.asarray(F, dtype=float),
        Gq=np.zeros(m) if Gq is None else np.asarray(Gq, dtype=float),
    )


def toy_problem():
    return make_problem(np.eye(2), [[0.0, 1.0]], F=[1.0, 2.0], Gq=[3.0])


# ------------------------------------------------------ continuity constants

def test_continuity_toy():
    M_a, M_D = continuity_constants(toy_problem())
    assert_allclose([M_a, M_D], [1.0, 1.0], atol=1e-12)


def test_continuity_scaled_form():
    M_a, _ = continuity_constants(make_problem(2.0 * np.eye(3), [[0.0, 0.0, 1.0]]))
    assert_allclose(M_a, 2.0, atol=1e-12)


def test_continuity_scaled_constraint():
    _, M_D = continuity_constants(make_problem(np.eye(2), [[0.0, 2.0]]))
    assert_allclose(M_D, 2.0, atol=1e-12)


def test_continuity_nonsymmetric_oracle():
    rng = np.random.default_rng(2)
    n = 7
    A = rng.standard_normal((n, n))
    M_V = oracles.random_spd(rng, n, cond=12.0)
    p = make_problem(A, rng.standard_normal((2, n)), M_V=M_V)
    M_a, _ = continuity_constants(p)
    expected = math.sqrt(oracles.eig_pair_oracle(A.T @ np.linalg.solve(M_V, A), M_V)[-1])
    assert_allclose(M_a, expected, rtol=1e-9)


# ------------------------------------------------------------- inf_sup_beta

def test_beta_toy():
    assert_allclose(inf_sup_beta(toy_problem()), 1.0, atol=1e-12)


@pytest.mark.parametrize("delta", [1e-1, 1e-5, 1e-10])
def test_beta_scales_with_constraint(delta):
    p = make_problem(np.eye(2), [[0.0, delta]])
    assert_allclose(inf_sup_beta(p), delta, rtol=1e-8)


def test_beta_identity_constraint():
    p = make_problem(np.eye(3), np.eye(3))
    assert_allclose(inf_sup_beta(p), 1.0, atol=1e-12)


def test_beta_oracle_random():
    rng = np.random.default_rng(8)
    n, m = 9, 4
    Dc = rng.standard_normal((m, n))
    M_V = oracles.random_spd(rng, n, cond=9.0)
    M_Q = oracles.random_spd(rng, m, cond=3.0)
    p = make_problem(np.eye(n), Dc, M_V=M_V, M_Q=M_Q)
    B = M_Q @ Dc
    expected = math.sqrt(oracles.eig_pair_oracle(B @ np.linalg.solve(M_V, B.T), M_Q)[0])
    assert_allclose(inf_sup_beta(p), expected, rtol=1e-9)


# ------------------------------------------------------------- kernel_alpha

def test_alpha_toy():
    rep = kernel_alpha(toy_problem())
    assert_allclose(rep.alpha, 1.0, atol=1e-12)
    assert rep.kernel_dim == 1 and not rep.ill_posed


def test_alpha_picks_kernel_block():
    rep = kernel_alpha(make_problem(np.diag([3.0, 1.0]), [[0.0, 1.0]]))
    assert_allclose(rep.alpha, 3.0, rtol=1e-12)


def test_alpha_singular_restriction():
    rep = kernel_alpha(make_problem(np.diag([0.0, 1.0]), [[0.0, 1.0]]))
    assert rep.alpha == 0.0 and rep.ill_posed


def test_alpha_empty_kernel():
    rep = kernel_alpha(make_problem(np.eye(2), np.eye(2)))
    assert math.isinf(rep.alpha) and rep.kernel_dim == 0


# ----------------------------------------------------- classify_assumption

def test_classify_toy_a3():
    klass, at = classify_assumption(toy_problem())
    assert klass == "A3"
    assert_allclose(at, 1.0, atol=1e-12)


def test_classify_a1_rank_deficient():
    klass, at = classify_assumption(make_problem(np.diag([1.0, 0.0]), [[0.0, 1.0]]))
    assert klass == "A1"
    assert_allclose(at, 1.0, atol=1e-12)


def test_classify_a2_nonsymmetric_coercive():
    klass, at = classify_assumption(
        make_problem([[1.0, 1.0], [-1.0, 1.0]], [[0.0, 1.0]])
    )
    assert klass == "A2"
    assert_allclose(at, 1.0, atol=1e-12)


def test_classify_none_indefinite():
    klass, at = classify_assumption(make_problem(np.diag([1.0, -1.0]), [[0.0, 1.0]]))
    assert klass == "NONE" and at is None


def test_classify_zero_form():
    klass, at = classify_assumption(make_problem(np.zeros((2, 2)), [[0.0, 1.0]]))
    assert klass == "NONE"


def test_classify_a1_empty_kernel():
    # Symmetric PSD, singular, but no constraint kernel to be coercive on.
    klass, at = classify_assumption(make_problem(np.diag([1.0, 0.0]), np.eye(2)))
    assert klass == "A1" and math.isinf(at)


# -------------------------------------------------------- derived_constants

def test_derived_toy_a3():
    rep = derived_constants(toy_problem())
    assert rep.assumption == "A3"
    assert_allclose([rep.phi, rep.upsilon], [1.0, 1.0], atol=1e-12)
    assert math.isinf(rep.eps0)
    assert_allclose(rep.rho0, 6.0, rtol=1e-12)
    assert_allclose(rep.C1, 1.0, atol=1e-12)
    assert_allclose(rep.rate(9.0), 0.1, rtol=1e-12)


def test_derived_toy_table_values():
    rep = derived_constants(toy_problem())
    assert_allclose(rep.C2(0.0), 1.0, atol=1e-12)
    assert_allclose(rep.C2(0.5), 2.0 / 3.0, rtol=1e-12)
    assert_allclose(rep.C3(0.0), 1.0, atol=1e-12)
    assert_allclose(rep.C3(0.5), 2.0 / 3.0, rtol=1e-12)
    assert_allclose(rep.C4(0.5), 2.0 / 3.0, rtol=1e-12)
    assert_allclose(rep.C23(0.0), 1.0, atol=1e-12)


def test_derived_forced_none():
    base = SpectralBase(
        M_a=1.0, M_D=1.0, beta=1.0, alpha=1.0, kernel_dim=1,
        ill_posed=False, assumption="NONE", alpha_tilde=None,
    )
    rep = derived_constants(toy_problem(), base)
    assert_allclose(rep.rho0, 6.0, rtol=1e-12)
    assert_allclose(rep.eps0, 0.25, rtol=1e-12)
    assert_allclose(rep.upsilon, 2.0, rtol=1e-12)
    assert_allclose(rep.rate(9.0), 0.4, rtol=1e-12)
    with pytest.raises(RateUndefinedError):
        rep.rate(6.0)
    # The step threshold is strictly stricter than the penalty threshold.
    assert rep.rho0 > 1.0 / rep.eps0


def test_derived_none_penalty_margin():
    base = SpectralBase(
        M_a=1.0, M_D=1.0, beta=1.0, alpha=1.0, kernel_dim=1,
        ill_posed=False, assumption="NONE", alpha_tilde=None,
    )
    rep = derived_constants(toy_problem(), base)
    # Margin factor doubles the eps = 0 constants halfway to the threshold.
    assert_allclose(rep.C2(0.125), 2.0 * rep.C2(0.0), rtol=1e-12)
    assert math.isinf(rep.C2(0.25))


def test_derived_eps0_infinite_for_favorable_classes():
    for A, Dc in [
        (np.diag([1.0, 0.0]), [[0.0, 1.0]]),            # A1
        ([[1.0, 1.0], [-1.0, 1.0]], [[0.0, 1.0]]),      # A2
        (np.eye(2), [[0.0, 1.0]]),                      # A3
    ]:
        rep = derived_constants(make_problem(A, Dc))
        assert math.isinf(rep.eps0)


def test_derived_a2_rate_uses_upsilon():
    p = make_problem([[1.0, 1.0], [-1.0, 1.0]], [[0.0, 1.0]])
    rep = derived_constants(p)
    expected = (rep.M_a * rep.upsilon) / (rep.M_a * rep.upsilon + 7.0 * rep.beta**2)
    assert_allclose(rep.rate(7.0), expected, rtol=1e-12)


def test_constants_json_round_trip():
    rep = derived_constants(toy_problem())
    doc = json.loads(constants_to_json(rep))
    assert doc["assumption"] == "A3"
    assert doc["M_a"] == rep.M_a
    assert doc["eps0"] == math.inf
    assert doc["alpha_tilde"] == 1.0


# -------------------------------------------------------------- dz_spectrum

def test_dz_spectrum_toy():
    spec = dz_spectrum(toy_problem())
    assert_allclose(spec.sigmas, [1.0], atol=1e-12)
    assert_allclose(spec.ztilde, [[0.0], [1.0]], atol=1e-12)
    assert spec.n_kernel == 1


def test_dz_spectrum_small_constraint():
    spec = dz_spectrum(make_problem(np.eye(2), [[0.0, 1e-3]]))
    assert_allclose(spec.sigmas, [1e-3], rtol=1e-10)


def test_dz_spectrum_rejects_nonsymmetric():
    with pytest.raises(NotApplicableError):
        dz_spectrum(make_problem([[1.0, 1.0], [-1.0, 1.0]], [[0.0, 1.0]]))


def test_dz_spectrum_rejects_noncoercive():
    with pytest.raises(NotApplicableError):
        dz_spectrum(make_problem(np.diag([1.0, 0.0]), [[0.0, 1.0]]))


def test_dz_spectrum_orthogonality_systems():
    rng = np.random.default_rng(21)
    n, m = 10, 4
    A = oracles.random_spd(rng, n, cond=40.0)
    Dc = rng.standard_normal((m, n))
    M_Q = oracles.random_spd(rng, m, cond=3.0)
    M_V = oracles.random_spd(rng, n, cond=6.0)
    p = make_problem(A, Dc, M_V=M_V, M_Q=M_Q)
    spec = dz_spectrum(p)
    assert spec.n_perp == m and spec.n_kernel == n - m
    Zt = spec.ztilde
    K = Dc.T @ M_Q @ Dc
    assert np.linalg.norm(Zt.T @ A @ Zt - np.eye(m)) <= 1e-8
    assert np.linalg.norm(Zt.T @ K @ Zt - np.diag(spec.sigmas**2)) <= 1e-8 * spec.sigmas[-1] ** 2
    # Complement is a-orthogonal to the kernel.
    assert np.linalg.norm(spec.kernel.T @ A @ Zt) <= 1e-8 * np.linalg.norm(A)
    assert np.all(spec.sigmas > 0.0)


def test_beta_cross_characterization():
    # Running the spectrum with the Gram as the primal form reproduces the
    # literal inf-sup constant and constraint continuity constant.
    rng = np.random.default_rng(33)
    n, m = 8, 3
    Dc = rng.standard_normal((m, n))
    M_V = oracles.random_spd(rng, n, cond=5.0)
    M_Q = oracles.random_spd(rng, m, cond=4.0)
    p = make_problem(np.eye(n), Dc, M_V=M_V, M_Q=M_Q)
    gram_problem = make_problem(M_V, Dc, M_V=M_V, M_Q=M_Q)
    spec = dz_spectrum(gram_problem)
    assert_allclose(spec.beta_a, inf_sup_beta(p), rtol=1e-8)
    assert_allclose(spec.M_D_a, continuity_constants(p)[1], rtol=1e-8)


def test_materialize_psi_orthonormal():
    rng = np.random.default_rng(37)
    n, m = 7, 3
    Dc = rng.standard_normal((m, n))
    M_Q = oracles.random_spd(rng, m, cond=2.0)
    p = make_problem(oracles.random_spd(rng, n), Dc, M_Q=M_Q)
    spec = dz_spectrum(p)
    psi = spec.materialize_psi(Dc)
    assert np.linalg.norm(psi.T @ M_Q @ psi - np.eye(m)) <= 1e-8


# --------------------------------------------------------- decompose_kernel

def test_decompose_toy():
    split = decompose_kernel(toy_problem(), [1.0, 3.0])
    assert_allclose(split.z, [1.0, 0.0], atol=1e-12)
    assert_allclose(split.z_tilde, [0.0, 3.0], atol=1e-12)


def test_decompose_kernel_vector_fixed():
    split = decompose_kernel(toy_problem(), [2.0, 0.0])
    assert_allclose(split.z, [2.0, 0.0], atol=1e-12)
    assert_allclose(split.z_tilde, [0.0, 0.0], atol=1e-12)


def test_decompose_complement_vector():
    split = decompose_kernel(toy_problem(), [0.0, 5.0])
    assert_allclose(split.z, [0.0, 0.0], atol=1e-12)


def test_decompose_is_projection():
    rng = np.random.default_rng(51)
    n, m = 9, 3
    A = rng.standard_normal((n, n)) + 4 * np.eye(n)
    p = make_problem(A, rng.standard_normal((m, n)))
    u = rng.standard_normal(n)
    first = decompose_kernel(p, u)
    again = decompose_kernel(p, first.z_tilde)
    assert_allclose(first.z + first.z_tilde, u, atol=1e-12)
    assert np.linalg.norm(again.z) <= 1e-9 * np.linalg.norm(u)


def test_decompose_hat_variant_transposes():
    rng = np.random.default_rng(53)
    n, m = 6, 2
    A = rng.standard_normal((n, n)) + 4 * np.eye(n)
    Dc = rng.standard_normal((m, n))
    p = make_problem(A, Dc)
    u = rng.standard_normal(n)
    tilde = decompose_kernel(p, u, "tilde")
    hat = decompose_kernel(p, u, "hat")
    Z = oracles.nullspace_oracle(Dc)
    assert np.linalg.norm(Z.T @ A @ tilde.z_tilde) <= 1e-9 * np.linalg.norm(A)
    assert np.linalg.norm(Z.T @ A.T @ hat.z_tilde) <= 1e-9 * np.linalg.norm(A)
    assert hat.hat_variant and not tilde.hat_variant


# --------------------------------------------------------------- dual norms

def test_dual_norms_toy():
    p = toy_problem()
    assert_allclose(kernel_dual_norm(p, p.F), 1.0, atol=1e-12)
    assert_allclose(hat_dual_norm(p, p.F), 2.0, atol=1e-12)
    assert_allclose(multiplier_dual_norm(p, p.Gq), 3.0, atol=1e-12)


def test_hat_basis_annihilated_by_adjoint_restriction():
    rng = np.random.default_rng(57)
    n, m = 8, 3
    A = rng.standard_normal((n, n)) + 4 * np.eye(n)
    Dc = rng.standard_normal((m, n))
    p = make_problem(A, Dc)
    Y = hat_complement_basis(p)
    Z = oracles.nullspace_oracle(Dc)
    assert np.linalg.norm(Z.T @ A.T @ Y) <= 1e-9 * np.linalg.norm(A)
    assert Y.shape[1] == m


def test_multiplier_dual_norm_weighted():
    rng = np.random.default_rng(59)
    m = 4
    M_Q = oracles.random_spd(rng, m, cond=7.0)
    p = make_problem(np.eye(5), rng.standard_normal((m, 5)), M_Q=M_Q)
    q = rng.standard_normal(m)
    assert_allclose(
        multiplier_dual_norm(p, q),
        oracles.dual_norm_oracle(q, np.eye(m), M_Q),
        rtol=1e-9,
    )


# ----------------------------------------------------------- appendix audit

def test_appendix_toy_clean():
    report = appendix_checks(toy_problem(), samples=100, seed=0)
    assert report.ok
    assert report.samples == 100


@pytest.mark.parametrize("maker", [
    lambda: make_problem(np.diag([1.0, 0.0, 2.0]), [[0.0, 1.0, 0.5]]),  # A1
    lambda: make_problem(
        [[2.0, 1.0, 0.0], [-1.0, 2.0, 0.3], [0.2, -0.3, 2.0]],
        [[0.0, 1.0, 0.0]],
    ),                                                                   # A2
    lambda: make_problem(np.diag([1.0, -0.2, 1.0]), [[0.0, 1.0, 0.0]]),  # NONE
])
def test_appendix_clean_across_classes(maker):
    p = maker()
    report = appendix_checks(p, samples=60, seed=3)
    assert report.ok, report.violations


def test_appendix_random_spd_weighted():
    rng = np.random.default_rng(61)
    n, m = 8, 3
    p = make_problem(
        oracles.random_spd(rng, n, cond=25.0),
        rng.standard_normal((m, n)),
        M_V=oracles.random_spd(rng, n, cond=5.0),
        M_Q=oracles.random_spd(rng, m, cond=5.0),
    )
    report = appendix_checks(p, samples=60, seed=5)
    assert report.ok, report.violations
    assert "weak_cauchy_schwarz" in report.checked


def test_appendix_a1_floor_checked():
    p = make_problem(np.diag([1.0, 0.0]), [[0.0, 1.0]])
    report = appendix_checks(p, samples=30, seed=1)
    assert report.ok, report.violations
    assert "kernel_coercivity_floor" in report.checked
