"""Spectral constants and stability theory for saddle point problems.

Everything the convergence theory is phrased in is computed here:
continuity constants of the primal form and the constraint map, the
kernel inf-sup constant, the surjectivity (inf-sup) constant of the
constraint, a tolerance-based classification of the primal form into
the three favorable assumption classes (or none), the derived stability
constants with their penalty thresholds, predicted iteration rates, the
constraint-singular-value decomposition of the kernel complement, and a
randomized audit of the inequalities all of these are supposed to
satisfy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .errors import (
    IllPosedKernelError,
    NotApplicableError,
    RateUndefinedError,
    SingularSystemError,
)
from .linalg import (
    as_vector,
    factor_lu,
    factor_spd,
    gram_orthonormal_kernel,
    is_symmetric,
    sym_generalized_eig,
    sym_part,
)
from .problems import DivGramForm, KernelSplit, SaddleProblem

KERNEL_RTOL = 1e-10
COERCIVE_RTOL = 1e-12

ProblemLike = Union[SaddleProblem, DivGramForm]


def _div_data(problem: ProblemLike):
    if isinstance(problem, DivGramForm):
        return problem.A, problem.M_V, problem.K
    if isinstance(problem, SaddleProblem):
        K = sym_part(problem.Dc.T @ problem.M_Q @ problem.Dc)
        return problem.A, problem.M_V, K
    raise TypeError(f"expected a problem, got {type(problem).__name__}")


def _operator_norm(A: np.ndarray, M_V: np.ndarray) -> float:
    """Largest singular value of the Gram-whitened matrix."""
    if A.shape[0] == 0:
        return 0.0
    G = sym_part(A.T @ factor_spd(M_V).solve(A))
    eigs = sym_generalized_eig(G, M_V).eigenvalues
    return math.sqrt(max(float(eigs[-1]), 0.0))


def continuity_constants(problem: ProblemLike) -> Tuple[float, float]:
    """Operator norms of the primal form and the constraint map.

    Returns
    -------
    (M_a, M_D) : tuple of float
        ``M_a`` is the largest singular value of the Gram-whitened primal
        matrix (sqrt of the top eigenvalue of ``A.T M_V^{-1} A x = lam M_V x``);
        ``M_D`` is ``sqrt(lam_max(K, M_V))`` for the constraint Gram ``K``.
    """
    A, M_V, K = _div_data(problem)
    M_a = _operator_norm(A, M_V)
    eigs = sym_generalized_eig(sym_part(K), M_V).eigenvalues
    M_D = math.sqrt(max(float(eigs[-1]), 0.0)) if eigs.size else 0.0
    return M_a, M_D


def inf_sup_beta(problem: SaddleProblem) -> float:
    """Surjectivity (inf-sup) constant of the constraint map.

    Computes ``sqrt(lam_min(B M_V^{-1} B.T, M_Q))`` with ``B = M_Q Dc``,
    the literal two-space inf-sup over the multiplier space.  Returns
    ``inf`` for problems without constraints.
    """
    if not isinstance(problem, SaddleProblem):
        raise TypeError("inf_sup_beta needs the explicit problem form")
    if problem.m == 0:
        return math.inf
    B = problem.M_Q @ problem.Dc
    T = sym_part(B @ factor_spd(problem.M_V).solve(B.T))
    eigs = sym_generalized_eig(T, problem.M_Q).eigenvalues
    return math.sqrt(max(float(eigs[0]), 0.0))


def _smallest_positive_sigma(K: np.ndarray, M_V: np.ndarray) -> float:
    """sqrt of the smallest strictly positive eigenvalue of (K, M_V)."""
    eigs = sym_generalized_eig(sym_part(K), M_V).eigenvalues
    top = float(eigs[-1]) if eigs.size else 0.0
    if top <= 0.0:
        return math.inf
    pos = eigs[eigs > KERNEL_RTOL * top]
    return math.sqrt(float(pos[0])) if pos.size else math.inf


@dataclass(frozen=True)
class KernelAlphaReport:
    """Kernel inf-sup constant with degeneracy flags."""

    alpha: float
    kernel_dim: int
    ill_posed: bool


def kernel_alpha(problem: ProblemLike) -> KernelAlphaReport:
    """Inf-sup constant of the primal form restricted to the constraint kernel.

    With ``Z`` a Gram-orthonormal kernel basis, returns the smallest
    singular value of ``Z.T A Z`` (both inf-sup directions at once).  An
    empty kernel yields the ``+inf`` sentinel; a singular restriction is
    reported as ``alpha = 0`` with the ``ill_posed`` flag set.
    """
    A, M_V, K = _div_data(problem)
    Z = gram_orthonormal_kernel(K, M_V)
    dim = Z.shape[1]
    if dim == 0:
        return KernelAlphaReport(alpha=math.inf, kernel_dim=0, ill_posed=False)
    R = Z.T @ A @ Z
    eigs = sym_generalized_eig(sym_part(R.T @ R), np.eye(dim)).eigenvalues
    alpha = math.sqrt(max(float(eigs[0]), 0.0))
    top = math.sqrt(max(float(eigs[-1]), 0.0))
    if top == 0.0 or alpha <= 1e-12 * top:
        return KernelAlphaReport(alpha=0.0, kernel_dim=dim, ill_posed=True)
    return KernelAlphaReport(alpha=alpha, kernel_dim=dim, ill_posed=False)


def classify_assumption(problem: ProblemLike) -> Tuple[str, Optional[float]]:
    """Classify the primal form into assumption classes A3/A1/A2/NONE.

    The classes, checked in order:

    * ``A3`` — symmetric and coercive on the whole space; the constant is
      ``lam_min(sym(A), M_V)``.
    * ``A1`` — symmetric, positive semidefinite, and coercive on the
      constraint kernel; the constant is the smallest eigenvalue of the
      kernel-restricted symmetric part (``+inf`` when the kernel is empty).
    * ``A2`` — coercive (possibly nonsymmetric); constant as for A3.
    * ``NONE`` — anything else; no coercivity constant.

    Symmetry means ``norm(A - A.T, 'fro') <= 1e-10 * norm(A, 'fro')``;
    coercivity thresholds are relative to the continuity constant.
    """
    A, M_V, K = _div_data(problem)
    M_a = _operator_norm(A, M_V)
    S = sym_part(A)
    eigs = sym_generalized_eig(S, M_V).eigenvalues
    lam_min = float(eigs[0]) if eigs.size else math.inf
    symmetric = is_symmetric(A)
    coercive = lam_min > COERCIVE_RTOL * M_a
    if symmetric and coercive:
        return "A3", lam_min
    if symmetric and lam_min >= -COERCIVE_RTOL * M_a:
        Z = gram_orthonormal_kernel(K, M_V)
        if Z.shape[1] == 0:
            return "A1", math.inf
        lam_z = sym_generalized_eig(
            sym_part(Z.T @ S @ Z), np.eye(Z.shape[1])
        ).eigenvalues
        if float(lam_z[0]) > 0.0:
            return "A1", float(lam_z[0])
    if coercive:
        return "A2", lam_min
    return "NONE", None


@dataclass(frozen=True)
class SpectralBase:
    """Raw measured constants feeding :func:`derived_constants`."""

    M_a: float
    M_D: float
    beta: float
    alpha: float
    kernel_dim: int
    ill_posed: bool
    assumption: str
    alpha_tilde: Optional[float]


def base_constants(problem: ProblemLike) -> SpectralBase:
    """Measure every raw constant of a problem in one pass."""
    M_a, M_D = continuity_constants(problem)
    if isinstance(problem, SaddleProblem):
        beta = inf_sup_beta(problem)
    else:
        beta = _smallest_positive_sigma(problem.K, problem.M_V)
    ka = kernel_alpha(problem)
    assumption, alpha_tilde = classify_assumption(problem)
    return SpectralBase(
        M_a=M_a,
        M_D=M_D,
        beta=beta,
        alpha=ka.alpha,
        kernel_dim=ka.kernel_dim,
        ill_posed=ka.ill_posed,
        assumption=assumption,
        alpha_tilde=alpha_tilde,
    )


@dataclass(frozen=True)
class ConstantsReport:
    """Measured and derived stability constants of one problem.

    ``C2``, ``C3``, ``C4`` and ``C23`` are closures over the penalty
    parameter; ``rate`` is a closure over the step size of the iterated
    penalty method; ``two_parameter`` maps a (penalty weight, step size)
    pair to the triple ``(eta, tau, xi)`` of contraction factors that
    govern the iteration when the two parameters differ.
    """

    M_a: float
    M_D: float
    alpha: float
    alpha_tilde: Optional[float]
    beta: float
    kernel_dim: int
    ill_posed: bool
    assumption: str
    phi: float
    upsilon: float
    eps0: float
    rho0: float
    C1: float
    C2: Callable[[float], float]
    C3: Callable[[float], float]
    C4: Callable[[float], float]
    C23: Callable[[float], float]
    rate: Callable[[float], float]
    two_parameter: Callable[[float, float], Tuple[float, float, float]]


def _phi_upsilon(assumption, M_a, alpha, alpha_tilde):
    if assumption == "A3":
        phi = math.sqrt(M_a / alpha_tilde) if alpha_tilde > 0 else math.inf
        return phi, phi
    if assumption == "A1":
        if math.isinf(alpha_tilde):
            return 0.0, 1.0
        phi = math.sqrt(M_a / alpha_tilde) if alpha_tilde > 0 else math.inf
        return phi, 1.0 + phi
    if assumption == "A2":
        phi = M_a / alpha_tilde if alpha_tilde > 0 else math.inf
        return phi, phi
    # NONE: controlled by the kernel inf-sup constant alone.
    if M_a == 0.0:
        return 0.0, 1.0
    if alpha == 0.0:
        return math.inf, math.inf
    phi = 0.0 if math.isinf(alpha) else M_a / alpha
    return phi, 1.0 + phi


def _rho_threshold(M_a: float, alpha: float, beta: float) -> float:
    if alpha == 0.0 or beta == 0.0 or M_a == 0.0:
        return math.inf
    if math.isinf(beta):
        return 0.0
    ia = 0.0 if math.isinf(alpha) else 1.0 / alpha
    return M_a * (M_a * M_a * ia * ia + 3.0 * M_a * ia + 2.0) / (beta * beta)


def derived_constants(
    problem: ProblemLike, base: Optional[SpectralBase] = None
) -> ConstantsReport:
    """Derive every stability constant of the theory from measured ones.

    Parameters
    ----------
    problem : SaddleProblem or DivGramForm
    base : SpectralBase, optional
        Previously measured raw constants.  Passing a hand-built record
        (for instance with the assumption class overridden) reuses the
        derivation machinery on hypothetical inputs.

    Returns
    -------
    ConstantsReport

    Notes
    -----
    The penalty threshold ``eps0`` is ``+inf`` exactly for classes
    A1/A2/A3 and ``(1/M_a)(beta/upsilon)**2`` otherwise.  The step
    threshold ``rho0`` is ``(M_a+alpha)(M_a+2 alpha) M_a/(alpha^2 beta^2)``.
    The ``rate`` closure raises :class:`RateUndefinedError` for class
    NONE at steps at or below ``rho0``.
    """
    if base is None:
        base = base_constants(problem)
    M_a, M_D, beta = base.M_a, base.M_D, base.beta
    alpha, alpha_tilde = base.alpha, base.alpha_tilde
    assumption = base.assumption
    phi, upsilon = _phi_upsilon(assumption, M_a, alpha, alpha_tilde)

    if assumption in ("A1", "A2", "A3"):
        eps0 = math.inf
    elif M_a == 0.0 or math.isinf(beta):
        eps0 = math.inf
    elif math.isinf(upsilon):
        eps0 = 0.0
    else:
        eps0 = (beta / upsilon) ** 2 / M_a
    rho0 = _rho_threshold(M_a, alpha, beta)

    if assumption == "NONE":
        C1 = 0.0 if math.isinf(alpha) else (math.inf if alpha == 0.0 else 1.0 / alpha)
    else:
        C1 = 0.0 if math.isinf(alpha_tilde) else 1.0 / alpha_tilde

    def guard(eps: float) -> float:
        if eps < 0.0:
            raise ValueError(f"penalty parameter must be nonnegative, got {eps}")
        return eps

    if assumption == "NONE":

        def C2(eps: float) -> float:
            eps = guard(eps)
            if eps >= eps0:
                return math.inf
            margin = eps0 / (eps0 - eps) if not math.isinf(eps0) else 1.0
            return (upsilon / beta) ** 2 * margin

        def C3(eps: float) -> float:
            eps = guard(eps)
            if eps >= eps0:
                return math.inf
            margin = eps0 / (eps0 - eps) if not math.isinf(eps0) else 1.0
            return (upsilon / beta) * margin

        def C4(eps: float) -> float:
            eps = guard(eps)
            if eps >= eps0:
                return math.inf
            margin = eps0 / (eps0 - eps) if not math.isinf(eps0) else 1.0
            return (M_a * upsilon / beta**2) * margin

    elif assumption == "A1":

        def C2(eps: float) -> float:
            guard(eps)
            return (upsilon / beta) ** 2

        def C3(eps: float) -> float:
            guard(eps)
            return upsilon / beta

        def C4(eps: float) -> float:
            eps = guard(eps)
            return M_a / (eps * M_a + beta**2)

    elif assumption == "A3":

        def C2(eps: float) -> float:
            eps = guard(eps)
            return upsilon**2 / (eps * M_a + beta**2)

        def C3(eps: float) -> float:
            eps = guard(eps)
            at = alpha_tilde
            return (upsilon * M_D) / math.sqrt(
                (eps * at * upsilon**2 + beta**2) * (eps * at + M_D**2)
            )

        def C4(eps: float) -> float:
            eps = guard(eps)
            return M_a / (eps * M_a + beta**2)

    else:  # A2

        def C2(eps: float) -> float:
            eps = guard(eps)
            return upsilon**3 / (eps * alpha_tilde * upsilon**2 + beta**2)

        def C3(eps: float) -> float:
            eps = guard(eps)
            at = alpha_tilde
            return (upsilon * M_D) / math.sqrt(
                (eps * at * upsilon**2 + beta**2) * (eps * at + M_D**2)
            )

        def C4(eps: float) -> float:
            eps = guard(eps)
            return (M_a * upsilon) / (eps * M_a * upsilon + beta**2)

    if math.isinf(beta):
        # Constraint-free problem: every multiplier bound is vacuous.
        def _zero(eps: float) -> float:
            guard(eps)
            return 0.0

        C2 = C3 = C4 = _zero

    def C23(eps: float) -> float:
        return min(M_D * C2(eps), C3(eps))

    def rate(rho: float) -> float:
        if rho <= 0.0:
            raise ValueError(f"step size must be positive, got {rho}")
        if assumption in ("A1", "A3"):
            return M_a / (M_a + rho * beta**2)
        if assumption == "A2":
            return (M_a * upsilon) / (M_a * upsilon + rho * beta**2)
        if rho <= rho0:
            raise RateUndefinedError(
                f"no geometric rate is guaranteed at step {rho} <= "
                f"threshold {rho0}"
            )
        ia = 0.0 if math.isinf(alpha) else 1.0 / alpha
        t = 1.0 + M_a * ia
        return (M_a * t) / (rho * beta**2 - M_a * t * t)

    def _mul(a: float, b: float) -> float:
        # A vanishing prefactor kills the whole term even when the other
        # factor is infinite, so 0 * inf must resolve to 0 here.
        if a == 0.0 or b == 0.0:
            return 0.0
        return a * b

    def two_parameter(lam: float, rho: float) -> Tuple[float, float, float]:
        if lam <= 0.0 or rho <= 0.0:
            raise ValueError(
                f"step parameters must be positive, got lam={lam}, rho={rho}"
            )
        eta = abs(1.0 - rho / lam)
        eps = 1.0 / lam
        inv_beta = math.inf if beta == 0.0 else 1.0 / beta
        tau = _mul(rho * M_a / lam**2, min(C2(eps), _mul(C3(eps), inv_beta))) + eta
        xi = (rho / lam**2) * min(_mul(_mul(M_a, inv_beta), C23(eps)), C4(eps)) + eta
        return eta, tau, xi

    return ConstantsReport(
        M_a=M_a,
        M_D=M_D,
        alpha=alpha,
        alpha_tilde=alpha_tilde,
        beta=beta,
        kernel_dim=base.kernel_dim,
        ill_posed=base.ill_posed,
        assumption=assumption,
        phi=phi,
        upsilon=upsilon,
        eps0=eps0,
        rho0=rho0,
        C1=C1,
        C2=C2,
        C3=C3,
        C4=C4,
        C23=C23,
        rate=rate,
        two_parameter=two_parameter,
    )


def _json_number(x) -> str:
    if x is None:
        return "null"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def constants_to_json(report: ConstantsReport) -> str:
    """Serialize the scalar fields of a report to JSON text."""
    fields = [
        ("M_a", report.M_a),
        ("M_D", report.M_D),
        ("alpha", report.alpha),
        ("alpha_tilde", report.alpha_tilde),
        ("beta", report.beta),
        ("kernel_dim", report.kernel_dim),
        ("ill_posed", report.ill_posed),
        ("assumption", report.assumption),
        ("phi", report.phi),
        ("upsilon", report.upsilon),
        ("eps0", report.eps0),
        ("rho0", report.rho0),
        ("C1", report.C1),
    ]
    lines = ["{"]
    for i, (name, val) in enumerate(fields):
        comma = "," if i + 1 < len(fields) else ""
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, str):
            text = f'"{val}"'
        elif isinstance(val, int):
            text = str(val)
        else:
            text = _json_number(val)
        lines.append(f'  "{name}": {text}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------- kernel decompositions

def _kernel_and_positive_modes(K, M_V, rel_tol=KERNEL_RTOL):
    spec = sym_generalized_eig(sym_part(K), M_V)
    lam = spec.eigenvalues
    if lam.size == 0:
        return spec.eigenvectors, spec.eigenvectors[:, :0]
    top = float(lam[-1])
    if top <= 0.0:
        return spec.eigenvectors, spec.eigenvectors[:, :0]
    mask = lam > rel_tol * top
    return spec.eigenvectors[:, ~mask], spec.eigenvectors[:, mask]


def decompose_kernel(
    problem: ProblemLike, u, variant: str = "tilde"
) -> KernelSplit:
    """Split a vector against the constraint kernel.

    The kernel part ``z`` solves ``a(z, w) = a(u, w)`` for all kernel
    vectors ``w`` (``tilde`` variant) or the transposed condition
    (``hat`` variant); ``z_tilde = u - z`` is then annihilated by the
    kernel in the complementary slot of the form.

    Raises
    ------
    IllPosedKernelError
        When the kernel-restricted matrix is singular.
    """
    if variant not in ("tilde", "hat"):
        raise ValueError(f"unknown variant {variant!r}")
    A, M_V, K = _div_data(problem)
    u = as_vector(u, A.shape[0], "u")
    Z = gram_orthonormal_kernel(K, M_V)
    if Z.shape[1] == 0:
        return KernelSplit(z=np.zeros_like(u), z_tilde=u,
                           hat_variant=(variant == "hat"))
    mat = A if variant == "tilde" else A.T
    R = Z.T @ mat @ Z
    rhs = Z.T @ (mat @ u)
    try:
        c = factor_lu(R).solve(rhs)
    except SingularSystemError as exc:
        raise IllPosedKernelError(
            f"kernel-restricted form is singular; cannot decompose: {exc}"
        )
    z = Z @ c
    return KernelSplit(z=z, z_tilde=u - z, hat_variant=(variant == "hat"))


@dataclass(frozen=True)
class DzSpectrum:
    """Constraint singular structure of the kernel complement.

    Columns of ``ztilde`` are a-orthonormal, span the a-orthogonal
    complement of the constraint kernel, and diagonalize the constraint
    Gram with diagonal entries ``sigmas**2`` (ascending).  ``kernel``
    holds a Gram-orthonormal kernel basis.
    """

    sigmas: np.ndarray
    ztilde: np.ndarray
    kernel: np.ndarray

    @property
    def n_kernel(self) -> int:
        return self.kernel.shape[1]

    @property
    def n_perp(self) -> int:
        return self.ztilde.shape[1]

    @property
    def beta_a(self) -> float:
        return float(self.sigmas[0]) if self.sigmas.size else math.inf

    @property
    def M_D_a(self) -> float:
        return float(self.sigmas[-1]) if self.sigmas.size else 0.0

    def materialize_psi(self, Dc) -> np.ndarray:
        """Multiplier-space images ``psi_j = sigma_j^{-1} Dc ztilde_j``."""
        Dc = np.asarray(Dc, dtype=float)
        return (Dc @ self.ztilde) / self.sigmas[np.newaxis, :]


def dz_spectrum(problem: ProblemLike) -> DzSpectrum:
    """Diagonalize the constraint Gram over the kernel complement.

    Requires a symmetric coercive primal form; the returned basis is
    simultaneously a-orthonormal and constraint-Gram-diagonal, with the
    ascending ``sigmas`` giving the coercive-geometry inf-sup constant
    (``sigmas[0]``) and continuity constant (``sigmas[-1]``) of the
    constraint map.

    Raises
    ------
    NotApplicableError
        When the primal form is nonsymmetric or not coercive.
    """
    A, M_V, K = _div_data(problem)
    if not is_symmetric(A):
        raise NotApplicableError(
            "constraint spectrum needs a symmetric primal form"
        )
    M_a = _operator_norm(A, M_V)
    S = sym_part(A)
    lam = sym_generalized_eig(S, M_V).eigenvalues
    if lam.size == 0 or float(lam[0]) <= COERCIVE_RTOL * M_a:
        raise NotApplicableError(
            "constraint spectrum needs a coercive primal form"
        )
    Z, Y = _kernel_and_positive_modes(K, M_V)
    if Z.shape[1]:
        R = Z.T @ S @ Z
        coeff = factor_lu(R).solve(Z.T @ (S @ Y)) if Y.shape[1] else np.zeros((Z.shape[1], 0))
        Ytil = Y - Z @ coeff
    else:
        Ytil = Y
    if Ytil.shape[1] == 0:
        return DzSpectrum(sigmas=np.zeros(0), ztilde=Ytil, kernel=Z)
    Ka = sym_part(Ytil.T @ K @ Ytil)
    Aa = sym_part(Ytil.T @ S @ Ytil)
    sub = sym_generalized_eig(Ka, Aa)
    sigmas = np.sqrt(np.clip(sub.eigenvalues, 0.0, None))
    ztilde = Ytil @ sub.eigenvectors
    return DzSpectrum(sigmas=sigmas, ztilde=ztilde, kernel=Z)


def hat_complement_basis(problem: ProblemLike) -> np.ndarray:
    """Basis of the adjoint-orthogonal complement of the constraint kernel."""
    A, M_V, K = _div_data(problem)
    Z, Y = _kernel_and_positive_modes(K, M_V)
    if Z.shape[1] == 0 or Y.shape[1] == 0:
        return Y
    R = Z.T @ A.T @ Z
    try:
        coeff = factor_lu(R).solve(Z.T @ (A.T @ Y))
    except SingularSystemError as exc:
        raise IllPosedKernelError(
            f"kernel-restricted adjoint form is singular: {exc}"
        )
    return Y - Z @ coeff


def kernel_dual_norm(problem: ProblemLike, load) -> float:
    """Dual norm of a load restricted to the constraint kernel."""
    A, M_V, K = _div_data(problem)
    load = as_vector(load, A.shape[0], "load")
    Z = gram_orthonormal_kernel(K, M_V)
    return float(np.linalg.norm(Z.T @ load))


def hat_dual_norm(problem: ProblemLike, load) -> float:
    """Dual norm of a load restricted to the adjoint kernel complement."""
    A, M_V, K = _div_data(problem)
    load = as_vector(load, A.shape[0], "load")
    Y = hat_complement_basis(problem)
    if Y.shape[1] == 0:
        return 0.0
    f = Y.T @ load
    G = sym_part(Y.T @ M_V @ Y)
    return math.sqrt(max(float(f @ factor_spd(G).solve(f)), 0.0))


def multiplier_dual_norm(problem: SaddleProblem, load) -> float:
    """Dual norm of a constraint-space load: sqrt(load.T M_Q^{-1} load)."""
    load = as_vector(load, problem.m, "load")
    if problem.m == 0:
        return 0.0
    return math.sqrt(max(float(load @ factor_spd(problem.M_Q).solve(load)), 0.0))


# ------------------------------------------------------------- audit checks

@dataclass(frozen=True)
class AppendixReport:
    """Result of the randomized stability-inequality audit."""

    samples: int
    checked: Tuple[str, ...]
    violations: Tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def appendix_checks(
    problem: SaddleProblem, samples: int = 100, seed: int = 0
) -> AppendixReport:
    """Audit the decomposition and norm inequalities on random vectors.

    For ``samples`` random vectors (and multiplier vectors) checks, with
    slack factor ``1 + 1e-8``:

    * kernel-split stability: ``|z|_V <= phi |u|_V`` and
      ``|z_tilde|_V <= upsilon |u|_V``;
    * norm equivalence on the split complement:
      ``|D z~|_Q / M_D <= |z~|_V <= (upsilon/beta) |D z~|_Q``;
    * the surjectivity bound ``beta |q|_Q <= |D' q|_{V'}``;
    * coercivity of the penalized form on the complement,
      ``a(z~, z~) + (1/eps)|D z~|_Q^2 >= (1/eps - 1/eps0) |D z~|_Q^2``
      for penalties below the threshold;
    * for symmetric positive semidefinite classes, the weak
      Cauchy-Schwarz bound ``a(v, w)^2 <= a(v, v) a(w, w)``;
    * for class A1, the kernel coercivity floor
      ``alpha_tilde >= alpha^2 / M_a - 1e-10``.

    Violations are reported, never raised.
    """
    slack = 1.0 + 1e-8
    rep = derived_constants(problem)
    A, M_V, K = _div_data(problem)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    violations = []
    checked = ["split_stability", "norm_equivalence", "surjectivity",
               "penalized_coercivity"]

    def norm_v(v):
        return math.sqrt(max(float(v @ (M_V @ v)), 0.0))

    def norm_dq(v):
        return math.sqrt(max(float(v @ (K @ v)), 0.0))

    if math.isinf(rep.eps0):
        eps_grid = [0.1, 1.0, 10.0]
        inv_eps0 = 0.0
    else:
        eps_grid = [rep.eps0 * t for t in (0.1, 0.5, 0.9)]
        inv_eps0 = 1.0 / rep.eps0

    mv_fact = factor_spd(M_V)
    Z = gram_orthonormal_kernel(K, M_V)
    if Z.shape[1]:
        try:
            lu = factor_lu(Z.T @ A @ Z)
        except SingularSystemError as exc:
            raise IllPosedKernelError(
                f"kernel-restricted form is singular; cannot audit: {exc}"
            )

        def split_u(u):
            z = Z @ lu.solve(Z.T @ (A @ u))
            return z, u - z

    else:

        def split_u(u):
            return np.zeros_like(u), u

    for k in range(samples):
        u = rng.standard_normal(n)
        z_part, zt_part = split_u(u)
        nu, nz, nzt = norm_v(u), norm_v(z_part), norm_v(zt_part)
        if nz > slack * rep.phi * nu:
            violations.append(
                f"sample {k}: |z|_V = {nz:.6g} exceeds phi*|u|_V = {rep.phi * nu:.6g}"
            )
        if nzt > slack * rep.upsilon * nu:
            violations.append(
                f"sample {k}: |z~|_V = {nzt:.6g} exceeds upsilon*|u|_V = "
                f"{rep.upsilon * nu:.6g}"
            )
        dq = norm_dq(zt_part)
        if dq > slack * rep.M_D * nzt:
            violations.append(
                f"sample {k}: |Dz~|_Q = {dq:.6g} exceeds M_D*|z~|_V = "
                f"{rep.M_D * nzt:.6g}"
            )
        if not math.isinf(rep.upsilon) and nzt > slack * (rep.upsilon / rep.beta) * dq:
            violations.append(
                f"sample {k}: |z~|_V = {nzt:.6g} exceeds (upsilon/beta)*|Dz~|_Q = "
                f"{(rep.upsilon / rep.beta) * dq:.6g}"
            )
        az = float(zt_part @ (A @ zt_part))
        for eps in eps_grid:
            lhs = az + dq**2 / eps
            rhs = (1.0 / eps - inv_eps0) * dq**2
            if lhs - rhs < -1e-8 * (abs(lhs) + abs(rhs)):
                violations.append(
                    f"sample {k}: penalized coercivity fails at eps = {eps:.6g}: "
                    f"{lhs:.6g} < {rhs:.6g}"
                )
        if problem.m:
            q = rng.standard_normal(problem.m)
            nq = math.sqrt(max(float(q @ (problem.M_Q @ q)), 0.0))
            d = problem.Dc.T @ (problem.M_Q @ q)
            dual = math.sqrt(max(float(d @ mv_fact.solve(d)), 0.0))
            if rep.beta * nq > slack * dual:
                violations.append(
                    f"sample {k}: beta*|q|_Q = {rep.beta * nq:.6g} exceeds "
                    f"dual norm {dual:.6g}"
                )

    if rep.assumption in ("A1", "A3"):
        checked.append("weak_cauchy_schwarz")
        for k in range(samples):
            v = rng.standard_normal(n)
            w = rng.standard_normal(n)
            avw = float(w @ (A @ v))
            avv = float(v @ (A @ v))
            aww = float(w @ (A @ w))
            if avw * avw > slack * max(avv, 0.0) * max(aww, 0.0) + 1e-12:
                violations.append(
                    f"sample {k}: weak Cauchy-Schwarz fails: a(v,w)^2 = "
                    f"{avw * avw:.6g} > {avv * aww:.6g}"
                )
    if rep.assumption == "A1" and not math.isinf(rep.alpha):
        checked.append("kernel_coercivity_floor")
        floor = rep.alpha**2 / rep.M_a - 1e-10
        if rep.alpha_tilde < floor:
            violations.append(
                f"alpha_tilde = {rep.alpha_tilde:.6g} below floor "
                f"alpha^2/M_a = {floor:.6g}"
            )
    return AppendixReport(
        samples=samples, checked=tuple(checked), violations=tuple(violations)
    )
