"""Penalty solves with executable stability and error bounds.

The penalized saddle point problem can be solved in coupled block form
or by eliminating the multiplier; both paths live here, together with a
weighted variant of the penalty block and two grid studies that replay
the stability bounds (on the solution itself) and the error bounds
(against the unpenalized reference) with their sharp constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import (
    ConstantsReport,
    continuity_constants,
    decompose_kernel,
    derived_constants,
    hat_dual_norm,
    inf_sup_beta,
    kernel_dual_norm,
    multiplier_dual_norm,
)
from .errors import MissingQBasisError, SaddleLabError
from .linalg import (
    as_square,
    factor_spd,
    solve_dense,
    sym_generalized_eig,
    sym_part,
)
from .problems import (
    DivGramForm,
    KernelSplit,
    SaddleProblem,
    SaddleSolution,
    kkt_solve,
    riesz_q,
    to_div_gram,
)

SLACK = 1.0 + 1e-8
# Absolute roundoff floor for bound checks whose right-hand side can be
# exactly zero (e.g. kernel-supported loads).
ATOL_FLOOR = 1e-12

ProblemLike = Union[SaddleProblem, DivGramForm]


def _eliminated_u(A, K, F, gD, eps: float) -> np.ndarray:
    return solve_dense(A + K / eps, F + gD / eps)


def penalty_solve(
    problem: ProblemLike,
    eps: float,
    path: str = "both",
    want_pressure: bool = True,
) -> SaddleSolution:
    """Solve the penalized problem by one or both solution paths.

    Parameters
    ----------
    problem : SaddleProblem or DivGramForm
    eps : float
        Penalty parameter, strictly positive.
    path : {"coupled", "eliminated", "both"}
        ``coupled`` solves the block system; ``eliminated`` solves
        ``(A + K/eps) u = F + gD/eps`` and recovers the multiplier as
        ``(Dc u - riesz)/eps``; ``both`` runs the two and checks that
        they agree to 1e-10 relative before returning the coupled one.
    want_pressure : bool
        Set to False to skip the multiplier (the only option for a
        problem without a multiplier basis).

    Raises
    ------
    SingularSystemError
        When the penalized system is singular (noncoercive problems at
        their critical penalty).
    MissingQBasisError
        When the multiplier (or the coupled path) is requested for a
        problem in multiplier-basis-free form.
    SaddleLabError
        When ``path="both"`` and the two solutions disagree.
    """
    if eps <= 0.0:
        raise ValueError(f"penalty parameter must be positive, got {eps}")
    if path not in ("coupled", "eliminated", "both"):
        raise ValueError(f"unknown path {path!r}")
    if isinstance(problem, DivGramForm):
        if want_pressure:
            raise MissingQBasisError(
                "cannot materialize the multiplier without a multiplier basis"
            )
        if path != "eliminated":
            raise MissingQBasisError(
                f"path {path!r} needs the explicit problem form"
            )
        u = _eliminated_u(problem.A, problem.K, problem.F, problem.gD, eps)
        return SaddleSolution(u=u, p=None)

    form = to_div_gram(problem)
    sol_elim = None
    if path in ("eliminated", "both"):
        u = _eliminated_u(form.A, form.K, form.F, form.gD, eps)
        p = (problem.Dc @ u - riesz_q(problem)) / eps
        sol_elim = SaddleSolution(u=u, p=p)
    if path == "eliminated":
        return sol_elim
    sol_coupled = kkt_solve(problem, eps)
    if path == "coupled":
        return sol_coupled
    scale = max(
        float(np.linalg.norm(sol_coupled.u)),
        float(np.linalg.norm(sol_elim.u)),
        float(np.linalg.norm(sol_coupled.p)),
        float(np.linalg.norm(sol_elim.p)),
        1e-300,
    )
    du = float(np.linalg.norm(sol_coupled.u - sol_elim.u))
    dp = float(np.linalg.norm(sol_coupled.p - sol_elim.p))
    if du > 1e-10 * scale or dp > 1e-10 * scale:
        raise SaddleLabError(
            f"coupled and eliminated solutions disagree at eps = {eps}: "
            f"|du| = {du:.3e}, |dp| = {dp:.3e}, scale = {scale:.3e}"
        )
    return sol_coupled


@dataclass(frozen=True)
class WeightedPenaltyResult:
    """Weighted-penalty solution with the modified stability constants."""

    solution: SaddleSolution
    kappa: float
    M_c: float
    M_D_c: float
    beta_c: float


def penalty_solve_weighted(
    problem: SaddleProblem, eps: float, C
) -> WeightedPenaltyResult:
    """Solve the penalized problem with a weighted penalty block.

    Replaces the ``(2,2)`` block ``-eps * M_Q`` of the coupled system by
    ``-eps * C`` for an SPD weight ``C``, and reports the spectral bounds
    of ``C`` against ``M_Q`` (``kappa``, ``M_c``) together with the
    correspondingly rescaled constraint constants
    ``M_D_c = M_D / sqrt(kappa)`` and ``beta_c = beta / sqrt(M_c)``.
    """
    if eps < 0.0:
        raise ValueError(f"penalty parameter must be nonnegative, got {eps}")
    C = as_square(C, "C")
    if C.shape[0] != problem.m:
        raise ValueError(f"C has dimension {C.shape[0]}, expected {problem.m}")
    factor_spd(C)
    if problem.m:
        eigs = sym_generalized_eig(sym_part(C), problem.M_Q).eigenvalues
        kappa, M_c = float(eigs[0]), float(eigs[-1])
    else:
        kappa = M_c = 1.0
    _, M_D = continuity_constants(problem)
    beta = inf_sup_beta(problem)
    n, m = problem.n, problem.m
    top = problem.Dc.T @ problem.M_Q
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = problem.A
    kkt[:n, n:] = top
    kkt[n:, :n] = top.T
    kkt[n:, n:] = -eps * C
    rhs = np.concatenate([problem.F, problem.Gq])
    sol = solve_dense(kkt, rhs)
    return WeightedPenaltyResult(
        solution=SaddleSolution(u=sol[:n], p=sol[n:]),
        kappa=kappa,
        M_c=M_c,
        M_D_c=M_D / math.sqrt(kappa) if kappa > 0 else math.inf,
        beta_c=beta / math.sqrt(M_c) if M_c > 0 else math.inf,
    )


def _norm(M: np.ndarray, v: np.ndarray) -> float:
    return math.sqrt(max(float(v @ (M @ v)), 0.0))


@dataclass(frozen=True)
class PenaltyReport:
    """Measured solution norms against their stability bounds at one eps."""

    eps: float
    solution: SaddleSolution
    split: KernelSplit
    norm_z: float
    norm_ztilde: float
    norm_p: float
    bound_z: float
    bound_ztilde: float
    bound_p: float
    pass_z: bool
    pass_ztilde: bool
    pass_p: bool

    @property
    def ok(self) -> bool:
        return self.pass_z and self.pass_ztilde and self.pass_p


def _bound_ok(measured: float, bound: float, scale: float) -> bool:
    return measured <= bound * SLACK + ATOL_FLOOR * scale


def penalty_stability_check(
    problem: SaddleProblem,
    eps_grid: Sequence[float],
    report: Optional[ConstantsReport] = None,
) -> List[PenaltyReport]:
    """Replay the stability bounds of the penalized solution on a grid.

    For every ``eps`` in the grid the problem is solved, the solution is
    split against the constraint kernel, and the three stability bounds
    are evaluated with the sharp constants: the kernel part against
    ``C1 * |F|_{Z'}``, the complement part against
    ``eps * C2 |F|_{hat}+ C3 |G|_{Q'}``, and the multiplier against
    ``C3 |F|_{hat} + C4 |G|_{Q'}``.  Bound violations are reported, not
    raised.
    """
    rep = derived_constants(problem) if report is None else report
    f_kernel = kernel_dual_norm(problem, problem.F)
    f_hat = hat_dual_norm(problem, problem.F)
    g_dual = multiplier_dual_norm(problem, problem.Gq)
    out = []
    for eps in eps_grid:
        if eps < 0.0:
            raise ValueError(f"penalty parameter must be nonnegative, got {eps}")
        sol = kkt_solve(problem, eps) if eps == 0.0 else penalty_solve(
            problem, eps, path="coupled"
        )
        split = decompose_kernel(problem, sol.u)
        nz = _norm(problem.M_V, split.z)
        nzt = _norm(problem.M_V, split.z_tilde)
        np_ = _norm(problem.M_Q, sol.p)
        scale = _norm(problem.M_V, sol.u) + np_
        bz = rep.C1 * f_kernel
        bzt = eps * rep.C2(eps) * f_hat + rep.C3(eps) * g_dual
        bp = rep.C3(eps) * f_hat + rep.C4(eps) * g_dual
        out.append(
            PenaltyReport(
                eps=eps,
                solution=sol,
                split=split,
                norm_z=nz,
                norm_ztilde=nzt,
                norm_p=np_,
                bound_z=bz,
                bound_ztilde=bzt,
                bound_p=bp,
                pass_z=_bound_ok(nz, bz, scale),
                pass_ztilde=_bound_ok(nzt, bzt, scale),
                pass_p=_bound_ok(np_, bp, scale),
            )
        )
    return out


@dataclass(frozen=True)
class PenaltyErrorRow:
    """Error of one penalized solve against the unpenalized reference."""

    eps: float
    z_deviation: float
    z_match: bool
    err_ztilde: float
    bound_ztilde: float
    pass_ztilde: bool
    err_p: float
    bound_p: float
    pass_p: bool
    err_ztilde_a: float

    @property
    def ok(self) -> bool:
        return self.z_match and self.pass_ztilde and self.pass_p


def penalty_error_check(
    problem: SaddleProblem,
    eps_grid: Sequence[float],
    report: Optional[ConstantsReport] = None,
) -> List[PenaltyErrorRow]:
    """Replay the penalty error bounds against the exact solution.

    Checks, per grid point: the kernel component is penalty-invariant
    (deviation at roundoff level); the complement error is bounded by
    ``eps * min(C2 (|F|_hat + M_a |z~_X|_V), C23 |p_X|_Q)``; and the
    multiplier error is bounded by
    ``min(eps * C4 |p_X|_Q, (M_a/beta) |z~_X - z~_eps|_V)``.  The
    complement error is also reported in the energy seminorm of the
    symmetric part (informational only).
    """
    rep = derived_constants(problem) if report is None else report
    ref = kkt_solve(problem, 0.0)
    ref_split = decompose_kernel(problem, ref.u)
    f_hat = hat_dual_norm(problem, problem.F)
    p_ref_norm = _norm(problem.M_Q, ref.p)
    u_ref_norm = _norm(problem.M_V, ref.u)
    nzt_ref = _norm(problem.M_V, ref_split.z_tilde)
    scale = u_ref_norm + p_ref_norm
    S = sym_part(problem.A)
    rows = []
    for eps in eps_grid:
        if eps <= 0.0:
            raise ValueError(f"penalty parameter must be positive, got {eps}")
        sol = penalty_solve(problem, eps, path="coupled")
        split = decompose_kernel(problem, sol.u)
        z_dev = _norm(problem.M_V, split.z - ref_split.z)
        z_rel = z_dev / max(u_ref_norm, 1e-300)
        dz = ref_split.z_tilde - split.z_tilde
        err_zt = _norm(problem.M_V, dz)
        err_zt_a = math.sqrt(max(float(dz @ (S @ dz)), 0.0))
        bound_zt = eps * min(
            rep.C2(eps) * (f_hat + rep.M_a * nzt_ref),
            rep.C23(eps) * p_ref_norm,
        )
        err_p = _norm(problem.M_Q, ref.p - sol.p)
        bound_p = min(
            eps * rep.C4(eps) * p_ref_norm,
            (rep.M_a / rep.beta) * err_zt if rep.beta > 0 else math.inf,
        )
        rows.append(
            PenaltyErrorRow(
                eps=eps,
                z_deviation=z_dev,
                z_match=z_rel <= 1e-10,
                err_ztilde=err_zt,
                bound_ztilde=bound_zt,
                pass_ztilde=_bound_ok(err_zt, bound_zt, scale),
                err_p=err_p,
                bound_p=bound_p,
                pass_p=_bound_ok(err_p, bound_p, scale),
                err_ztilde_a=err_zt_a,
            )
        )
    return rows


def stability_report_csv(reports: Sequence[PenaltyReport]) -> str:
    """Serialize stability reports to CSV text."""
    lines = [
        "eps,norm_z,bound_z,pass_z,norm_ztilde,bound_ztilde,pass_ztilde,"
        "norm_p,bound_p,pass_p"
    ]
    for r in reports:
        lines.append(
            "%.17g,%.17g,%.17g,%s,%.17g,%.17g,%s,%.17g,%.17g,%s"
            % (
                r.eps, r.norm_z, r.bound_z, r.pass_z,
                r.norm_ztilde, r.bound_ztilde, r.pass_ztilde,
                r.norm_p, r.bound_p, r.pass_p,
            )
        )
    return "\n".join(lines) + "\n"


def error_report_csv(rows: Sequence[PenaltyErrorRow]) -> str:
    """Serialize error-check rows to CSV text."""
    lines = [
        "eps,z_deviation,err_ztilde,bound_ztilde,pass_ztilde,"
        "err_p,bound_p,pass_p,err_ztilde_a"
    ]
    for r in rows:
        lines.append(
            "%.17g,%.17g,%.17g,%.17g,%s,%.17g,%.17g,%s,%.17g"
            % (
                r.eps, r.z_deviation, r.err_ztilde, r.bound_ztilde,
                r.pass_ztilde, r.err_p, r.bound_p, r.pass_p, r.err_ztilde_a,
            )
        )
    return "\n".join(lines) + "\n"
