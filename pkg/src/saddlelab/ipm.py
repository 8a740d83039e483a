"""Iterated penalty iterations for constrained quadratic systems.

Two flavours of the same method live here.  The reference iteration
updates an explicit multiplier vector and needs a multiplier basis; the
basis-free variant accumulates a running sum of primal iterates instead,
so the multiplier only ever appears through the constraint Gram matrix.
Both factor their augmented operator once per run.  A closed-form error
oracle for symmetric coercive problems and a direct check of the error
propagation operators round out the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from .constants import classify_assumption, dz_spectrum
from .errors import NotApplicableError, TolOrderError
from .linalg import as_square, as_vector, factor_lu, factor_spd, sym_part
from .problems import (
    DivGramForm,
    PressureRep,
    SaddleProblem,
    SaddleSolution,
    kkt_solve,
    to_div_gram,
)

CONVERGED = "Converged"
MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class IpmConfig:
    """Parameters of one iterated penalty run.

    Parameters
    ----------
    rho : float
        Multiplier step size.
    lam : float, optional
        Penalty weight of the inner solves.  Defaults to ``rho``, the
        only combination the basis-free algorithm supports.
    tol1 : float, optional
        Stopping tolerance of the auxiliary constraint-representer run.
    tol2 : float, optional
        Stopping tolerance on the constraint residual of the main run.
    max_iters : int, optional
        Iteration cap.  Reaching it is reported as a termination status
        on the trace, not raised as an error.
    """

    rho: float
    lam: Optional[float] = None
    tol1: float = 2e-12
    tol2: float = 1e-11
    max_iters: int = 1000

    def __post_init__(self):
        if self.lam is None:
            object.__setattr__(self, "lam", self.rho)
        for name in ("rho", "lam", "tol1", "tol2"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val <= 0.0:
                raise ValueError(
                    f"{name} must be a positive finite number, got {val}"
                )
            object.__setattr__(self, name, val)
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        object.__setattr__(self, "max_iters", int(self.max_iters))


@dataclass(frozen=True)
class IpmTrace:
    """History of one iterated penalty run.

    Iterates are 1-indexed: entry ``k`` of every per-iteration tuple
    belongs to iteration ``k + 1``.  Explicit-multiplier runs fill
    ``pressures``; basis-free runs fill ``reps`` with deferred pressure
    states instead.  The error columns are populated only when a
    reference solution was supplied to the run.
    """

    us: Tuple[np.ndarray, ...]
    residuals: Tuple[float, ...]
    status: str
    pressures: Optional[Tuple[np.ndarray, ...]] = None
    reps: Optional[Tuple[PressureRep, ...]] = None
    err_u_V: Optional[Tuple[float, ...]] = None
    err_u_a: Optional[Tuple[float, ...]] = None
    err_p_Q: Optional[Tuple[float, ...]] = None

    @property
    def iterations(self) -> int:
        return len(self.us)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _weighted_norm(vec: np.ndarray, weight: np.ndarray) -> float:
    return math.sqrt(max(float(vec @ (weight @ vec)), 0.0))


def ipm_reference(
    problem: SaddleProblem,
    cfg: IpmConfig,
    F=None,
    Gq=None,
    reference: Optional[SaddleSolution] = None,
) -> IpmTrace:
    """Run the explicit-multiplier iterated penalty method.

    Starting from a zero multiplier, each step solves the penalty-
    augmented primal system against the current multiplier and then
    takes a scaled multiplier step along the constraint residual.  The
    run stops once the weighted constraint residual drops below
    ``cfg.tol2``.

    Parameters
    ----------
    problem : SaddleProblem
        Explicit problem (multiplier basis available).
    cfg : IpmConfig
    F, Gq : array_like, optional
        Load overrides; default to the loads stored on the problem.
    reference : SaddleSolution, optional
        Exact solution; when given, per-iteration error norms are
        recorded on the trace.

    Returns
    -------
    IpmTrace

    Raises
    ------
    SingularSystemError
        If the penalty-augmented operator cannot be factored.
    """
    if not isinstance(problem, SaddleProblem):
        raise NotApplicableError(
            "the reference iteration needs an explicit multiplier basis"
        )
    n, m = problem.n, problem.m
    F = problem.F if F is None else as_vector(F, n, "F")
    Gq = problem.Gq if Gq is None else as_vector(Gq, m, "Gq")
    form = to_div_gram(problem)
    gD = form.gD if Gq is problem.Gq else problem.Dc.T @ Gq
    riesz = factor_spd(problem.M_Q).solve(Gq) if m else np.zeros(0)

    lam, rho = cfg.lam, cfg.rho
    Dc, M_Q, M_V = problem.Dc, problem.M_Q, problem.M_V
    aug = factor_lu(problem.A + lam * form.K)
    top = Dc.T @ M_Q
    base = F + lam * gD

    if reference is not None:
        u_ref = as_vector(reference.u, n, "reference.u")
        p_ref = as_vector(reference.p, m, "reference.p")
        S = sym_part(problem.A)

    p = np.zeros(m)
    us, ps, residuals = [], [], []
    errs_uv, errs_ua, errs_pq = [], [], []
    status = MAX_ITERS
    for _ in range(cfg.max_iters):
        u = aug.solve(base - top @ p)
        d = Dc @ u - riesz
        res = _weighted_norm(d, M_Q)
        p = p + rho * d
        us.append(u)
        ps.append(p)
        residuals.append(res)
        if reference is not None:
            du = u - u_ref
            errs_uv.append(_weighted_norm(du, M_V))
            errs_ua.append(_weighted_norm(du, S))
            errs_pq.append(_weighted_norm(p - p_ref, M_Q))
        if res < cfg.tol2:
            status = CONVERGED
            break
    return IpmTrace(
        us=tuple(us),
        residuals=tuple(residuals),
        status=status,
        pressures=tuple(ps),
        err_u_V=tuple(errs_uv) if reference is not None else None,
        err_u_a=tuple(errs_ua) if reference is not None else None,
        err_p_Q=tuple(errs_pq) if reference is not None else None,
    )


def partial_ipm(
    a_matrix,
    K,
    F,
    gD,
    rho: float,
    y,
    tol: float,
    max_iters: int = 1000,
) -> Tuple[np.ndarray, np.ndarray, IpmTrace]:
    """Run the basis-free iterated penalty loop on raw matrix data.

    The multiplier never appears.  Its information is carried by the
    running sum ``w`` of scaled primal iterates, and the stopping test
    measures the constraint residual against the target through the
    constraint Gram matrix: ``sqrt((mu - y)^T K (mu - y)) < tol``.

    Parameters
    ----------
    a_matrix : (n, n) array_like
        Primal quadratic form.
    K : (n, n) array_like
        Constraint Gram matrix.
    F, gD : (n,) array_like
        Primal load and constraint load pulled back to the primal space.
    rho : float
        Penalty weight and multiplier step size (shared).
    y : (n,) array_like
        Carrier of the constraint target: the residual is measured
        against ``D y``.  Pass zeros for a homogeneous target.
    tol : float
        Stopping tolerance.
    max_iters : int, optional

    Returns
    -------
    (u, w, trace)
        Final primal iterate, final running sum, and the run history
        with one deferred pressure state per iteration.

    Raises
    ------
    SingularSystemError
        If ``a_matrix + rho * K`` cannot be factored.
    """
    A = as_square(a_matrix, "a_matrix")
    n = A.shape[0]
    K = as_square(K, "K")
    if K.shape[0] != n:
        raise ValueError(f"K has dimension {K.shape[0]}, expected {n}")
    F = as_vector(F, n, "F")
    gD = as_vector(gD, n, "gD")
    y = as_vector(y, n, "y")
    rho = float(rho)
    if not math.isfinite(rho) or rho <= 0.0:
        raise ValueError(f"rho must be a positive finite number, got {rho}")
    tol = float(tol)
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")

    aug = factor_lu(A + rho * K)
    w = np.zeros(n)
    us, reps, residuals = [], [], []
    status = MAX_ITERS
    for it in range(1, max_iters + 1):
        mu = aug.solve(F - K @ w + (it * rho) * gD)
        w = w + rho * mu
        d = mu - y
        res = _weighted_norm(d, K)
        us.append(mu)
        reps.append(PressureRep(w=w, y=y, n_it=it, rho=rho))
        residuals.append(res)
        if res < tol:
            status = CONVERGED
            break
    trace = IpmTrace(
        us=tuple(us),
        residuals=tuple(residuals),
        status=status,
        reps=tuple(reps),
    )
    return us[-1], w, trace


def ipm_solve(
    form: Union[DivGramForm, SaddleProblem],
    cfg: IpmConfig,
    riesz_y=None,
) -> Tuple[np.ndarray, PressureRep, Tuple[IpmTrace, Optional[IpmTrace]]]:
    """Solve a constrained system without ever forming a multiplier.

    With a homogeneous constraint load the basis-free loop runs once
    with a zero target.  Otherwise an auxiliary run against the ambient
    inner product first computes a primal carrier ``y_m`` of the
    constraint target to tolerance ``cfg.tol1``, and the main run then
    measures its residual against ``D y_m`` to the coarser ``cfg.tol2``.
    The returned pressure state defers materialization until a
    multiplier basis is available.

    Parameters
    ----------
    form : DivGramForm or SaddleProblem
        Problems are converted to their basis-free form first.
    cfg : IpmConfig
        Must have ``lam == rho``.
    riesz_y : (n,) array_like, optional
        Caller-supplied carrier with ``D y`` equal to the constraint
        target; skips the auxiliary run.

    Returns
    -------
    (u, rep, traces)
        Final iterate, deferred pressure state, and a pair
        ``(main, auxiliary)`` of traces where the auxiliary entry is
        ``None`` whenever no auxiliary run happened.

    Raises
    ------
    TolOrderError
        If an auxiliary run is needed but ``cfg.tol2 <= cfg.tol1``.
    SingularSystemError
        If an augmented operator cannot be factored.
    """
    if isinstance(form, SaddleProblem):
        form = to_div_gram(form)
    if cfg.lam != cfg.rho:
        raise ValueError(
            "the basis-free iteration carries the multiplier as a running sum, "
            f"which requires lam == rho; got lam={cfg.lam}, rho={cfg.rho}"
        )
    rho = cfg.rho
    n = form.n
    zeros = np.zeros(n)
    sub_trace = None
    if riesz_y is not None:
        y = as_vector(riesz_y, n, "riesz_y")
    elif not form.gD.any():
        y = zeros
    else:
        if cfg.tol2 <= cfg.tol1:
            raise TolOrderError(
                "the auxiliary tolerance must be strictly tighter than the "
                f"main one: got tol1={cfg.tol1}, tol2={cfg.tol2}"
            )
        _, y, sub_trace = partial_ipm(
            form.M_V, form.K, form.gD, zeros, rho, zeros, cfg.tol1, cfg.max_iters
        )
    u, w, main_trace = partial_ipm(
        form.A, form.K, form.F, form.gD, rho, y, cfg.tol2, cfg.max_iters
    )
    return u, main_trace.reps[-1], (main_trace, sub_trace)


@dataclass(frozen=True)
class PropagationReport:
    """Deviation of the one-step error recursions from the actual run."""

    max_deviation: float
    u_deviations: Tuple[float, ...]
    p_deviations: Tuple[float, ...]

    @property
    def iterations(self) -> int:
        return len(self.u_deviations)


def check_error_propagation(
    problem: SaddleProblem, cfg: IpmConfig, n: int
) -> PropagationReport:
    """Check the closed-form error recursions against an actual run.

    The primal error is propagated by repeatedly subtracting the
    augmented-solve image of its constraint Gram product, starting from
    the exact-minus-penalized difference; the multiplier error is
    propagated by a matrix-form complement of the penalized Schur
    complement applied to the exact multiplier.  Both predictions are
    compared against the errors of an actual ``n``-step run.

    Parameters
    ----------
    problem : SaddleProblem
    cfg : IpmConfig
    n : int
        Number of iterations to verify.

    Returns
    -------
    PropagationReport
        Per-iteration deviations relative to the solution scale, along
        with their maximum.  At iteration 1 the primal deviation is
        exactly zero because both paths perform the identical solve.
    """
    if not isinstance(problem, SaddleProblem):
        raise NotApplicableError("error propagation needs an explicit problem")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    form = to_div_gram(problem)
    lam, rho = cfg.lam, cfg.rho
    aug = factor_lu(problem.A + lam * form.K)
    ref = kkt_solve(problem)
    u_x, p_x = ref.u, ref.p
    u_pen = aug.solve(problem.F + lam * form.gD)

    run = ipm_reference(
        problem, replace(cfg, tol2=5e-324, max_iters=n), reference=ref
    )

    top = problem.Dc.T @ problem.M_Q
    prop_p = np.eye(problem.m) - rho * (problem.Dc @ aug.solve(top))

    scale = max(
        _weighted_norm(u_x, problem.M_V),
        _weighted_norm(p_x, problem.M_Q),
        1e-300,
    )
    e_u = u_x - u_pen
    e_p = p_x
    u_devs, p_devs = [], []
    for k in range(run.iterations):
        if k:
            e_u = e_u - rho * aug.solve(form.K @ e_u)
        e_p = prop_p @ e_p
        du = e_u - (u_x - run.us[k])
        dp = e_p - (p_x - run.pressures[k])
        u_devs.append(_weighted_norm(du, problem.M_V) / scale)
        p_devs.append(_weighted_norm(dp, problem.M_Q) / scale)
    worst = max(max(u_devs), max(p_devs))
    return PropagationReport(
        max_deviation=worst,
        u_deviations=tuple(u_devs),
        p_deviations=tuple(p_devs),
    )


@dataclass(frozen=True)
class SpdErrorPrediction:
    """Closed-form per-iteration error curves of the iteration.

    All per-iteration arrays are 1-indexed like traces: entry ``k``
    predicts iteration ``k + 1``.  The ``*_first``/``*_rest`` pairs
    split each curve into the lowest constraint mode's contribution and
    the combined contribution of every remaining mode.
    """

    sigmas: np.ndarray
    coefficients: np.ndarray
    pred_u_a: np.ndarray
    pred_p_Q: np.ndarray
    pred_div_Q: np.ndarray
    rate: float
    u_a_first: np.ndarray
    u_a_rest: np.ndarray
    p_first: np.ndarray
    p_rest: np.ndarray
    div_first: np.ndarray
    div_rest: np.ndarray


def spd_error_oracle(
    problem: Union[SaddleProblem, DivGramForm], cfg: IpmConfig, n_max: int
) -> SpdErrorPrediction:
    """Predict the exact error curves of a symmetric coercive problem.

    Expands the loads in the constraint singular basis of the kernel
    complement and propagates each mode through the known one-step
    recursion, yielding the energy-norm primal error, the multiplier
    error and the constraint residual at every iteration — exact up to
    roundoff, for any positive pair of iteration parameters.

    Parameters
    ----------
    problem : SaddleProblem or DivGramForm
    cfg : IpmConfig
    n_max : int
        Number of iterations to predict.

    Returns
    -------
    SpdErrorPrediction

    Raises
    ------
    NotApplicableError
        If the primal form is not symmetric positive definite.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    klass, _ = classify_assumption(problem)
    if klass != "A3":
        raise NotApplicableError(
            "closed-form error curves need a symmetric coercive primal form, "
            f"got class {klass}"
        )
    spectrum = dz_spectrum(problem)
    if isinstance(problem, SaddleProblem):
        F, gD = problem.F, to_div_gram(problem).gD
    else:
        F, gD = problem.F, problem.gD
    sig = spectrum.sigmas
    lam, rho = cfg.lam, cfg.rho

    if sig.size == 0:
        empty = np.zeros(n_max)
        return SpdErrorPrediction(
            sigmas=sig.copy(),
            coefficients=np.zeros(0),
            pred_u_a=empty.copy(),
            pred_p_Q=empty.copy(),
            pred_div_Q=empty.copy(),
            rate=0.0,
            u_a_first=empty.copy(),
            u_a_rest=empty.copy(),
            p_first=empty.copy(),
            p_rest=empty.copy(),
            div_first=empty.copy(),
            div_rest=empty.copy(),
        )

    coeff = spectrum.ztilde.T @ F - (spectrum.ztilde.T @ gD) / sig**2
    t = np.abs(1.0 + (lam - rho) * sig**2)
    d = 1.0 + lam * sig**2
    ratio = t / d

    # amp[k] = t^k / d^(k+1) drives the primal and residual curves at
    # iteration k+1; p_amp[k] = (t/d)^(k+1) drives the multiplier curve.
    amp = np.empty((n_max, sig.size))
    p_amp = np.empty((n_max, sig.size))
    cur = 1.0 / d
    for k in range(n_max):
        amp[k] = cur
        cur = cur * ratio
    cur = ratio.copy()
    for k in range(n_max):
        p_amp[k] = cur
        cur = cur * ratio

    u_terms = (amp * coeff) ** 2
    p_terms = (p_amp * coeff / sig) ** 2
    div_terms = (amp * sig * coeff) ** 2

    def _curve(terms):
        total = np.sqrt(terms.sum(axis=1))
        first = np.sqrt(terms[:, 0])
        rest = np.sqrt(terms[:, 1:].sum(axis=1))
        return total, first, rest

    pred_u, u_first, u_rest = _curve(u_terms)
    pred_p, p_first, p_rest = _curve(p_terms)
    pred_div, div_first, div_rest = _curve(div_terms)

    beta_a, M_Da = spectrum.beta_a, spectrum.M_D_a
    rate = max(
        (1.0 + (lam - rho) * beta_a**2) / (1.0 + lam * beta_a**2),
        ((rho - lam) * M_Da**2 - 1.0) / (1.0 + lam * M_Da**2),
    )
    return SpdErrorPrediction(
        sigmas=sig.copy(),
        coefficients=coeff,
        pred_u_a=pred_u,
        pred_p_Q=pred_p,
        pred_div_Q=pred_div,
        rate=rate,
        u_a_first=u_first,
        u_a_rest=u_rest,
        p_first=p_first,
        p_rest=p_rest,
        div_first=div_first,
        div_rest=div_rest,
    )


def trace_csv(
    trace: IpmTrace, prediction: Optional[SpdErrorPrediction] = None
) -> str:
    """Render a run history as CSV text.

    Columns are ``iter, residual_Q, err_u_V, err_u_a, err_p_Q,
    predicted_u_a, predicted_p_Q``; cells without data stay empty.
    """
    lines = ["iter,residual_Q,err_u_V,err_u_a,err_p_Q,predicted_u_a,predicted_p_Q"]
    for k in range(trace.iterations):
        cells = [str(k + 1), "%.17g" % trace.residuals[k]]
        for col in (trace.err_u_V, trace.err_u_a, trace.err_p_Q):
            cells.append("%.17g" % col[k] if col is not None else "")
        if prediction is not None and k < prediction.pred_u_a.shape[0]:
            cells.append("%.17g" % prediction.pred_u_a[k])
            cells.append("%.17g" % prediction.pred_p_Q[k])
        else:
            cells.extend(["", ""])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
