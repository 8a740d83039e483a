"""Containers and reference solves for generalized saddle point problems.

Two forms of the same problem are first-class citizens.  A
:class:`SaddleProblem` is the explicit form: the constraint map is stored
as a coefficient matrix ``Dc`` in a known multiplier basis, together with
both Gram matrices.  A :class:`DivGramForm` keeps only what remains
computable when no multiplier basis is available: the velocity-space
matrices ``A``, ``M_V``, the constraint Gram ``K`` (with entries
``(D phi_j, D phi_i)_Q``), the load ``F`` and the lifted constraint load
``gD``.  Every solver in the package declares which of the two forms it
consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    InvalidProblemError,
    ProblemFormatError,
    SingularSystemError,
)
from .linalg import (
    as_matrix,
    as_square,
    as_vector,
    factor_lu,
    factor_spd,
    is_symmetric,
    sym_generalized_eig,
    sym_part,
)

RANK_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SaddleProblem:
    """Explicit assembled saddle point problem.

    Parameters
    ----------
    A : (n, n) array
        Matrix of the primal form, ``A[i, j] = a(phi_j, phi_i)``.
    Dc : (m, n) array
        Coefficients of the constraint map in the multiplier basis.
    M_V : (n, n) array
        SPD Gram matrix of the primal inner product.
    M_Q : (m, m) array
        SPD Gram matrix of the multiplier inner product.
    F : (n,) array
        Primal load, ``F[i] = F(phi_i)``.
    Gq : (m,) array
        Constraint load, ``Gq[i] = G(psi_i)``.

    Construction checks shapes and finiteness only; the numerically
    expensive invariants (SPD Grams, full-rank constraint) are checked by
    :func:`validate`, which is deliberately explicit so that
    near-degenerate study problems can still be built and handed to
    solvers.
    """

    A: np.ndarray
    Dc: np.ndarray
    M_V: np.ndarray
    M_Q: np.ndarray
    F: np.ndarray
    Gq: np.ndarray

    def __post_init__(self):
        A = as_square(self.A, "A")
        n = A.shape[0]
        Dc = as_matrix(self.Dc, "Dc")
        m = Dc.shape[0]
        if Dc.shape[1] != n:
            raise ValueError(f"Dc has {Dc.shape[1]} columns, expected {n}")
        M_V = as_square(self.M_V, "M_V")
        if M_V.shape[0] != n:
            raise ValueError(f"M_V has dimension {M_V.shape[0]}, expected {n}")
        M_Q = as_square(self.M_Q, "M_Q")
        if M_Q.shape[0] != m:
            raise ValueError(f"M_Q has dimension {M_Q.shape[0]}, expected {m}")
        F = as_vector(self.F, n, "F")
        Gq = as_vector(self.Gq, m, "Gq")
        for name, val in (("A", A), ("Dc", Dc), ("M_V", M_V), ("M_Q", M_Q),
                          ("F", F), ("Gq", Gq)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.Dc.shape[0]


@dataclass(frozen=True)
class DivGramForm:
    """Multiplier-basis-free form of a saddle point problem.

    Stores only the quantities computable without a basis for the
    multiplier space: ``K[i, j] = (D phi_j, D phi_i)_Q`` and
    ``gD[i] = G(D phi_i)`` alongside ``A``, ``M_V`` and ``F``.
    """

    A: np.ndarray
    M_V: np.ndarray
    K: np.ndarray
    F: np.ndarray
    gD: np.ndarray

    def __post_init__(self):
        A = as_square(self.A, "A")
        n = A.shape[0]
        M_V = as_square(self.M_V, "M_V")
        if M_V.shape[0] != n:
            raise ValueError(f"M_V has dimension {M_V.shape[0]}, expected {n}")
        K = as_square(self.K, "K")
        if K.shape[0] != n:
            raise ValueError(f"K has dimension {K.shape[0]}, expected {n}")
        if not is_symmetric(K):
            raise ValueError("K must be symmetric within 1e-10 relative")
        F = as_vector(self.F, n, "F")
        gD = as_vector(self.gD, n, "gD")
        for name, val in (("A", A), ("M_V", M_V), ("K", K), ("F", F),
                          ("gD", gD)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class PressureRep:
    """Multiplier iterate held in basis-free form.

    Denotes the multiplier ``p = Dc w - n_it * rho * Dc y``; with an
    explicit multiplier basis it can be materialized via
    :meth:`materialize`.
    """

    w: np.ndarray
    y: np.ndarray
    n_it: int
    rho: float

    def __post_init__(self):
        w = as_vector(self.w, None, "w")
        y = as_vector(self.y, w.shape[0], "y")
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "y", _frozen(y))

    def materialize(self, Dc) -> np.ndarray:
        Dc = as_matrix(Dc, "Dc")
        if Dc.shape[1] != self.w.shape[0]:
            raise ValueError(
                f"Dc has {Dc.shape[1]} columns, expected {self.w.shape[0]}"
            )
        return Dc @ self.w - self.n_it * self.rho * (Dc @ self.y)


@dataclass(frozen=True)
class SaddleSolution:
    """Primal coefficients plus a multiplier.

    The multiplier is an explicit coefficient vector, a basis-free
    :class:`PressureRep`, or ``None`` when it was not requested.
    """

    u: np.ndarray
    p: Union[np.ndarray, PressureRep, None]

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(as_vector(self.u, None, "u")))
        if self.p is not None and not isinstance(self.p, PressureRep):
            object.__setattr__(self, "p", _frozen(as_vector(self.p, None, "p")))


@dataclass(frozen=True)
class KernelSplit:
    """Decomposition u = z + z_tilde against the constraint kernel.

    ``z`` lies in the kernel of the constraint map; ``z_tilde`` lies in the
    complement that is a-orthogonal to the kernel (adjoint-orthogonal when
    ``hat_variant`` is set).
    """

    z: np.ndarray
    z_tilde: np.ndarray
    hat_variant: bool = False

    def __post_init__(self):
        z = as_vector(self.z, None, "z")
        z_tilde = as_vector(self.z_tilde, z.shape[0], "z_tilde")
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "z_tilde", _frozen(z_tilde))


@dataclass(frozen=True)
class ProblemDiagnostics:
    """Outcome of :func:`validate` on a problem that passed."""

    n: int
    m: int
    m_v_spd: bool
    m_q_spd: bool
    dc_rank: int
    a_symmetric: bool
    a_definiteness: str


def _constraint_rank(Dc: np.ndarray, rel_tol: float = RANK_RTOL) -> int:
    m = Dc.shape[0]
    if m == 0:
        return 0
    gram = Dc @ Dc.T
    eigs = sym_generalized_eig(sym_part(gram), np.eye(m)).eigenvalues
    sigma = np.sqrt(np.clip(eigs, 0.0, None))
    top = sigma[-1]
    if top == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rel_tol * top))


def validate(problem: SaddleProblem) -> ProblemDiagnostics:
    """Check the structural invariants of an explicit problem.

    Returns
    -------
    ProblemDiagnostics
        Flags for Gram definiteness, constraint rank, and symmetry /
        definiteness of ``A``.

    Raises
    ------
    InvalidProblemError
        With one itemized message per failed invariant (Grams not SPD,
        rank-deficient constraint).
    """
    failures = []
    m_v_spd = m_q_spd = True
    try:
        factor_spd(problem.M_V)
    except Exception as exc:
        m_v_spd = False
        failures.append(f"M_V is not SPD: {exc}")
    try:
        if problem.m:
            factor_spd(problem.M_Q)
    except Exception as exc:
        m_q_spd = False
        failures.append(f"M_Q is not SPD: {exc}")
    rank = _constraint_rank(problem.Dc)
    if rank != problem.m:
        failures.append(
            f"constraint matrix Dc is rank deficient: rank {rank} < m = {problem.m}"
        )
    if failures:
        raise InvalidProblemError(failures)

    a_sym = is_symmetric(problem.A)
    S = sym_part(problem.A)
    eigs = sym_generalized_eig(S, problem.M_V).eigenvalues
    scale = max(abs(eigs[0]), abs(eigs[-1]), 1e-300) if eigs.size else 1.0
    if eigs.size == 0 or eigs[0] > 1e-12 * scale:
        definiteness = "positive definite"
    elif eigs[0] >= -1e-12 * scale:
        definiteness = "positive semidefinite"
    else:
        definiteness = "indefinite"
    return ProblemDiagnostics(
        n=problem.n,
        m=problem.m,
        m_v_spd=m_v_spd,
        m_q_spd=m_q_spd,
        dc_rank=rank,
        a_symmetric=a_sym,
        a_definiteness=definiteness,
    )


def to_div_gram(problem: SaddleProblem) -> DivGramForm:
    """Convert an explicit problem to its multiplier-basis-free form.

    Computes ``K = Dc.T @ M_Q @ Dc`` and ``gD = Dc.T @ Gq``.
    """
    K = problem.Dc.T @ problem.M_Q @ problem.Dc
    K = sym_part(K)
    gD = problem.Dc.T @ problem.Gq
    return DivGramForm(A=problem.A, M_V=problem.M_V, K=K, F=problem.F, gD=gD)


def kkt_solve(problem: SaddleProblem, eps: float = 0.0) -> SaddleSolution:
    """Solve the coupled (possibly penalized) saddle point system directly.

    Assembles the ``(n + m)`` block system with blocks
    ``[[A, Dc.T M_Q], [M_Q Dc, -eps * M_Q]]`` against the right-hand side
    ``[F, Gq]`` and solves it with a pivoted LU factorization.  With
    ``eps = 0`` this is the reference solution of the constrained problem.

    Parameters
    ----------
    problem : SaddleProblem
    eps : float
        Penalty parameter, ``eps >= 0``.

    Returns
    -------
    SaddleSolution

    Raises
    ------
    SingularSystemError
        When the assembled system is numerically singular (which is the
        observable form of ill-posedness for noncoercive problems past
        their penalty threshold).
    """
    if eps < 0.0:
        raise ValueError(f"penalty parameter must be nonnegative, got {eps}")
    n, m = problem.n, problem.m
    top = problem.Dc.T @ problem.M_Q
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = problem.A
    kkt[:n, n:] = top
    kkt[n:, :n] = top.T
    kkt[n:, n:] = -eps * problem.M_Q
    rhs = np.concatenate([problem.F, problem.Gq])
    sol = factor_lu(kkt).solve(rhs)
    return SaddleSolution(u=sol[:n], p=sol[n:])


def riesz_q(problem: SaddleProblem) -> np.ndarray:
    """Riesz representative of the constraint load: solves M_Q q = Gq."""
    if problem.m == 0:
        return np.zeros(0)
    return factor_spd(problem.M_Q).solve(problem.Gq)


def project_structure_preserving(
    A,
    D_amb,
    M_amb,
    Qbasis,
    M_V=None,
    F=None,
    G_amb=None,
) -> SaddleProblem:
    """Restrict an ambient-valued constraint map to a multiplier subspace.

    Given a constraint map into a k-dimensional ambient space (coefficient
    matrix ``D_amb``, k×n, with ambient Gram ``M_amb``) and a subspace
    basis ``Qbasis`` (k×m), builds the problem whose constraint is the
    Gram projection of the ambient map onto that subspace:
    ``(Qbasis.T M_amb Qbasis) Dc = Qbasis.T M_amb D_amb`` and
    ``M_Q = Qbasis.T M_amb Qbasis``.

    Raises
    ------
    InvalidProblemError
        If the subspace basis is rank deficient.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    D_amb = as_matrix(D_amb, "D_amb")
    k = D_amb.shape[0]
    if D_amb.shape[1] != n:
        raise ValueError(f"D_amb has {D_amb.shape[1]} columns, expected {n}")
    M_amb = as_square(M_amb, "M_amb")
    if M_amb.shape[0] != k:
        raise ValueError(f"M_amb has dimension {M_amb.shape[0]}, expected {k}")
    Qbasis = as_matrix(Qbasis, "Qbasis")
    if Qbasis.shape[0] != k:
        raise ValueError(f"Qbasis has {Qbasis.shape[0]} rows, expected {k}")
    m = Qbasis.shape[1]
    M_Q = sym_part(Qbasis.T @ M_amb @ Qbasis)
    try:
        gram = factor_spd(M_Q) if m else None
    except Exception as exc:
        raise InvalidProblemError(
            [f"Qbasis is rank deficient: projected Gram is not SPD ({exc})"]
        )
    rhs = Qbasis.T @ M_amb @ D_amb
    Dc = gram.solve(rhs) if m else np.zeros((0, n))
    if M_V is None:
        M_V = np.eye(n)
    if F is None:
        F = np.zeros(n)
    if G_amb is None:
        Gq = np.zeros(m)
    else:
        G_amb = as_vector(G_amb, k, "G_amb")
        Gq = Qbasis.T @ G_amb
    return SaddleProblem(A=A, Dc=Dc, M_V=M_V, M_Q=M_Q, F=F, Gq=Gq)


# ------------------------------------------------------------------ file I/O

def _fmt_float(x: float) -> str:
    return "%.17g" % x


def _fmt_vector(v: np.ndarray) -> str:
    return "[" + ", ".join(_fmt_float(x) for x in v) + "]"


def _fmt_matrix(M: np.ndarray, indent: str) -> str:
    if M.shape[0] == 0:
        return "[]"
    rows = (indent + "  " + _fmt_vector(row) for row in M)
    return "[\n" + ",\n".join(rows) + "\n" + indent + "]"


def write_problem(problem: Union[SaddleProblem, DivGramForm], path) -> None:
    """Write a problem to a JSON text file (17 significant digit floats)."""
    lines = ["{"]
    if isinstance(problem, SaddleProblem):
        lines.append(f'  "n": {problem.n},')
        lines.append(f'  "m": {problem.m},')
        lines.append(f'  "A": {_fmt_matrix(problem.A, "  ")},')
        lines.append(f'  "Dc": {_fmt_matrix(problem.Dc, "  ")},')
        lines.append(f'  "M_V": {_fmt_matrix(problem.M_V, "  ")},')
        lines.append(f'  "M_Q": {_fmt_matrix(problem.M_Q, "  ")},')
        lines.append(f'  "F": {_fmt_vector(problem.F)},')
        lines.append(f'  "Gq": {_fmt_vector(problem.Gq)}')
    else:
        lines.append('  "qbasis_absent": true,')
        lines.append(f'  "n": {problem.n},')
        lines.append(f'  "A": {_fmt_matrix(problem.A, "  ")},')
        lines.append(f'  "M_V": {_fmt_matrix(problem.M_V, "  ")},')
        lines.append(f'  "K": {_fmt_matrix(problem.K, "  ")},')
        lines.append(f'  "F": {_fmt_vector(problem.F)},')
        lines.append(f'  "gD": {_fmt_vector(problem.gD)}')
    lines.append("}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _take(doc: dict, field: str):
    if field not in doc:
        raise ProblemFormatError(f"problem file is missing field {field!r}")
    return doc[field]


def _as_array(doc: dict, field: str, ndim: int) -> np.ndarray:
    raw = _take(doc, field)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"field {field!r} is not numeric: {exc}")
    if arr.ndim != ndim:
        if arr.ndim == 1 and ndim == 2 and arr.size == 0:
            arr = arr.reshape(0, 0)
        else:
            raise ProblemFormatError(
                f"field {field!r} must have {ndim} dimensions, got {arr.ndim}"
            )
    return arr


def read_problem(path) -> Union[SaddleProblem, DivGramForm]:
    """Read a problem file; returns the form the file declares.

    Files marked ``"qbasis_absent": true`` come back as
    :class:`DivGramForm`; everything else as :class:`SaddleProblem`.

    Raises
    ------
    ProblemFormatError
        Naming the offending field, or carrying the parser's line/column
        context for malformed text.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(
            f"problem file is not valid JSON at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}"
        )
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem file must contain a JSON object")
    n = _take(doc, "n")
    if doc.get("qbasis_absent", False):
        form = DivGramForm(
            A=_as_array(doc, "A", 2),
            M_V=_as_array(doc, "M_V", 2),
            K=_as_array(doc, "K", 2),
            F=_as_array(doc, "F", 1),
            gD=_as_array(doc, "gD", 1),
        )
        if form.n != n:
            raise ProblemFormatError(
                f"declared n = {n} does not match matrix dimension {form.n}"
            )
        return form
    m = _take(doc, "m")
    Dc = _as_array(doc, "Dc", 2)
    if Dc.size == 0:
        Dc = Dc.reshape(int(m), int(n)) if int(m) == 0 else Dc
    M_Q = _as_array(doc, "M_Q", 2)
    problem = SaddleProblem(
        A=_as_array(doc, "A", 2),
        Dc=Dc,
        M_V=_as_array(doc, "M_V", 2),
        M_Q=M_Q,
        F=_as_array(doc, "F", 1),
        Gq=_as_array(doc, "Gq", 1),
    )
    if problem.n != n or problem.m != m:
        raise ProblemFormatError(
            f"declared sizes (n = {n}, m = {m}) do not match matrices "
            f"({problem.n}, {problem.m})"
        )
    return problem
