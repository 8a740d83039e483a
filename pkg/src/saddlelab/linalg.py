"""Self-contained dense linear algebra kernel.

Everything downstream (saddle solves, constants, eigendecompositions)
is built on the four routines here: an SPD Cholesky factorization, a
row-pivoted LU solve, a symmetric generalized eigensolver (Cholesky
reduction followed by cyclic Jacobi sweeps), and Gram-orthonormal
kernel extraction.  All storage is dense float64 and dimensions are
capped so every experiment stays at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotSpdError, SingularSystemError

MAX_DIM = 2000

# Relative pivot thresholds, scaled by dimension (see factor_spd / factor_lu).
_SPD_PIVOT_RTOL = 1e-14
_LU_PIVOT_RTOL = 1e-14
# Cyclic Jacobi stops once the off-diagonal Frobenius mass is this far
# below the (rotation-invariant) Frobenius norm of the reduced matrix.
_JACOBI_OFF_RTOL = 1e-13
_JACOBI_MAX_SWEEPS = 60


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-d array (no squareness requirement)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {M.shape}")
    if max(M.shape, default=0) > MAX_DIM:
        raise ValueError(f"{name} dimension {max(M.shape)} exceeds cap {MAX_DIM}")
    if M.size and not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_square(M, name: str = "matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def as_vector(b, dim: int | None = None, name: str = "vector") -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {b.shape}")
    if dim is not None and b.shape[0] != dim:
        raise ValueError(f"{name} has length {b.shape[0]}, expected {dim}")
    if b.size and not np.all(np.isfinite(b)):
        raise ValueError(f"{name} has non-finite entries")
    return b


def sym_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def is_symmetric(A: np.ndarray, rtol: float = 1e-10) -> bool:
    nrm = np.linalg.norm(A)
    if nrm == 0.0:
        return True
    return np.linalg.norm(A - A.T) <= rtol * nrm


@dataclass(frozen=True)
class SpdFactorization:
    """Lower-triangular factor of an SPD matrix, M = L @ L.T."""

    L: np.ndarray

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def solve(self, b) -> np.ndarray:
        """Solve M x = b (b may be a vector or a matrix of columns)."""
        y = solve_lower(self.L, np.asarray(b, dtype=float))
        return solve_upper(self.L.T, y)

    def half_solve(self, b) -> np.ndarray:
        """Solve L y = b, the whitening half of the factorization."""
        return solve_lower(self.L, np.asarray(b, dtype=float))


@dataclass(frozen=True)
class LuFactorization:
    """Packed row-pivoted LU data: P A = L U with unit-diagonal L."""

    lu: np.ndarray
    perm: np.ndarray

    @property
    def dim(self) -> int:
        return self.lu.shape[0]

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        d = self.dim
        if b.shape[0] != d:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {d}")
        x = b[self.perm].astype(float, copy=True)
        for i in range(1, d):
            x[i] -= self.lu[i, :i] @ x[:i]
        for i in range(d - 1, -1, -1):
            if i + 1 < d:
                x[i] -= self.lu[i, i + 1 :] @ x[i + 1 :]
            x[i] /= self.lu[i, i]
        return x


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for lower-triangular L."""
    d = L.shape[0]
    y = np.array(b, dtype=float, copy=True)
    for i in range(d):
        if i:
            y[i] -= L[i, :i] @ y[:i]
        y[i] /= L[i, i]
    return y


def solve_upper(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back substitution for upper-triangular U."""
    d = U.shape[0]
    x = np.array(b, dtype=float, copy=True)
    for i in range(d - 1, -1, -1):
        if i + 1 < d:
            x[i] -= U[i, i + 1 :] @ x[i + 1 :]
        x[i] /= U[i, i]
    return x


def factor_spd(M) -> SpdFactorization:
    """Cholesky-factor a symmetric positive definite matrix.

    Parameters
    ----------
    M : (d, d) array_like
        Symmetric (to 1e-12 relative) positive definite matrix.

    Returns
    -------
    SpdFactorization
        Lower-triangular ``L`` with ``M = L @ L.T``.

    Raises
    ------
    NotSpdError
        If ``M`` is not symmetric at working precision, or an updated
        pivot falls to or below ``d * 1e-14 * max(diag M)``.
    """
    M = as_square(M, "M")
    d = M.shape[0]
    if d == 0:
        return SpdFactorization(np.zeros((0, 0)))
    nrm = np.linalg.norm(M)
    if nrm > 0.0 and np.linalg.norm(M - M.T) > 1e-12 * nrm:
        raise NotSpdError("matrix is not symmetric at working precision")
    a = sym_part(M)
    max_diag = float(np.max(np.abs(np.diag(a)))) if d else 0.0
    thresh = d * _SPD_PIVOT_RTOL * max_diag
    L = np.zeros((d, d))
    for j in range(d):
        pivot = a[j, j]
        if pivot <= thresh:
            raise NotSpdError(
                f"pivot {pivot:.6e} at column {j} is below the positive-definiteness "
                f"threshold {thresh:.6e}"
            )
        ljj = np.sqrt(pivot)
        L[j, j] = ljj
        if j + 1 < d:
            col = a[j + 1 :, j] / ljj
            L[j + 1 :, j] = col
            a[j + 1 :, j + 1 :] -= np.outer(col, col)
    return SpdFactorization(L)


def factor_lu(A) -> LuFactorization:
    """Row-pivoted LU factorization of a square matrix.

    Raises
    ------
    SingularSystemError
        If the best available pivot magnitude is at or below
        ``d * 1e-14 * max|A|``.
    """
    A = as_square(A, "A")
    d = A.shape[0]
    lu = A.copy()
    perm = np.arange(d)
    thresh = d * _LU_PIVOT_RTOL * (float(np.max(np.abs(A))) if d else 0.0)
    for k in range(d):
        r = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[r, k]) <= thresh:
            raise SingularSystemError(
                f"pivot {lu[r, k]:.6e} at column {k} is below the singularity "
                f"threshold {thresh:.6e}"
            )
        if r != k:
            lu[[k, r]] = lu[[r, k]]
            perm[[k, r]] = perm[[r, k]]
        lu[k + 1 :, k] /= lu[k, k]
        if k + 1 < d:
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return LuFactorization(lu, perm)


def solve_dense(A, b) -> np.ndarray:
    """Solve A x = b by row-pivoted LU.

    Parameters
    ----------
    A : (d, d) array_like
    b : (d,) array_like

    Returns
    -------
    (d,) ndarray

    Raises
    ------
    SingularSystemError
        When a pivot falls below the relative threshold, signalling that
        the assembled system is not invertible at working precision.
    """
    A = as_square(A, "A")
    b = as_vector(b, A.shape[0], "b")
    return factor_lu(A).solve(b)


@dataclass(frozen=True)
class GeneralizedSpectrum:
    """Full spectrum of A x = lambda B x with B-orthonormal eigenvectors.

    ``eigenvalues`` ascend; ``eigenvectors[:, i]`` belongs to
    ``eigenvalues[i]`` and the columns satisfy X.T @ B @ X = I.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _jacobi_diagonalize(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi sweeps on a symmetric matrix.

    Returns (eigenvalues, V) with C @ V = V @ diag(eigenvalues), V
    orthogonal; unordered.
    """
    d = C.shape[0]
    a = C.copy()
    V = np.eye(d)
    if d < 2:
        return np.diag(a).copy(), V
    fro = np.linalg.norm(a)
    if fro == 0.0:
        return np.zeros(d), V
    # Skipping rotations this small can never stall the global test below.
    skip = _JACOBI_OFF_RTOL * fro / (2.0 * d)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= _JACOBI_OFF_RTOL * fro:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ rot
                V[:, [p, q]] = V[:, [p, q]] @ rot
    else:
        raise ArithmeticError("Jacobi diagonalization failed to converge")
    return np.diag(a).copy(), V


def sym_generalized_eig(A, B) -> GeneralizedSpectrum:
    """Solve the symmetric generalized eigenproblem A x = lambda B x.

    Parameters
    ----------
    A : (d, d) array_like
        Symmetric to 1e-10 relative.
    B : (d, d) array_like
        Symmetric positive definite (must pass :func:`factor_spd`).

    Returns
    -------
    GeneralizedSpectrum
        Ascending eigenvalues with B-orthonormal eigenvectors.  The
        problem is reduced through B = L L^T to a standard symmetric one
        and diagonalized by cyclic Jacobi rotations.  Each eigenvector's
        entry of largest magnitude is made positive (first such entry on
        ties) so repeated runs are deterministic.

    Raises
    ------
    NotSpdError
        Propagated from the factorization of B.
    """
    A = as_square(A, "A")
    B = as_square(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: A is {A.shape}, B is {B.shape}")
    if not is_symmetric(A, 1e-10):
        raise ValueError("A must be symmetric for the generalized eigensolver")
    chol = factor_spd(B)
    d = A.shape[0]
    if d == 0:
        return GeneralizedSpectrum(np.zeros(0), np.zeros((0, 0)))
    # C = L^-1 A L^-T, symmetric; its spectrum equals the pencil's.
    C = chol.half_solve(chol.half_solve(sym_part(A)).T)
    C = sym_part(C)
    vals, Vstd = _jacobi_diagonalize(C)
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    # Map standard-problem vectors back: x = L^-T y, giving X^T B X = I.
    X = solve_upper(chol.L.T, Vstd[:, order])
    for j in range(d):
        lead = int(np.argmax(np.abs(X[:, j])))
        if X[lead, j] < 0.0:
            X[:, j] = -X[:, j]
    return GeneralizedSpectrum(vals, X)


def gram_orthonormal_kernel(K, M, rel_tol: float = 1e-10) -> np.ndarray:
    """Extract an M-orthonormal basis of the numerical kernel of K.

    Parameters
    ----------
    K : (d, d) array_like
        Symmetric positive semi-definite.
    M : (d, d) array_like
        SPD Gram matrix fixing the geometry.
    rel_tol : float
        An eigenvalue of (K, M) counts as zero iff it is at most
        ``rel_tol`` times the largest eigenvalue.

    Returns
    -------
    (d, k) ndarray
        Columns span {v : K v = 0 numerically} and are M-orthonormal.
    """
    spec = sym_generalized_eig(K, M)
    if spec.dim == 0:
        return np.zeros((0, 0))
    lam_max = float(spec.eigenvalues[-1])
    if lam_max <= 0.0:
        # K vanishes at working precision: the kernel is everything.
        return spec.eigenvectors
    mask = spec.eigenvalues <= rel_tol * lam_max
    return spec.eigenvectors[:, mask]


def smallest_singular_value(M) -> float:
    """Smallest singular value of a square matrix (0x0 gives +inf)."""
    M = as_square(M, "M")
    if M.shape[0] == 0:
        return np.inf
    spec = sym_generalized_eig(M.T @ M, np.eye(M.shape[0]))
    return float(np.sqrt(max(spec.eigenvalues[0], 0.0)))
