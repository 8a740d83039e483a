"""Independent reference computations used by the test suite.

Everything here goes through numpy.linalg / scipy.linalg so that the
library's own factorizations and eigensolvers are checked against a
separate implementation, and brute-force projections are available where
the library deliberately avoids building explicit bases.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


def eig_pair_oracle(A, B):
    """Ascending eigenvalues of A x = lambda B x via scipy."""
    return np.sort(scipy.linalg.eigh(np.asarray(A, float), np.asarray(B, float))[0])


def rank_oracle(M, rel_tol=1e-10):
    M = np.asarray(M, float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rel_tol * s[0]))


def nullspace_oracle(M, rel_tol=1e-10):
    """Orthonormal basis (columns) of the numerical nullspace of M."""
    M = np.asarray(M, float)
    if M.size == 0:
        return np.eye(M.shape[1])
    u, s, vt = np.linalg.svd(M)
    cutoff = rel_tol * (s[0] if s.size else 0.0)
    keep = np.sum(s > cutoff)
    return vt[keep:].T


def random_spd(rng, d, cond=10.0):
    """Random SPD matrix with eigenvalues in [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    vals = np.linspace(1.0, cond, d)
    return (q * vals) @ q.T


def weighted_projector(basis, W):
    """W-orthogonal projector onto the column span of ``basis``."""
    B = np.asarray(basis, float)
    if B.size == 0:
        n = B.shape[0]
        return np.zeros((n, n))
    W = np.asarray(W, float)
    G = B.T @ W @ B
    return B @ np.linalg.solve(G, B.T @ W)


def hodge_split_oracle(d_below, d_here, W_below, W_here, W_above, u):
    """Brute-force Hodge split of a cochain by explicit projections.

    ``d_below`` maps (k-1)-cochains to k-cochains (None at the bottom),
    ``d_here`` maps k-cochains up (None at the top).  Splits ``u`` into
    (gradient, harmonic, coexact) parts, orthogonal in the W_here inner
    product.
    """
    u = np.asarray(u, float)
    n = u.shape[0]
    W_here = np.asarray(W_here, float)
    if d_below is not None and d_below.size:
        grad_proj = weighted_projector(np.asarray(d_below, float), W_here)
    else:
        grad_proj = np.zeros((n, n))
    if d_here is not None and d_here.size:
        # Coexact space: W_here^-1 d_here^T W_above applied to anything.
        co_basis = np.linalg.solve(W_here, np.asarray(d_here, float).T @ np.asarray(W_above, float))
        co_proj = weighted_projector(co_basis, W_here)
    else:
        co_proj = np.zeros((n, n))
    g = grad_proj @ u
    c = co_proj @ u
    h = u - g - c
    return g, h, c


def dual_norm_oracle(F, basis, M):
    """sup over span(basis) of F(v)/||v||_M via explicit Gram inversion."""
    B = np.asarray(basis, float)
    if B.size == 0:
        return 0.0
    f = B.T @ np.asarray(F, float)
    G = B.T @ np.asarray(M, float) @ B
    return float(np.sqrt(max(f @ np.linalg.solve(G, f), 0.0)))
