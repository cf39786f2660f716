"""Kronecker-product algebra: matrix-free Kronecker sums and their solves.

The d-term Kronecker sum of an n x n matrix X is

    L_d(X) = X (x) I (x) ... (x) I  +  ...  +  I (x) ... (x) I (x) X,

acting on vectors of length n^d.  All routines here work on the reshaped
(n, ..., n) tensor and never materialize the n^d x n^d matrix.
"""

import itertools
import math

import numpy as np
import scipy.linalg as spla

from .errors import BudgetExceededError, SingularSystemError

#: Default cap on the number of entries of any Kronecker-structured vector.
DEFAULT_ENTRY_BUDGET = 10**6


def kron_vec(u, v):
    """Kronecker product of two vectors: result[i*b + j] = u[i]*v[j]."""
    u = np.asarray(u)
    v = np.asarray(v)
    return np.multiply.outer(u, v).reshape(u.size * v.size)


def _check_budget(n, d, budget):
    if n**d > budget:
        raise BudgetExceededError(
            f"Kronecker vector of size {n}^{d} = {n**d} exceeds the "
            f"entry budget {budget}"
        )


def apply_kron_sum(X, d, v, budget=DEFAULT_ENTRY_BUDGET):
    """Evaluate L_d(X) @ v without forming the n^d x n^d matrix.

    Parameters
    ----------
    X : (n, n) array
    d : int, degree >= 1
    v : array of length n**d
    budget : int, maximum allowed n**d
    """
    X = np.asarray(X)
    n = X.shape[0]
    if X.shape != (n, n):
        raise ValueError("X must be square")
    _check_budget(n, d, budget)
    v = np.asarray(v)
    if v.size != n**d:
        raise ValueError(f"v has size {v.size}, expected {n}^{d} = {n**d}")
    T = v.reshape((n,) * d)
    out = np.zeros_like(T, dtype=np.result_type(X, v))
    for j in range(d):
        # contract X into axis j, leaving axis order unchanged
        out += np.moveaxis(np.tensordot(X, T, axes=(1, j)), 0, j)
    return out.reshape(v.size)


def solve_kron_sum(X, d, rhs, budget=DEFAULT_ENTRY_BUDGET, tol=1e-9,
                   max_refine=3):
    """Solve L_d(X) y = rhs via the eigendecomposition of X.

    X = V diag(lam) inv(V) diagonalizes L_d(X) in the tensor basis
    V (x) ... (x) V with eigenvalues given by d-fold sums of lam.  A few
    iterative-refinement sweeps recover accuracy when V is ill conditioned.

    Raises
    ------
    SingularSystemError
        If any d-fold eigenvalue sum is within 1e-12 of zero, or the
        residual cannot be driven below ``tol * ||rhs||``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    _check_budget(n, d, budget)
    rhs = np.asarray(rhs)
    if rhs.size != n**d:
        raise ValueError(f"rhs has size {rhs.size}, expected {n**d}")

    lam, V = spla.eig(X)
    Vinv = spla.inv(V)

    # eigenvalue sums over all index tuples as a dense (n,)*d tensor
    sums = lam
    for _ in range(d - 1):
        sums = np.add.outer(sums, lam)
    if np.min(np.abs(sums)) < 1e-12:
        raise SingularSystemError(
            "a d-fold eigenvalue sum of X is numerically zero; "
            "L_d(X) is singular"
        )

    def transform(T, A):
        for j in range(d):
            T = np.moveaxis(np.tensordot(A, T, axes=(1, j)), 0, j)
        return T

    def solve_once(r):
        W = transform(r.reshape((n,) * d).astype(complex), Vinv)
        W /= sums
        return transform(W, V).reshape(r.size)

    real_data = not (np.iscomplexobj(rhs) or np.iscomplexobj(X))
    y = solve_once(rhs)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs, dtype=float if real_data else complex)
    for _ in range(max_refine):
        res = rhs - apply_kron_sum(X, d, y, budget=budget)
        if np.linalg.norm(res) <= tol * rhs_norm:
            break
        y = y + solve_once(res)
    res = rhs - apply_kron_sum(X, d, y, budget=budget)
    if np.linalg.norm(res) > tol * rhs_norm:
        raise SingularSystemError(
            f"Kronecker-sum solve residual {np.linalg.norm(res):.3e} above "
            f"tolerance; L_d(X) is near-singular or severely non-normal"
        )
    if real_data:
        y = y.real
    return y


def symmetrize(v, d, n=None):
    """Average v over all d! permutations of its tensor indices.

    The result defines the same d-form: <sym(v), x^(x)d> = <v, x^(x)d>.
    """
    v = np.asarray(v)
    if n is None:
        n = round(v.size ** (1.0 / d))
        # guard against rounding of the d-th root
        if n**d != v.size:
            n = next(k for k in range(1, v.size + 1) if k**d == v.size)
    T = v.reshape((n,) * d)
    acc = np.zeros_like(T, dtype=float)
    for perm in itertools.permutations(range(d)):
        acc += np.transpose(T, perm)
    return (acc / math.factorial(d)).reshape(v.size)


def kron_sum_matrix(X, d):
    """Explicit L_d(X) as a dense matrix.  Test oracle; small n and d only."""
    X = np.asarray(X)
    n = X.shape[0]
    if n**d > 10**4:
        raise BudgetExceededError("explicit Kronecker sum limited to n^d <= 1e4")
    out = np.zeros((n**d, n**d), dtype=X.dtype)
    eye = np.eye(n, dtype=X.dtype)
    for j in range(d):
        factors = [eye] * d
        factors[j] = X
        term = factors[0]
        for f in factors[1:]:
            term = np.kron(term, f)
        out += term
    return out
