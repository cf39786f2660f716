"""Polynomial feedback synthesis for quadratic systems.

Gains are computed on the reduced model: the linear gain from the
continuous algebraic Riccati equation, and the quadratic gain from a
degree-3 value-function coefficient obtained by solving a Kronecker-sum
linear system.  Full-order evaluation goes through the projector
P = Phi^T M, so lifted gains are never materialized.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as spla

from .errors import ConvergenceError
from .kron import apply_kron_sum, kron_vec, solve_kron_sum, symmetrize


@dataclass
class PolynomialFeedback:
    """Feedback gains k1, k2 with value coefficients and a state projector."""

    k1: np.ndarray                 # m x r
    k2: Optional[np.ndarray]       # m x r^2, None for a linear-only design
    v2: np.ndarray                 # r x r symmetric PSD
    v3: Optional[np.ndarray]       # r^3 vector, symmetrized
    P: np.ndarray                  # r x n1 projector Phi^T M
    R: np.ndarray                  # m x m input weighting

    @property
    def r(self):
        return self.k1.shape[1]

    @property
    def m(self):
        return self.k1.shape[0]


def care_residual(Atil, Btil, Q, R, V2):
    """Residual matrix of A^T V2 + V2 A - V2 B R^-1 B^T V2 + Q."""
    RinvBt = spla.solve(R, Btil.T)
    return Atil.T @ V2 + V2 @ Atil - V2 @ Btil @ RinvBt @ V2 + Q


def solve_care(Atil, Btil, Q, R, tol=1e-9, newton_iters=30):
    """Stabilizing solution of the continuous algebraic Riccati equation.

    A Schur-based dense solve provides the candidate; Newton-Kleinman
    iterations (Lyapunov solves on the closed-loop matrix) polish it until
    the residual is below ``tol * ||Q||``.
    """
    Atil = np.asarray(Atil, dtype=float)
    Btil = np.asarray(Btil, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    try:
        V2 = spla.solve_continuous_are(Atil, Btil, Q, R)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"CARE solver failed: {exc}") from exc
    V2 = 0.5 * (V2 + V2.T)

    qnorm = max(np.linalg.norm(Q), 1.0)
    RinvBt = spla.solve(R, Btil.T)
    for _ in range(newton_iters):
        res = care_residual(Atil, Btil, Q, R, V2)
        if np.linalg.norm(res) <= tol * qnorm:
            break
        Acl = Atil - Btil @ RinvBt @ V2
        # Newton-Kleinman step: solve Acl^T dV + dV Acl = -res
        dV = spla.solve_sylvester(Acl.T, Acl, -res)
        V2 = 0.5 * ((V2 + dV) + (V2 + dV).T)
    res = care_residual(Atil, Btil, Q, R, V2)
    if np.linalg.norm(res) > tol * qnorm:
        raise ConvergenceError(
            f"CARE residual {np.linalg.norm(res):.3e} above {tol * qnorm:.3e}"
        )
    Acl = Atil - Btil @ RinvBt @ V2
    if np.max(spla.eigvals(Acl).real) >= 0:
        raise ConvergenceError("CARE solution is not stabilizing")
    return V2


def linear_gain(Btil, R, v2):
    """k1 = -R^-1 B^T V2."""
    return -spla.solve(np.asarray(R, dtype=float), np.asarray(Btil).T @ v2)


def _contract_rhs_v3(Ntil, v2):
    """L_2(N^T) v2 for N of shape (r, r^2), without materializing L_2.

    With C-order reshapes, (N^T (x) I) v2 flattens N^T V2 and
    (I (x) N^T) v2 flattens V2 N, both of length r^3.
    """
    r = Ntil.shape[0]
    V2 = v2.reshape(r, r)
    t1 = (Ntil.T @ V2).reshape(r * r * r)
    t2 = (V2 @ Ntil).reshape(r * r * r)
    return t1 + t2


def solve_v3(Atil_closed, Ntil, v2, tol=1e-9):
    """Degree-3 value coefficient: L_3((A + B k1)^T) v3 = -L_2(N^T) v2.

    The closed-loop matrix enters transposed: matching the cubic HJB
    coefficient requires <v3, L_3(Acl) x^3> + 2 x^T V2 N(x (x) x) = 0 for
    all x, i.e. a system in L_3(Acl^T).  A brute-force coefficient-matching
    oracle in the tests gates this convention.  The result is symmetrized
    before use; the quadratic gain is invariant under that choice.
    """
    Acl = np.asarray(Atil_closed, dtype=float)
    r = Acl.shape[0]
    V2 = np.asarray(v2, dtype=float)
    rhs = -_contract_rhs_v3(np.asarray(Ntil, dtype=float), V2.reshape(r * r))
    v3 = solve_kron_sum(Acl.T, 3, rhs, budget=max(r**3, 10**6), tol=tol)
    return symmetrize(v3, 3, n=r)


def quadratic_gain(Btil, R, v3):
    """k2 = -R^-1 (L_3(B^T) v3)^T reshaped to (m, r^2).

    Each term of L_3(B^T) contracts B^T into one tensor slot of v3; with a
    symmetrized v3 all three contractions agree up to index order, and the
    input index is placed first.
    """
    Btil = np.asarray(Btil, dtype=float)
    r, m = Btil.shape
    T = np.asarray(v3, dtype=float).reshape(r, r, r)
    acc = np.zeros((m, r, r))
    for slot in range(3):
        acc += np.tensordot(Btil.T, T, axes=(1, slot))
    K = acc.reshape(m, r * r)
    return -spla.solve(np.asarray(R, dtype=float), K)


def design_feedback(rom, M=None, R=None, degree=2, care_tol=1e-9):
    """Run the full synthesis on a reduced model and return the gains.

    Q = Ctil^T Ctil per the output-weighted running cost; R defaults to
    the identity.  ``M`` is the full-order mass matrix used to form the
    projector P = Phi^T M (identity projector when omitted).
    """
    m = rom.m
    if R is None:
        R = np.eye(m)
    Q = rom.Ctil.T @ rom.Ctil
    v2 = solve_care(rom.Atil, rom.Btil, Q, R, tol=care_tol)
    k1 = linear_gain(rom.Btil, R, v2)
    if degree >= 2:
        Acl = rom.Atil + rom.Btil @ k1
        v3 = solve_v3(Acl, rom.Ntil, v2)
        k2 = quadratic_gain(rom.Btil, R, v3)
    else:
        v3 = None
        k2 = None
    if M is None:
        P = rom.Phi.T
    else:
        P = rom.Phi.T @ M
    return PolynomialFeedback(k1=k1, k2=k2, v2=v2, v3=v3, P=np.asarray(P), R=R)


def eval_feedback(fb, z, degree=2):
    """u(z) = k1 z (+ k2 (z (x) z) at degree 2)."""
    u = fb.k1 @ z
    if degree >= 2 and fb.k2 is not None:
        u = u + fb.k2 @ kron_vec(z, z)
    return u


def reduce_state(fb, x1):
    """Project a full-order perturbation state: z = P x1."""
    return fb.P @ x1


def value_eval(v2, v3, z):
    """v(z) = z^T V2 z + v3^T (z (x) z (x) z)."""
    val = float(z @ v2 @ z)
    if v3 is not None:
        val += float(v3 @ kron_vec(kron_vec(z, z), z))
    return val


def hjb_residual(Atil, Btil, Ntil, Q, R, fb, z, degree):
    """Pointwise residual of the HJB equation at state z.

    residual = grad v(z) . f(z, u(z)) + l(z, u(z)) with the degree-d
    truncations of the value function and feedback.
    """
    r = Atil.shape[0]
    V2 = fb.v2
    grad = 2.0 * (V2 @ z)
    if degree >= 3 and fb.v3 is not None:
        T = fb.v3.reshape(r, r, r)
        grad = grad + 3.0 * np.einsum("ijk,j,k->i", T, z, z)
    u = fb.k1 @ z
    if degree >= 3 and fb.k2 is not None:
        u = u + fb.k2 @ kron_vec(z, z)
    f = Atil @ z + Btil @ u + Ntil @ kron_vec(z, z)
    return float(grad @ f + z @ Q @ z + u @ R @ u)
