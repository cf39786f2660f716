"""Quadratic control-system data model and transfer-function evaluation.

The full-order model is the semi-discrete DAE

    E11 x1' = A11 x1 + A21^T x2 + B1 u + N(x1 (x) x1),
         0  = A21 x1,

with a matrix-free bilinear operator N.  The reduced model replaces the
constrained state by x1 ~ Phi xr with a divergence-free basis Phi and
carries a dense quadratic coefficient matrix Ntil of shape (r, r^2).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystemError
from .kron import kron_vec


@dataclass
class QuadraticDaeModel:
    """Full-order quadratic DAE operators (perturbation form)."""

    E11: sp.spmatrix           # n1 x n1 velocity mass, SPD
    A11: sp.spmatrix           # n1 x n1 (viscous + linearized convection)
    A21: sp.spmatrix           # n2 x n1 divergence
    B1: np.ndarray             # n1 x m
    C: np.ndarray              # p x n1
    N: Callable[[np.ndarray, np.ndarray], np.ndarray]  # bilinear (v, w) -> n1
    #: optional batched projection hook: Phi (n1 x r) -> (r, r, r) tensor
    #: with entries Phi_i^T N(Phi_j, Phi_k); same values as N, just faster
    N_reduced: Callable = None

    def __post_init__(self):
        self.n1 = self.E11.shape[0]
        self.n2 = self.A21.shape[0]
        self.m = self.B1.shape[1]
        self.p = self.C.shape[0]

    def saddle_matrix(self, s):
        """Sparse bordered pencil [[s E11 - A11, A21^T], [A21, 0]]."""
        top = sp.hstack([s * self.E11 - self.A11, self.A21.T])
        bot = sp.hstack([self.A21, sp.csr_matrix((self.n2, self.n2))])
        return sp.vstack([top, bot]).tocsc()


@dataclass
class ReducedQuadraticModel:
    """Galerkin-reduced quadratic model on a divergence-free basis."""

    Etil: np.ndarray           # r x r (identity for an M-orthonormal basis)
    Atil: np.ndarray           # r x r
    Btil: np.ndarray           # r x m
    Ctil: np.ndarray           # p x r
    Ntil: np.ndarray           # r x r^2
    Phi: np.ndarray            # n1 x r
    shift_history: list = field(default_factory=list)

    def __post_init__(self):
        self.r = self.Atil.shape[0]
        self.m = self.Btil.shape[1]
        self.p = self.Ctil.shape[0]

    def quadratic(self, z):
        """Ntil (z (x) z)."""
        return self.Ntil @ kron_vec(z, z)

    def rhs(self, z, u):
        """Reduced vector field Atil z + Btil u + Ntil (z (x) z)."""
        return self.Atil @ z + self.Btil @ u + self.quadratic(z)


def fom_transfer(model, s):
    """Exact transfer function G(s) = C X, columns of X from saddle solves.

    Each column j of X solves
        [[s E11 - A11, A21^T], [A21, 0]] [x; z] = [B1 e_j; 0].
    """
    K = model.saddle_matrix(s)
    try:
        lu = spla.splu(K.astype(complex if np.iscomplexobj(s) or
                                np.iscomplex(s) else float))
    except RuntimeError as exc:
        raise SingularSystemError(f"singular DAE pencil at s={s}") from exc
    G = np.empty((model.p, model.m), dtype=lu.U.dtype)
    rhs = np.zeros(model.n1 + model.n2, dtype=lu.U.dtype)
    for j in range(model.m):
        rhs[:model.n1] = model.B1[:, j]
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SingularSystemError(f"singular DAE pencil at s={s}")
        G[:, j] = model.C @ sol[:model.n1]
    return G


def pencil_eigs(model, sigma=0.05 + 0.75j, k=10):
    """Finite eigenvalues of (A, E) near ``sigma`` for the bordered DAE.

    Shift-invert is done manually because the mass block of the pencil is
    singular; the constraint's infinite eigenvalues map harmlessly to zero
    of the inverted operator.
    """
    n = model.n1 + model.n2
    # -saddle_matrix(0) = [[A11, -A21^T], [-A21, 0]]; rescaling the
    # multiplier absorbs the constraint signs without moving eigenvalues
    A = -model.saddle_matrix(0.0)
    E = sp.block_diag([model.E11,
                       sp.csr_matrix((model.n2, model.n2))]).tocsc()
    lu = spla.splu((A - sigma * E).tocsc())
    op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(E @ x),
                             dtype=complex)
    nu = spla.eigs(op, k=k, which="LM", return_eigenvectors=False)
    lam = sigma + 1.0 / nu
    return lam[np.argsort(-lam.real)]


def rom_transfer(rom, s):
    """Reduced transfer function Gtil(s) = Ctil (s Etil - Atil)^-1 Btil."""
    A = s * rom.Etil - rom.Atil
    try:
        X = np.linalg.solve(A, rom.Btil.astype(A.dtype))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"s Etil - Atil singular at s={s}") from exc
    return rom.Ctil @ X
