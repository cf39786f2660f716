"""Interpolatory model reduction of the linearized flow DAE.

The reduction basis interpolates the transfer function tangentially at
complex shifts: each basis vector solves the bordered system

    [[sigma E11 - A11, A21^T], [A21, 0]] [phi; z] = [B1 b; 0],

so phi satisfies the divergence constraint exactly.  The shifts and
directions are iterated to a fixed point: the reduced pencil is
eigensolved, eigenvalues are mirrored into the right half plane as new
shifts, and left eigenvectors give new directions.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .errors import ConvergenceError, SingularSystemError
from .model import QuadraticDaeModel, ReducedQuadraticModel


@dataclass
class IrkaState:
    shifts: np.ndarray                    # (r,) complex, conjugate-closed
    directions: np.ndarray                # (r, m) complex, conjugate-closed
    iterations: int = 0
    shift_changes: list = field(default_factory=list)
    converged: bool = False


def initial_state(r, m, seed=0):
    """Log-spaced positive real shifts with random unit directions."""
    rng = np.random.default_rng(seed)
    shifts = np.logspace(-1.0, 2.0, r).astype(complex)
    directions = rng.standard_normal((r, m))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return IrkaState(shifts=shifts, directions=directions.astype(complex))


def saddle_interp_solve(model, sigma, b):
    """One interpolation solve; returns the velocity part phi."""
    K = model.saddle_matrix(sigma).astype(complex)
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SingularSystemError(f"pencil singular at shift {sigma}") from exc
    rhs = np.zeros(model.n1 + model.n2, dtype=complex)
    rhs[:model.n1] = model.B1 @ b
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError(f"pencil singular at shift {sigma}")
    return sol[:model.n1]


def _interp_basis(model, state):
    """Saddle solves for all shifts; conjugate pairs are solved once."""
    r = len(state.shifts)
    V = np.empty((model.n1, r), dtype=complex)
    done = np.zeros(r, dtype=bool)
    for i in range(r):
        if done[i]:
            continue
        phi = saddle_interp_solve(model, state.shifts[i],
                                  state.directions[i])
        V[:, i] = phi
        done[i] = True
        si = state.shifts[i]
        if abs(si.imag) > 1e-14 * abs(si):
            for j in range(i + 1, r):
                if done[j]:
                    continue
                if (abs(state.shifts[j] - si.conjugate())
                        <= 1e-8 * abs(si)
                        and np.allclose(state.directions[j],
                                        state.directions[i].conjugate(),
                                        atol=1e-8)):
                    V[:, j] = phi.conjugate()
                    done[j] = True
                    break
    return V


def realify_orthonormalize(Phi_complex, M, drop_tol=1e-8):
    """Real M-orthonormal basis spanning the realified column space.

    Conjugate column pairs become (Re, Im) pairs; modified Gram-Schmidt
    in the M inner product (two passes) then orthonormalizes, dropping
    numerically dependent columns with a warning.
    """
    Phi_complex = np.atleast_2d(np.asarray(Phi_complex))
    ncols = Phi_complex.shape[1]
    used = np.zeros(ncols, dtype=bool)
    cols = []
    for i in range(ncols):
        if used[i]:
            continue
        col = Phi_complex[:, i]
        used[i] = True
        scale = np.abs(col).max()
        if np.abs(col.imag).max() <= 1e-12 * scale:
            cols.append(col.real.copy())
            continue
        cols.append(col.real.copy())
        cols.append(col.imag.copy())
        for j in range(i + 1, ncols):
            if not used[j] and np.allclose(Phi_complex[:, j],
                                           col.conjugate(),
                                           atol=1e-8 * scale):
                used[j] = True
                break

    basis = []
    dropped = 0
    for col in cols:
        w = col / np.sqrt(col @ (M @ col))
        for _ in range(2):
            for q in basis:
                w = w - q * (q @ (M @ w))
        norm = np.sqrt(w @ (M @ w))
        if norm < drop_tol:
            dropped += 1
            continue
        basis.append(w / norm)
    if dropped:
        warnings.warn(f"dropped {dropped} numerically dependent basis "
                      f"columns; reduced order is {len(basis)}")
    return np.column_stack(basis)


def galerkin_reduce(model, Phi):
    """Project the quadratic DAE model onto a divergence-free basis.

    The quadratic coefficient matrix is filled column by column with r^2
    evaluations of the matrix-free bilinear operator.
    """
    r = Phi.shape[1]
    Etil = Phi.T @ (model.E11 @ Phi)
    Atil = Phi.T @ (model.A11 @ Phi)
    Btil = Phi.T @ model.B1
    Ctil = model.C @ Phi
    if model.N_reduced is not None:
        Ntil = model.N_reduced(Phi).reshape(r, r * r)
    else:
        Ntil = np.empty((r, r * r))
        for j in range(r):
            for k in range(r):
                Ntil[:, j * r + k] = Phi.T @ model.N(Phi[:, j], Phi[:, k])
    return ReducedQuadraticModel(Etil=Etil, Atil=Atil, Btil=Btil,
                                 Ctil=Ctil, Ntil=Ntil, Phi=Phi)


def _sorted_order(shifts):
    return np.lexsort((shifts.imag, shifts.real))


def irka(model, r, init=None, tol=1e-4, max_iter=100, seed=0):
    """Fixed-point shift iteration; returns (state, basis, reduced model).

    On non-convergence the best iterate (smallest shift change) is
    returned with a warning.
    """
    if init is None:
        init = initial_state(r, model.m, seed=seed)
    state = IrkaState(shifts=init.shifts.copy(),
                      directions=init.directions.copy())
    best = None
    best_change = np.inf
    for it in range(1, max_iter + 1):
        V = _interp_basis(model, state)
        Phi = realify_orthonormalize(V, model.E11)
        rom = galerkin_reduce(model, Phi)
        lam, W = sla.eig(rom.Atil.T, rom.Etil.T)
        new_shifts = -lam
        # unstable reduced eigenvalues mirror into the left half plane;
        # they are kept there rather than reflected, because reflecting
        # would park the shift exactly on the conjugate pole (the pencil
        # is singular there and interpolation degenerates)
        n_left = int(np.count_nonzero(new_shifts.real <= 0))
        if n_left:
            warnings.warn(f"{n_left} shifts lie in the left half plane "
                          "(mirrored unstable eigenvalues)")
        new_dirs = (rom.Btil.T @ W).T          # b_i = Btil^T w_i

        order = _sorted_order(new_shifts)
        new_shifts = new_shifts[order]
        new_dirs = new_dirs[order]
        # max relative shift movement under a min-cost pairing; plain
        # sorted pairing scrambles conjugate pairs whenever nearly equal
        # real parts cross and reports spurious O(1) changes
        old = state.shifts
        cost = (np.abs(new_shifts[None, :] - old[:, None])
                / np.abs(old[:, None]))
        rows, cols = linear_sum_assignment(cost)
        change = float(cost[rows, cols].max())
        state.shifts = new_shifts
        state.directions = new_dirs
        state.iterations = it
        state.shift_changes.append(change)

        if change < best_change:
            best_change = change
            best = (IrkaState(shifts=state.shifts.copy(),
                              directions=state.directions.copy(),
                              iterations=it,
                              shift_changes=list(state.shift_changes),
                              converged=False), None, None)
        if change < tol:
            # rebuild the basis at the final shifts so the returned model
            # interpolates exactly where the state says it does
            V = _interp_basis(model, state)
            Phi = realify_orthonormalize(V, model.E11)
            rom = galerkin_reduce(model, Phi)
            state.converged = True
            rom.shift_history = list(state.shift_changes)
            return state, Phi, rom

    warnings.warn(f"shift iteration did not converge in {max_iter} "
                  f"iterations; returning best iterate "
                  f"(change {best_change:.2e})")
    st = best[0]
    V = _interp_basis(model, st)
    Phi = realify_orthonormalize(V, model.E11)
    rom = galerkin_reduce(model, Phi)
    rom.shift_history = list(state.shift_changes)
    return st, Phi, rom


def bode_data(system, omegas):
    """Max singular value of the transfer function at each frequency."""
    from .model import fom_transfer, rom_transfer

    out = np.empty(len(omegas))
    for k, w in enumerate(omegas):
        if isinstance(system, QuadraticDaeModel):
            G = fom_transfer(system, 1j * w)
        else:
            G = rom_transfer(system, 1j * w)
        out[k] = np.linalg.svd(G, compute_uv=False)[0]
    return out
