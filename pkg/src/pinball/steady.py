"""Steady Navier-Stokes base flow and its quadratic perturbation model.

The base flow satisfies free-stream Dirichlet data (1, 0) on the inlet and
channel walls, prescribed tangential speed on the cylinders (zero when
unactuated), and a do-nothing outlet.  Newton's method is warm-started by a
Stokes solve and continued over a Reynolds number ladder; the converged
linearization furnishes the operators of the perturbation DAE.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import (
    assemble_outputs,
    convect,
    convection_matrices,
    cylinder_tangent_field,
    divergence,
    stiffness_eps,
    velocity_mass,
)
from .errors import ConvergenceError
from .model import QuadraticDaeModel

DIRICHLET_TAGS = ("inlet", "wall_top", "wall_bottom",
                  "cyl1", "cyl2", "cyl3")

DEFAULT_CONTINUATION = (1.0, 10.0, 20.0, 30.0, 40.0, 50.0)


def dirichlet_dofs(space, tags=DIRICHLET_TAGS):
    """Sorted constrained velocity dofs for a set of boundary tags."""
    nodes = space.nodes_of_tags(tags)
    return np.sort(space.velocity_dofs_of_nodes(nodes))


def free_dofs(space, tags=DIRICHLET_TAGS):
    mask = np.ones(space.n1, dtype=bool)
    mask[dirichlet_dofs(space, tags)] = False
    return np.flatnonzero(mask)


def boundary_velocity(space, cylinder_speeds=(0.0, 0.0, 0.0)):
    """Velocity vector holding the Dirichlet data, zero elsewhere."""
    v = np.zeros(space.n1)
    nodes = space.nodes_of_tags(["inlet", "wall_top", "wall_bottom"])
    v[2 * nodes] = 1.0
    for i, speed in enumerate(cylinder_speeds):
        if speed != 0.0:
            v += speed * cylinder_tangent_field(space, i)
    return v


@dataclass
class SteadyState:
    space: object = field(repr=False)
    re: float
    v: np.ndarray = field(repr=False)       # full velocity vector (n1)
    p: np.ndarray = field(repr=False)       # pressure vector (n2)
    residual_norm: float
    newton_iterations: int
    residual_history: list = field(default_factory=list)

    def l2_norm(self):
        """L2 norm of the velocity field."""
        M = velocity_mass(self.space)
        return float(np.sqrt(self.v @ M @ self.v))


def _newton(space, mu, Keps, D, v0, fdofs, tol, max_iter):
    """Newton iteration on the free velocity dofs and all pressures."""
    n2 = space.n2
    Df = D[:, fdofs].tocsr()
    v = v0.copy()
    p = np.zeros(n2)
    its = 0
    res = np.inf
    history = []
    for its in range(1, max_iter + 1):
        r1 = (convect(space, v, v) + mu * (Keps @ v) - D.T @ p)[fdofs]
        r2 = D @ v
        res = np.sqrt(np.sum(r1**2) + np.sum(r2**2))
        history.append(res)
        if res < tol:
            return v, p, res, its - 1, history
        C1, C2 = convection_matrices(space, v)
        J = (mu * Keps + C1 + C2)[fdofs][:, fdofs]
        K = sp.vstack([
            sp.hstack([J, -Df.T]),
            sp.hstack([Df, sp.csr_matrix((n2, n2))]),
        ]).tocsc()
        dz = spla.splu(K).solve(-np.concatenate([r1, r2]))
        v[fdofs] += dz[:len(fdofs)]
        p += dz[len(fdofs):]
    raise ConvergenceError(
        f"Newton stalled at residual {res:.2e} after {max_iter} iterations"
    )


def solve_steady(space, re, continuation=None, tol=1e-10, max_iter=25,
                 cylinder_speeds=(0.0, 0.0, 0.0)):
    """Steady base flow at Reynolds number ``re``.

    ``continuation`` lists intermediate Reynolds numbers; the default
    ladder is truncated at the target.  The first stage starts from a
    Stokes solve.
    """
    if continuation is None:
        continuation = [r for r in DEFAULT_CONTINUATION if r < re] + [re]
    if continuation[-1] != re:
        raise ValueError("continuation list must end at the target Re")

    Keps = stiffness_eps(space)
    D = divergence(space)
    fdofs = free_dofs(space)
    vbc = boundary_velocity(space, cylinder_speeds)

    # Stokes warm start at the first ladder rung
    mu0 = 1.0 / continuation[0]
    Df = D[:, fdofs].tocsr()
    K = sp.vstack([
        sp.hstack([(mu0 * Keps)[fdofs][:, fdofs], -Df.T]),
        sp.hstack([Df, sp.csr_matrix((space.n2, space.n2))]),
    ]).tocsc()
    rhs = np.concatenate([-(mu0 * (Keps @ vbc))[fdofs], -(D @ vbc)])
    sol = spla.splu(K).solve(rhs)
    v = vbc.copy()
    v[fdofs] = sol[:len(fdofs)]

    total_its = 0
    for rung in continuation:
        v, p, res, its, history = _newton(space, 1.0 / rung, Keps, D, v,
                                          fdofs, tol, max_iter)
        total_its += its
    return SteadyState(space=space, re=re, v=v, p=p, residual_norm=res,
                       newton_iterations=total_its,
                       residual_history=history)


def linearize(space, steady):
    """Quadratic perturbation DAE about a steady state.

    State x1 lives on the velocity dofs free of Dirichlet data; the inputs
    are the cylinder rotation speeds, entering through a quasi-steady
    lifting of the tangential boundary fields.
    """
    mu = 1.0 / steady.re
    M = velocity_mass(space)
    Keps = stiffness_eps(space)
    D = divergence(space)
    C1, C2 = convection_matrices(space, steady.v)
    A11_full = -(mu * Keps + C1 + C2).tocsr()

    fdofs = free_dofs(space)
    E11 = M[fdofs][:, fdofs].tocsr()
    A11 = A11_full[fdofs][:, fdofs].tocsr()
    A21 = D[:, fdofs].tocsr()
    B1 = np.column_stack([
        (A11_full @ cylinder_tangent_field(space, i))[fdofs]
        for i in range(3)
    ])
    C = assemble_outputs(space)[:, fdofs]

    n1 = space.n1

    def N(vf, wf):
        V = np.zeros(n1)
        W = np.zeros(n1)
        V[fdofs] = vf
        W[fdofs] = wf
        return -convect(space, V, W)[fdofs]

    def N_reduced(Phi):
        from .assemble import reduced_convection
        full = np.zeros((n1, Phi.shape[1]))
        full[fdofs] = Phi
        return -reduced_convection(space, full)

    return QuadraticDaeModel(E11=E11, A11=A11, A21=A21, B1=B1, C=C, N=N,
                             N_reduced=N_reduced)
