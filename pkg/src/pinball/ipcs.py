"""Incremental pressure-correction (IPCS) Navier-Stokes time stepper.

Three fractional steps per time step dt:

  1. tentative velocity: backward-difference mass term, Crank-Nicolson
     viscous term, explicit convection, old pressure gradient; on the
     outlet the natural condition keeps mu (grad v)^T n - p n, so the
     exact channel profile is a discrete fixed point;
  2. pressure Poisson update for p(n+1) with p = 0 on the outlet;
  3. mass-matrix velocity correction.

The three system matrices are constant and factorized once.
"""

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import (
    BoundaryData,
    ConvectionOperator,
    divergence,
    outlet_matrices,
    pressure_gradient,
    pressure_stiffness,
    stiffness_eps,
    velocity_mass,
)
from .geometry import CYLINDER_TAGS


def _constrain_rows(A, rows):
    """Return csr copy of A with the given rows replaced by identity rows."""
    A = A.tolil(copy=True)
    A[rows, :] = 0.0
    A[rows, rows] = 1.0
    return A.tocsr()


class IpcsSimulator:
    """Fractional-step integrator on a Taylor-Hood space.

    ``dirichlet_tags`` name the velocity Dirichlet boundaries; the
    remaining tagged boundaries get the stress-free outlet condition.
    Pressure is zeroed on ``pressure_tags`` vertices, or pinned at one
    vertex when the velocity data covers the whole boundary.
    """

    def __init__(self, space, mu, dt, dirichlet_tags,
                 pressure_tags=("outlet",), pressure_pin=None):
        if not np.isfinite(mu) or mu <= 0.0:
            raise ValueError("viscosity must be positive and finite")
        self.space = space
        self.mu = mu
        self.dt = dt
        self.dirichlet_tags = tuple(dirichlet_tags)

        self.M = velocity_mass(space)
        self.conv = ConvectionOperator(space)
        self.Keps = stiffness_eps(space)
        self.D = divergence(space)
        self.G = pressure_gradient(space)
        self.Kp = pressure_stiffness(space)

        natural = [t for t in space.boundary_nodes
                   if t not in self.dirichlet_tags]
        if natural:
            self.Bout, self.Pout = outlet_matrices(space, tuple(natural))
        else:
            self.Bout = sp.csr_matrix((space.n1, space.n1))
            self.Pout = sp.csr_matrix((space.n1, space.n2))

        nodes = space.nodes_of_tags(self.dirichlet_tags)
        self.bc_dofs = np.sort(space.velocity_dofs_of_nodes(nodes))

        if pressure_pin is None and not any(t in space.boundary_nodes
                                            for t in pressure_tags):
            pressure_pin = 0
        if pressure_pin is not None:
            self.p_bc = np.array([pressure_pin], dtype=np.int64)
        else:
            self.p_bc = np.sort(np.unique(np.concatenate([
                space.boundary_nodes[t] for t in pressure_tags
                if t in space.boundary_nodes])))
            self.p_bc = self.p_bc[self.p_bc < space.n2]  # vertex dofs only

        A1 = (self.M / dt + 0.5 * mu * self.Keps
              - 0.5 * mu * self.Bout).tocsr()
        self.lu1 = spla.splu(_constrain_rows(A1, self.bc_dofs).tocsc())
        self.lu2 = spla.splu(_constrain_rows(self.Kp, self.p_bc).tocsc())
        self.lu3 = spla.splu(_constrain_rows(self.M, self.bc_dofs).tocsc())

    def check_cfl(self, v, limit=1.0):
        cfl = np.abs(v).max() * self.dt / self.space.h_min
        if cfl > limit:
            warnings.warn(f"advective CFL number {cfl:.2f} exceeds {limit}")
        return cfl

    def step(self, v, p, bc_values):
        """Advance one time step.

        ``bc_values`` holds the Dirichlet velocity data for the *new* time
        level at the constrained dofs (other entries are ignored).
        """
        dt, mu = self.dt, self.mu
        b1 = (self.M @ (v / dt) - self.conv.convect(v)
              - 0.5 * mu * (self.Keps @ v) + 0.5 * mu * (self.Bout @ v)
              + self.D.T @ p - self.Pout @ p)
        b1[self.bc_dofs] = bc_values[self.bc_dofs]
        v_star = self.lu1.solve(b1)

        b2 = self.Kp @ p - (self.D @ v_star) / dt
        b2[self.p_bc] = 0.0
        p_new = self.lu2.solve(b2)

        b3 = self.M @ v_star - dt * (self.G @ (p_new - p))
        b3[self.bc_dofs] = bc_values[self.bc_dofs]
        v_new = self.lu3.solve(b3)
        return v_new, p_new

    def energy(self, v):
        """Fluctuation-energy measure E = 0.5 sqrt(int |v|^2)."""
        return 0.5 * float(np.sqrt(v @ self.M @ v))


def pinball_simulator(space, re, dt):
    """IPCS integrator with the pinball boundary setup."""
    if not np.isfinite(re) or re <= 0.0:
        raise ValueError("Reynolds number must be positive and finite")
    return IpcsSimulator(space, 1.0 / re, dt,
                         dirichlet_tags=("inlet", "wall_top", "wall_bottom")
                         + CYLINDER_TAGS)


def cylinder_forces(space, v, p, mu):
    """Pressure-plus-viscous traction force on each cylinder, (3, 2).

    The traction uses the full stress sigma = -p I + mu (grad v + grad v^T)
    integrated with the boundary normal pointing from the fluid into the
    body, so the result is the force exerted on the cylinder.
    """
    forces = np.empty((3, 2))
    for k, tag in enumerate(CYLINDER_TAGS):
        bd = BoundaryData(space, (tag,))
        tn6 = space.tri_nodes[bd.tris]
        ve = np.empty((len(bd.edges), 6, 2))
        ve[:, :, 0] = v[2 * tn6]
        ve[:, :, 1] = v[2 * tn6 + 1]
        gradv = np.einsum("nqik,nic->nqck", bd.p2g, ve)
        pq = np.einsum("nqk,nk->nq", bd.p1v, p[space.mesh.triangles[bd.tris]])
        sig = mu * (gradv + np.swapaxes(gradv, 2, 3))
        sig[:, :, 0, 0] -= pq
        sig[:, :, 1, 1] -= pq
        # bd.normals point out of the fluid; the force on the body uses
        # the body-outward normal, hence the sign flip
        tq = np.einsum("nqcd,nd->nqc", sig, -bd.normals)
        forces[k] = np.einsum("nq,nqc->c", bd.wq, tq)
    return forces


def lift_drag_coefficients(space, v, p, mu):
    """Per-cylinder (C_D, C_L) pairs, normalized by 0.5 rho U^2 D = 0.5."""
    return 2.0 * cylinder_forces(space, v, p, mu)
