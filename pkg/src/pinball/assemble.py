"""Vectorized Taylor-Hood operator assembly.

Velocity dofs are interleaved (dof = 2 * node + component).  Weak forms:

    mass        M[(i,c),(j,d)]  = delta_cd  int  phi_i phi_j
    viscous     Keps[(i,c),(j,d)] = int 2 eps(phi_j e_d) : eps(phi_i e_c)
    divergence  D[k,(j,c)]      = int psi_k  d phi_j / dx_c
    p-gradient  G[(j,c),k]      = int (d psi_k / dx_c) phi_j
    p-stiffness Kp[k,l]         = int grad psi_k . grad psi_l
    convection  (v . grad w, phi_i e_c)
"""

import numpy as np
import scipy.sparse as sp

from .errors import EmptyBoxError
from .geometry import CYLINDER_CENTERS, CYLINDER_TAGS, sensor_boxes


def _vel_dofs(space):
    """(nt, 12) global velocity dofs, local order (node, component)."""
    tn = space.tri_nodes
    out = np.empty((tn.shape[0], 12), dtype=np.int64)
    out[:, 0::2] = 2 * tn
    out[:, 1::2] = 2 * tn + 1
    return out


def _scatter(rows, cols, vals, shape):
    return sp.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def velocity_mass(space):
    """Velocity Gram matrix (n1 x n1)."""
    N = space.p2_vals                      # (nq, 6)
    Me = np.einsum("eq,qi,qj->eij", space.w_det, N, N)  # (nt, 6, 6)
    tn = space.tri_nodes
    n1 = space.n1
    blocks = []
    for c in (0, 1):
        rows = (2 * tn + c)[:, :, None] * np.ones((1, 1, 6), dtype=np.int64)
        cols = (2 * tn + c)[:, None, :] * np.ones((1, 6, 1), dtype=np.int64)
        blocks.append(_scatter(rows, cols, Me, (n1, n1)))
    return (blocks[0] + blocks[1]).tocsr()


def stiffness_eps(space):
    """int 2 eps(u) : eps(w) for vector P2 fields (n1 x n1)."""
    g = space.p2_grads                     # (e, q, i, k)
    w = space.w_det
    lap = np.einsum("eq,eqik,eqjk->eij", w, g, g)       # grad:grad part
    cross = np.einsum("eq,eqid,eqjc->eijdc", w, g, g)   # grad:grad^T part
    tn = space.tri_nodes
    n1 = space.n1
    nt = tn.shape[0]
    # element matrix in (i, c), (j, d) layout
    El = np.zeros((nt, 6, 2, 6, 2))
    for c in (0, 1):
        El[:, :, c, :, c] += lap
    # cross[e,i,j,d,c] contributes at [(i,c),(j,d)]
    El += np.transpose(cross, (0, 1, 4, 2, 3))
    dofs = _vel_dofs(space).reshape(nt, 6, 2)
    rows = np.broadcast_to(dofs[:, :, :, None, None], El.shape)
    cols = np.broadcast_to(dofs[:, None, None, :, :], El.shape)
    return _scatter(rows, cols, El, (n1, n1))


def divergence(space):
    """Discrete divergence D (n2 x n1): D v ~ div v tested with P1."""
    g = space.p2_grads
    P = space.p1_vals                      # (nq, 3)
    De = np.einsum("eq,qk,eqjc->ekjc", space.w_det, P, g)  # (e, 3, 6, 2)
    tn = space.tri_nodes
    tp = space.mesh.triangles
    rows = np.broadcast_to(tp[:, :, None, None], De.shape)
    dofs = _vel_dofs(space).reshape(-1, 6, 2)
    cols = np.broadcast_to(dofs[:, None, :, :], De.shape)
    return _scatter(rows, cols, De, (space.n2, space.n1))


def pressure_gradient(space):
    """G (n1 x n2): (grad p, w) without integration by parts."""
    gp = space.p1_grads                    # (e, 3, 2)
    N = space.p2_vals
    Ge = np.einsum("eq,qj,ekc->ejck", space.w_det, N, gp)  # (e, 6, 2, 3)
    tp = space.mesh.triangles
    dofs = _vel_dofs(space).reshape(-1, 6, 2)
    rows = np.broadcast_to(dofs[:, :, :, None], Ge.shape)
    cols = np.broadcast_to(tp[:, None, None, :], Ge.shape)
    return _scatter(rows, cols, Ge, (space.n1, space.n2))


def pressure_stiffness(space):
    """P1 Laplacian (n2 x n2)."""
    gp = space.p1_grads
    area = space.w_det.sum(axis=1)
    Ke = np.einsum("e,ekc,elc->ekl", area, gp, gp)
    tp = space.mesh.triangles
    rows = np.broadcast_to(tp[:, :, None], Ke.shape)
    cols = np.broadcast_to(tp[:, None, :], Ke.shape)
    return _scatter(rows, cols, Ke, (space.n2, space.n2))


def _fields_at_qp(space, v):
    """Velocity values and gradients at quadrature points.

    Returns vq (e, q, c) and gradv (e, q, c, k)."""
    dofs = _vel_dofs(space).reshape(-1, 6, 2)
    ve = v[dofs]                           # (e, i, c)
    vq = np.einsum("qi,eic->eqc", space.p2_vals, ve)
    gradv = np.einsum("eqik,eic->eqck", space.p2_grads, ve)
    return vq, gradv


def convect(space, v, w):
    """Assembled convection vector: entries (v . grad w, phi_i e_c)."""
    vq, _ = _fields_at_qp(space, v)
    _, gradw = _fields_at_qp(space, w)
    # integrand at qp: (v . grad) w
    conv = np.einsum("eqk,eqck->eqc", vq, gradw)
    Fe = np.einsum("eq,qi,eqc->eic", space.w_det, space.p2_vals, conv)
    out = np.zeros(space.n1)
    dofs = _vel_dofs(space).reshape(-1, 6, 2)
    np.add.at(out, dofs.ravel(), Fe.ravel())
    return out


class ConvectionOperator:
    """Time-stepper helper evaluating convect(v, v) via sparse products.

    Precomputes the node-to-quadrature-point value and gradient maps as
    CSR matrices so the per-step nonlinear term costs a handful of
    sparse matvecs instead of large dense einsum contractions.
    """

    def __init__(self, space):
        import scipy.sparse as sp

        self.space = space
        nt, nq = space.w_det.shape
        rows = np.repeat(np.arange(nt * nq), 6)
        cols = np.broadcast_to(space.tri_nodes[:, None, :],
                               (nt, nq, 6)).ravel()
        vals = np.broadcast_to(space.p2_vals[None, :, :],
                               (nt, nq, 6)).ravel()
        shape = (nt * nq, space.n_nodes)
        self.V = sp.csr_matrix((vals, (rows, cols)), shape=shape)
        gx = space.p2_grads[:, :, :, 0].ravel()
        gy = space.p2_grads[:, :, :, 1].ravel()
        self.Gx = sp.csr_matrix((gx, (rows, cols)), shape=shape)
        self.Gy = sp.csr_matrix((gy, (rows, cols)), shape=shape)
        self.Wt = (self.V.T).tocsr()
        self.wq = space.w_det.ravel()

    def convect(self, v):
        """Assembled (v . grad v, phi_i e_c), matching convect(space, v, v)."""
        vx, vy = v[0::2], v[1::2]
        vxq = self.V @ vx
        vyq = self.V @ vy
        out = np.empty(self.space.n1)
        for c, comp in ((0, vx), (1, vy)):
            rq = vxq * (self.Gx @ comp) + vyq * (self.Gy @ comp)
            out[c::2] = self.Wt @ (self.wq * rq)
        return out


def reduced_convection(space, B):
    """Projected convection tensor for a batch of velocity fields.

    Given coefficient columns B (n1 x r), returns T with
    T[i, j, k] = int B_i . (B_j . grad) B_k, evaluating all fields at the
    quadrature points once instead of assembling r^2 full vectors.
    """
    r = B.shape[1]
    dofs = _vel_dofs(space).reshape(-1, 6, 2)
    be = B[dofs]                            # (e, i, c, r)
    vq = np.einsum("qi,eicr->eqcr", space.p2_vals, be)
    gq = np.einsum("eqik,eicr->eqckr", space.p2_grads, be)
    wvq = space.w_det[:, :, None, None] * vq
    T = np.empty((r, r, r))
    for j in range(r):
        # (B_j . grad) B_k at the quadrature points, all k at once
        conv_j = np.einsum("eqd,eqcdk->eqck", vq[:, :, :, j], gq)
        T[:, j, :] = np.einsum("eqci,eqck->ik", wvq, conv_j)
    return T


def convection_matrices(space, v):
    """Matrices C1, C2 with C1 w = (v . grad w, .), C2 w = (w . grad v, .)."""
    vq, gradv = _fields_at_qp(space, v)
    N = space.p2_vals
    g = space.p2_grads
    tn = space.tri_nodes
    n1 = space.n1
    nt = tn.shape[0]
    dofs = _vel_dofs(space).reshape(nt, 6, 2)

    # C1: component-diagonal, value  int phi_i (v . grad phi_j)
    C1e = np.einsum("eq,qi,eqk,eqjk->eij", space.w_det, N, vq, g)
    blocks = []
    for c in (0, 1):
        rows = np.broadcast_to((2 * tn + c)[:, :, None], C1e.shape)
        cols = np.broadcast_to((2 * tn + c)[:, None, :], C1e.shape)
        blocks.append(_scatter(rows, cols, C1e, (n1, n1)))
    C1 = blocks[0] + blocks[1]

    # C2[(i,c),(j,d)] = int phi_i phi_j  d v_c / dx_d
    C2e = np.einsum("eq,qi,qj,eqcd->eicjd", space.w_det, N, N, gradv)
    rows = np.broadcast_to(dofs[:, :, :, None, None], C2e.shape)
    cols = np.broadcast_to(dofs[:, None, None, :, :], C2e.shape)
    C2 = _scatter(rows, cols, C2e, (n1, n1))
    return C1.tocsr(), C2.tocsr()


# -- boundary-edge machinery ---------------------------------------------

class BoundaryData:
    """Per-edge quadrature data for a set of boundary tags.

    Holds, for each boundary edge: the parent triangle, the P2/P1 basis
    values and physical gradients at the edge Gauss points, the outward
    unit normal (pointing out of the fluid), and the arc-length weights.
    """

    def __init__(self, space, tags):
        from .space import EDGE_QP, EDGE_QW, p1_shape, p2_grad, p2_shape

        mesh = space.mesh
        tri_of_edge = {}
        for e, t in enumerate(mesh.triangles):
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                tri_of_edge[tuple(sorted((a, b)))] = e

        edges = [e for e, tag in mesh.boundary_edges.items() if tag in tags]
        edges.sort()
        self.edges = edges
        self.tris = np.array([tri_of_edge[e] for e in edges], dtype=np.int64)

        nq = len(EDGE_QP)
        nbe = len(edges)
        self.p2v = np.empty((nbe, nq, 6))
        self.p2g = np.empty((nbe, nq, 6, 2))
        self.p1v = np.empty((nbe, nq, 3))
        self.normals = np.empty((nbe, 2))
        self.wq = np.empty((nbe, nq))
        self.qp = np.empty((nbe, nq, 2))

        verts = mesh.vertices
        for n, ((a, b), te) in enumerate(zip(edges, self.tris)):
            tri = mesh.triangles[te]
            pa, pb = verts[a], verts[b]
            # reference coordinates of the edge endpoints in the parent
            ref = {tri[0]: (0.0, 0.0), tri[1]: (1.0, 0.0), tri[2]: (0.0, 1.0)}
            ra, rb = np.array(ref[a]), np.array(ref[b])
            length = np.hypot(*(pb - pa))
            tang = (pb - pa) / length
            nhat = np.array([tang[1], -tang[0]])
            centroid = verts[tri].mean(axis=0)
            if nhat @ (centroid - 0.5 * (pa + pb)) > 0:
                nhat = -nhat
            self.normals[n] = nhat
            invJ = space.invJ[te]
            for q, (s, w) in enumerate(zip(EDGE_QP, EDGE_QW)):
                rq = ra + s * (rb - ra)
                self.p2v[n, q] = p2_shape(*rq)
                self.p2g[n, q] = p2_grad(*rq) @ invJ
                self.p1v[n, q] = p1_shape(*rq)
                self.wq[n, q] = w * length
                self.qp[n, q] = pa + s * (pb - pa)


def outlet_matrices(space, tags=("outlet",)):
    """Boundary matrices of the tentative-velocity step.

    Bout[(i,c),(j,d)] = int_bdy phi_i (d phi_j / dx_c) n_d ds
    (the transposed-Jacobian viscous term; its natural condition keeps the
    exact channel-flow profile a discrete fixed point), and
    Pout[(i,c),k] = int_bdy psi_k n_c phi_i ds.
    """
    bd = BoundaryData(space, tags)
    tn6 = space.tri_nodes[bd.tris]                   # (nbe, 6)
    n1, n2 = space.n1, space.n2

    Be = np.einsum("nq,nqi,nqjc,nd->nicjd", bd.wq, bd.p2v, bd.p2g, bd.normals)
    dofs = np.empty((len(bd.edges), 6, 2), dtype=np.int64)
    dofs[:, :, 0] = 2 * tn6
    dofs[:, :, 1] = 2 * tn6 + 1
    rows = np.broadcast_to(dofs[:, :, :, None, None], Be.shape)
    cols = np.broadcast_to(dofs[:, None, None, :, :], Be.shape)
    Bout = _scatter(rows, cols, Be, (n1, n1))

    tp3 = space.mesh.triangles[bd.tris]
    Pe = np.einsum("nq,nqk,nc,nqi->nick", bd.wq, bd.p1v, bd.normals, bd.p2v)
    rows = np.broadcast_to(dofs[:, :, :, None], Pe.shape)
    cols = np.broadcast_to(tp3[:, None, None, :], Pe.shape)
    Pout = _scatter(rows, cols, Pe, (n1, n2))
    return Bout, Pout


def assemble_outputs(space):
    """Sensor matrix C (24 x n1): area-averaged perturbation velocity
    components over the 4 x 3 wake boxes, by quadrature-point membership."""
    boxes = sensor_boxes()
    xq = space.qpoints
    w = space.w_det
    N = space.p2_vals
    tn = space.tri_nodes
    C = np.zeros((2 * len(boxes), space.n1))
    for k, (xlo, xhi, ylo, yhi) in enumerate(boxes):
        inside = ((xq[:, :, 0] >= xlo) & (xq[:, :, 0] < xhi)
                  & (xq[:, :, 1] >= ylo) & (xq[:, :, 1] < yhi))
        wk = np.where(inside, w, 0.0)
        total = wk.sum()
        if total <= 0.0:
            raise EmptyBoxError(f"sensor box {k} contains no quadrature points")
        row = np.zeros(space.n_nodes)
        np.add.at(row, tn.ravel(),
                  np.einsum("eq,qi->ei", wk, N).ravel())
        row /= total
        C[2 * k, 0::2] = row
        C[2 * k + 1, 1::2] = row
    return C


def cylinder_tangent_field(space, cyl_index):
    """Unit counter-clockwise tangential lifting field for one cylinder.

    Nonzero only at the velocity dofs of that cylinder's boundary nodes.
    """
    tag = CYLINDER_TAGS[cyl_index]
    nodes = space.boundary_nodes.get(tag)
    if nodes is None or len(nodes) == 0:
        raise KeyError(f"no boundary nodes tagged {tag}")
    center = CYLINDER_CENTERS[cyl_index]
    g = np.zeros(space.n1)
    xy = space.node_coords[nodes] - center
    theta = np.arctan2(xy[:, 1], xy[:, 0])
    g[2 * nodes] = -np.sin(theta)
    g[2 * nodes + 1] = np.cos(theta)
    return g


def assemble_actuation(space, A11_full):
    """Input matrix B1 (n1 x 3) by quasi-steady Dirichlet lifting.

    Column i is A11_full @ g_i with g_i the unit tangential field of
    cylinder i; the mass-acceleration term of the lifting is dropped.
    """
    cols = []
    fields = []
    for i in range(3):
        g = cylinder_tangent_field(space, i)
        fields.append(g)
        cols.append(A11_full @ g)
    return np.column_stack(cols), fields
