"""Taylor-Hood (P2-P1) function space on a triangle mesh.

Velocity uses quadratic elements on vertices plus edge midpoints with two
components interleaved as dof = 2 * node + component; pressure uses linear
elements on vertices.  All per-element quadrature data (shape values,
physical gradients, weights) is precomputed vectorized over elements.
"""

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh

# 7-point degree-5 rule on the reference triangle (barycentric)
_QA = 0.059715871789770
_QB = 0.470142064105115
_QC = 0.797426985353087
_QD = 0.101286507323456
QUAD_POINTS = np.array([
    [1 / 3, 1 / 3],
    [_QB, _QB], [_QA, _QB], [_QB, _QA],
    [_QD, _QD], [_QC, _QD], [_QD, _QC],
])
QUAD_WEIGHTS = np.array([
    0.225,
    0.132394152788506, 0.132394152788506, 0.132394152788506,
    0.125939180544827, 0.125939180544827, 0.125939180544827,
]) * 0.5  # reference triangle area

# 3-point Gauss rule on [0, 1] for boundary edges
EDGE_QP = 0.5 * (1.0 + np.array([-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)]))
EDGE_QW = 0.5 * np.array([5 / 9, 8 / 9, 5 / 9])


def p2_shape(xi, eta):
    """Values of the 6 quadratic shape functions at (xi, eta)."""
    lam = np.array([1 - xi - eta, xi, eta])
    vertex = lam * (2 * lam - 1)
    edge = 4 * np.array([lam[0] * lam[1], lam[1] * lam[2], lam[2] * lam[0]])
    return np.concatenate([vertex, edge])


def p2_grad(xi, eta):
    """Reference gradients of the 6 quadratic shape functions, (6, 2)."""
    l0 = 1 - xi - eta
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = np.array([l0, xi, eta])
    g = np.empty((6, 2))
    for i in range(3):
        g[i] = (4 * lam[i] - 1) * dl[i]
    pairs = [(0, 1), (1, 2), (2, 0)]
    for k, (i, j) in enumerate(pairs):
        g[3 + k] = 4 * (lam[i] * dl[j] + lam[j] * dl[i])
    return g


def p1_shape(xi, eta):
    return np.array([1 - xi - eta, xi, eta])


P1_GRAD_REF = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass
class TaylorHoodSpace:
    mesh: Mesh
    edges: dict = field(repr=False)          # sorted vertex pair -> edge id
    tri_nodes: np.ndarray = field(repr=False)    # (nt, 6) P2 node ids
    node_coords: np.ndarray = field(repr=False)  # (n_nodes, 2)
    boundary_nodes: dict = field(repr=False)     # tag -> sorted node array

    def __post_init__(self):
        mesh = self.mesh
        self.nv = mesh.num_vertices
        self.ne = len(self.edges)
        self.n_nodes = self.nv + self.ne
        self.n1 = 2 * self.n_nodes
        self.n2 = self.nv
        self._precompute()

    # -- geometry / quadrature tables ------------------------------------
    def _precompute(self):
        v = self.mesh.vertices
        t = self.mesh.triangles
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        J = np.stack([p1 - p0, p2 - p0], axis=-1)       # (nt, 2, 2)
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJ = np.empty_like(J)
        invJ[:, 0, 0] = J[:, 1, 1]
        invJ[:, 0, 1] = -J[:, 0, 1]
        invJ[:, 1, 0] = -J[:, 1, 0]
        invJ[:, 1, 1] = J[:, 0, 0]
        invJ /= self.detJ[:, None, None]
        self.invJ = invJ

        nq = len(QUAD_WEIGHTS)
        self.p2_vals = np.array([p2_shape(x, y) for x, y in QUAD_POINTS])
        g_ref = np.array([p2_grad(x, y) for x, y in QUAD_POINTS])  # (nq,6,2)
        # physical gradient: g[e,q,i,k] = g_ref[q,i,l] * invJ[e,l,k]
        self.p2_grads = np.einsum("qil,elk->eqik", g_ref, invJ)
        self.p1_vals = np.array([p1_shape(x, y) for x, y in QUAD_POINTS])
        self.p1_grads = np.einsum("il,elk->eik", P1_GRAD_REF, invJ)
        # w_detJ[e,q]: quadrature weight times Jacobian
        self.w_det = QUAD_WEIGHTS[None, :] * self.detJ[:, None]
        # physical quadrature points (nt, nq, 2)
        self.qpoints = (p0[:, None, :]
                        + np.einsum("qd,edk->eqk", QUAD_POINTS,
                                    np.stack([p1 - p0, p2 - p0], axis=1)))
        # shortest edge, for CFL reporting
        el = np.minimum.reduce([
            np.hypot(*(p1 - p0).T), np.hypot(*(p2 - p1).T),
            np.hypot(*(p0 - p2).T)])
        self.h_min = float(el.min())

    # -- dof helpers -----------------------------------------------------
    def edge_node(self, a, b):
        return self.nv + self.edges[tuple(sorted((a, b)))]

    def velocity_dofs_of_nodes(self, nodes):
        nodes = np.asarray(nodes, dtype=np.int64)
        return np.concatenate([2 * nodes, 2 * nodes + 1])

    def nodes_of_tags(self, tags):
        out = set()
        for tag in tags:
            out.update(self.boundary_nodes.get(tag, []))
        return np.array(sorted(out), dtype=np.int64)

    def interpolate(self, fn):
        """P2 coefficients of a function fn(x, y) -> (vx, vy)."""
        vals = np.array([fn(x, y) for x, y in self.node_coords])
        out = np.empty(self.n1)
        out[0::2] = vals[:, 0]
        out[1::2] = vals[:, 1]
        return out

    def interpolate_pressure(self, fn):
        return np.array([fn(x, y) for x, y in self.mesh.vertices])


def build_space(mesh):
    """Number P2/P1 degrees of freedom and precompute quadrature data."""
    t = mesh.triangles
    edges = {}
    for tri in t:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (a, b) if a < b else (b, a)
            if key not in edges:
                edges[key] = len(edges)

    nv = mesh.num_vertices
    tri_nodes = np.empty((len(t), 6), dtype=np.int64)
    tri_nodes[:, :3] = t
    for e, tri in enumerate(t):
        for k, (a, b) in enumerate(((tri[0], tri[1]), (tri[1], tri[2]),
                                    (tri[2], tri[0]))):
            key = (a, b) if a < b else (b, a)
            tri_nodes[e, 3 + k] = nv + edges[key]

    coords = np.empty((nv + len(edges), 2))
    coords[:nv] = mesh.vertices
    for (a, b), eid in edges.items():
        coords[nv + eid] = 0.5 * (mesh.vertices[a] + mesh.vertices[b])

    boundary_nodes = {}
    for (a, b), tag in mesh.boundary_edges.items():
        key = (a, b) if a < b else (b, a)
        mid = nv + edges[key]
        boundary_nodes.setdefault(tag, set()).update((a, b, mid))
    boundary_nodes = {tag: np.array(sorted(s), dtype=np.int64)
                      for tag, s in boundary_nodes.items()}

    return TaylorHoodSpace(mesh=mesh, edges=edges, tri_nodes=tri_nodes,
                           node_coords=coords, boundary_nodes=boundary_nodes)
