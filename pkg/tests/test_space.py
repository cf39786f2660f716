import numpy as np
import pytest

from pinball.mesh import Mesh
from pinball.meshgen import rectangle_mesh
from pinball.space import (
    EDGE_QP,
    EDGE_QW,
    QUAD_POINTS,
    QUAD_WEIGHTS,
    build_space,
    p2_grad,
    p2_shape,
)


def unit_square_space(n=1):
    return build_space(rectangle_mesh(n, n))


def single_triangle_space():
    mesh = Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        triangles=np.array([[0, 1, 2]]),
        boundary_edges={(0, 1): "wall_bottom", (1, 2): "outlet",
                        (0, 2): "inlet"},
    )
    return build_space(mesh)


class TestDofCounts:
    def test_two_triangle_unit_square(self):
        sp = unit_square_space()
        assert sp.nv == 4
        assert sp.ne == 5
        assert sp.n_nodes == 9
        assert sp.n1 == 18
        assert sp.n2 == 4

    def test_single_triangle(self):
        sp = single_triangle_space()
        assert sp.n1 == 12
        assert sp.n2 == 3

    def test_midpoint_coordinates(self):
        sp = single_triangle_space()
        mid = sp.node_coords[sp.edge_node(0, 1)]
        assert np.allclose(mid, [0.5, 0.0])


class TestShapeFunctions:
    def test_partition_of_unity(self):
        for xi, eta in QUAD_POINTS:
            assert abs(p2_shape(xi, eta).sum() - 1.0) < 1e-14
            assert np.allclose(p2_grad(xi, eta).sum(axis=0), 0.0, atol=1e-14)

    def test_nodal_basis(self):
        # vertex and midpoint nodes in the reference element
        ref = np.array([[0, 0], [1, 0], [0, 1],
                        [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float)
        vals = np.array([p2_shape(x, y) for x, y in ref])
        assert np.allclose(vals, np.eye(6), atol=1e-14)

    def test_quadrature_weights_sum(self):
        assert abs(QUAD_WEIGHTS.sum() - 0.5) < 1e-14
        assert abs(EDGE_QW.sum() - 1.0) < 1e-14
        assert np.all((EDGE_QP > 0) & (EDGE_QP < 1))


class TestPrecomputedTables:
    def test_total_area(self):
        sp = unit_square_space(3)
        assert abs(sp.w_det.sum() - 1.0) < 1e-13

    def test_quadratic_interpolation_exact(self):
        sp = unit_square_space(2)
        v = sp.interpolate(lambda x, y: (x * y, x * x))
        dofs = np.empty((sp.tri_nodes.shape[0], 6, 2))
        dofs[:, :, 0] = v[2 * sp.tri_nodes]
        dofs[:, :, 1] = v[2 * sp.tri_nodes + 1]
        vq = np.einsum("qi,eic->eqc", sp.p2_vals, dofs)
        xq = sp.qpoints
        assert np.allclose(vq[..., 0], xq[..., 0] * xq[..., 1], atol=1e-13)
        assert np.allclose(vq[..., 1], xq[..., 0] ** 2, atol=1e-13)

    def test_gradient_of_quadratic_exact(self):
        sp = unit_square_space(2)
        v = sp.interpolate(lambda x, y: (x * x + y, 0.0))
        dofs = v[2 * sp.tri_nodes]
        gq = np.einsum("eqik,ei->eqk", sp.p2_grads, dofs)
        xq = sp.qpoints
        assert np.allclose(gq[..., 0], 2 * xq[..., 0], atol=1e-12)
        assert np.allclose(gq[..., 1], 1.0, atol=1e-12)


class TestBoundaryNodes:
    def test_inlet_nodes(self):
        sp = build_space(rectangle_mesh(2, 2))
        inlet = sp.boundary_nodes["inlet"]
        assert len(inlet) == 5  # 3 vertices + 2 midpoints
        assert np.allclose(sp.node_coords[inlet][:, 0], 0.0)

    def test_tag_union(self):
        sp = build_space(rectangle_mesh(2, 2))
        nodes = sp.nodes_of_tags(["inlet", "outlet"])
        assert len(nodes) == 10

    @pytest.mark.parametrize("tag", ["inlet", "outlet", "wall_top",
                                     "wall_bottom"])
    def test_all_tags_present(self, tag):
        sp = build_space(rectangle_mesh(2, 2))
        assert tag in sp.boundary_nodes
