"""Graded triangle mesh generation.

Pinball meshes come from a force-equilibrium (distmesh-style) smoother run
on the upper half of the channel; mirroring across the centerline yields an
exactly top-bottom symmetric mesh, which keeps the steady wake symmetric
and the total lift of the steady state at the round-off level.
"""

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshError
from .geometry import (
    CYLINDER_CENTERS,
    CYLINDER_RADIUS,
    XMAX,
    XMIN,
    YMAX,
    YMIN,
)
from .mesh import Mesh, fix_orientation


def _d_rect(p, x0, x1, y0, y1):
    return -np.minimum.reduce([p[:, 0] - x0, x1 - p[:, 0],
                               p[:, 1] - y0, y1 - p[:, 1]])


def _d_circle(p, c, r):
    return np.hypot(p[:, 0] - c[0], p[:, 1] - c[1]) - r


def distmesh2d(fd, fh, h0, bbox, pfix, max_iter=300, seed=0, dptol=2e-3):
    """Persson-Strang iterative mesh generator.

    fd : signed distance to the domain (negative inside)
    fh : relative element-size function
    h0 : base edge length at fh == 1
    """
    geps = 1e-3 * h0
    deps = 1e-8

    (x0, x1), (y0, y1) = bbox
    dx = h0
    dy = h0 * np.sqrt(3) / 2
    xs = np.arange(x0, x1 + dx, dx)
    ys = np.arange(y0, y1 + dy, dy)
    X, Y = np.meshgrid(xs, ys)
    X[1::2] += dx / 2
    p = np.column_stack([X.ravel(), Y.ravel()])
    p = p[fd(p) < geps]

    # probabilistic thinning against the size function
    rng = np.random.default_rng(seed)
    r0 = 1.0 / fh(p) ** 2
    p = p[rng.random(len(p)) < r0 / r0.max()]
    pfix = np.asarray(pfix, dtype=float)
    if len(pfix):
        keep = np.ones(len(p), dtype=bool)
        for q in pfix:
            keep &= np.hypot(*(p - q).T) > 0.5 * h0
        p = np.vstack([pfix, p[keep]])
    nfix = len(pfix)

    pold = np.full_like(p, np.inf)
    bars = None
    for _ in range(max_iter):
        if np.max(np.hypot(*(p - pold).T)) > 0.1 * h0:
            pold = p.copy()
            tri = Delaunay(p).simplices
            cent = p[tri].mean(axis=1)
            tri = tri[fd(cent) < -geps]
            bars = np.unique(
                np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]],
                                   tri[:, [2, 0]]]), axis=1), axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        L = np.hypot(*vec.T)
        hbar = fh(0.5 * (p[bars[:, 0]] + p[bars[:, 1]]))
        L0 = hbar * 1.2 * np.sqrt((L**2).sum() / (hbar**2).sum())
        F = np.maximum(L0 - L, 0.0)
        Fvec = (F / np.maximum(L, deps))[:, None] * vec
        move = np.zeros_like(p)
        np.add.at(move, bars[:, 0], Fvec)
        np.add.at(move, bars[:, 1], -Fvec)
        move[:nfix] = 0.0
        p = p + 0.2 * move

        # project exterior points back onto the boundary
        d = fd(p)
        out = d > 0
        if np.any(out):
            px = p[out].copy()
            dgx = (fd(px + [deps, 0]) - fd(px - [deps, 0])) / (2 * deps)
            dgy = (fd(px + [0, deps]) - fd(px - [0, deps])) / (2 * deps)
            norm = np.maximum(np.hypot(dgx, dgy), 1e-12)
            p[out] -= (d[out] / norm)[:, None] * np.column_stack([dgx, dgy])

        interior = fd(p) < -geps
        disp = np.zeros(len(p))
        disp[interior] = np.hypot(*move[interior].T) * 0.2
        if disp.max() < dptol * h0:
            break

    tri = Delaunay(p).simplices
    cent = p[tri].mean(axis=1)
    tri = tri[fd(cent) < -geps]
    fix_orientation(p, tri)
    return p, tri


def laplacian_smooth(vertices, triangles, fixed, n_passes=10, relax=0.7):
    """Move non-fixed vertices toward the mean of their neighbors."""
    from collections import defaultdict

    nbrs = defaultdict(set)
    for t in triangles:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            nbrs[a].add(b)
            nbrs[b].add(a)
    free = [i for i in range(len(vertices)) if i not in fixed]
    nbr_list = [np.fromiter(nbrs[i], dtype=np.int64) for i in free]
    v = vertices.copy()
    for _ in range(n_passes):
        new = np.array([v[nb].mean(axis=0) for nb in nbr_list])
        v[free] = (1 - relax) * v[free] + relax * new
    return v


def _pinball_fd_half(p):
    d = _d_rect(p, XMIN, XMAX, YMAX / 2.0, YMAX)
    for c in (CYLINDER_CENTERS[0], CYLINDER_CENTERS[2]):
        d = np.maximum(d, -_d_circle(p, c, CYLINDER_RADIUS))
    return d


def _pinball_fh(p):
    dcyl = np.minimum.reduce([
        np.abs(_d_circle(p, c, CYLINDER_RADIUS)) for c in CYLINDER_CENTERS
    ])
    h = 1.0 + 1.2 * dcyl
    # near wake needs resolution for the shedding dynamics
    wake = (p[:, 0] > 4.5) & (p[:, 0] < 17.0) & (np.abs(p[:, 1] - 6.0) < 3.0)
    h = np.where(wake, np.minimum(h, 2.6), h)
    return np.minimum(h, 7.0)


def _snap_half_boundary(p, tol):
    """Snap near-boundary points of the half-domain mesh exactly."""
    p = p.copy()
    ymid = YMAX / 2.0
    p[np.abs(p[:, 0] - XMIN) < tol, 0] = XMIN
    p[np.abs(p[:, 0] - XMAX) < tol, 0] = XMAX
    p[np.abs(p[:, 1] - YMAX) < tol, 1] = YMAX
    p[np.abs(p[:, 1] - ymid) < tol, 1] = ymid
    for c in (CYLINDER_CENTERS[0], CYLINDER_CENTERS[2]):
        r = np.hypot(p[:, 0] - c[0], p[:, 1] - c[1])
        near = np.abs(r - CYLINDER_RADIUS) < tol
        scale = CYLINDER_RADIUS / r[near]
        p[near] = c + (p[near] - c) * scale[:, None]
    return p


def _classify_boundary(vertices, triangles):
    """Tag the boundary edges of a full pinball mesh."""
    from collections import Counter

    count = Counter()
    for t in triangles:
        for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            count[tuple(sorted(e))] += 1
    boundary = {}
    for e, c in count.items():
        if c != 1:
            continue
        mid = 0.5 * (vertices[e[0]] + vertices[e[1]])
        if abs(mid[0] - XMIN) < 1e-9:
            tag = "inlet"
        elif abs(mid[0] - XMAX) < 1e-9:
            tag = "outlet"
        elif abs(mid[1] - YMIN) < 1e-9:
            tag = "wall_bottom"
        elif abs(mid[1] - YMAX) < 1e-9:
            tag = "wall_top"
        else:
            dists = [abs(np.hypot(*(mid - c)) - CYLINDER_RADIUS)
                     for c in CYLINDER_CENTERS]
            k = int(np.argmin(dists))
            if dists[k] > 0.2:
                raise MeshError(f"unclassifiable boundary edge at {mid}")
            tag = f"cyl{k + 1}"
        boundary[e] = tag
    return boundary


def pinball_mesh(h0=0.16, seed=0, max_iter=300):
    """Symmetric graded mesh of the pinball channel.

    ``h0`` is the edge length next to the cylinders; the default gives a
    desk-scale mesh of roughly 2000 triangles.
    """
    ymid = YMAX / 2.0
    pfix = [(XMIN, ymid), (XMAX, ymid), (XMIN, YMAX), (XMAX, YMAX)]
    # circle/centerline junctions of the front cylinder
    cx = CYLINDER_CENTERS[0][0]
    pfix += [(cx - CYLINDER_RADIUS, ymid), (cx + CYLINDER_RADIUS, ymid)]
    p, _ = distmesh2d(_pinball_fd_half, _pinball_fh, h0,
                      ((XMIN, XMAX), (ymid, YMAX)), pfix,
                      max_iter=max_iter, seed=seed)
    p = _snap_half_boundary(p, tol=0.3 * h0)
    # remove points that collapsed onto each other after snapping
    order = np.lexsort((p[:, 1], p[:, 0]))
    keep = np.ones(len(p), dtype=bool)
    ps = p[order]
    dup = np.all(np.abs(np.diff(ps, axis=0)) < 1e-9, axis=1)
    keep[order[1:][dup]] = False
    p = p[keep]

    # mirror across the centerline
    on_axis = np.abs(p[:, 1] - ymid) < 1e-12
    upper = ~on_axis
    full = np.vstack([p, np.column_stack([p[upper, 0],
                                          2 * ymid - p[upper, 1]])])
    tri = Delaunay(p).simplices
    cent = p[tri].mean(axis=1)
    tri = tri[_pinball_fd_half(cent) < -1e-6]
    # index map for mirrored points
    mirror_idx = np.arange(len(p))
    mirror_idx[upper] = len(p) + np.arange(upper.sum())
    tri_mirror = mirror_idx[tri][:, [0, 2, 1]]
    tris = np.vstack([tri, tri_mirror])
    fix_orientation(full, tris)

    boundary = _classify_boundary(full, tris)
    # project cylinder vertices exactly onto their circles
    for (a, b), tag in boundary.items():
        if not tag.startswith("cyl"):
            continue
        c = CYLINDER_CENTERS[int(tag[3:]) - 1]
        for i in (a, b):
            rel = full[i] - c
            full[i] = c + rel * (CYLINDER_RADIUS / np.hypot(*rel))
    fixed = {i for e in boundary for i in e}
    full = laplacian_smooth(full, tris, fixed)
    # re-impose exact mirror symmetry after smoothing
    axis_ids = np.flatnonzero(on_axis)
    full[axis_ids, 1] = ymid
    up_ids = np.flatnonzero(upper)
    full[mirror_idx[up_ids], 0] = full[up_ids, 0]
    full[mirror_idx[up_ids], 1] = 2 * ymid - full[up_ids, 1]
    fix_orientation(full, tris)
    mesh = Mesh(vertices=full, triangles=tris, boundary_edges=boundary)
    mesh.validate()
    return mesh


def rectangle_mesh(nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0,
                   tags=("inlet", "wall_bottom", "outlet", "wall_top")):
    """Structured crossed-diagonal rectangle mesh.

    ``tags`` name the left, bottom, right, and top boundaries.
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            # alternate diagonals to avoid directional bias
            if (i + j) % 2 == 0:
                tris += [[a, b, c], [a, c, d]]
            else:
                tris += [[a, b, d], [b, c, d]]
    tris = np.asarray(tris, dtype=np.int64)
    fix_orientation(verts, tris)

    left, bottom, right, top = tags
    boundary = {}
    for j in range(ny):
        boundary[tuple(sorted((vid(0, j), vid(0, j + 1))))] = left
        boundary[tuple(sorted((vid(nx, j), vid(nx, j + 1))))] = right
    for i in range(nx):
        boundary[tuple(sorted((vid(i, 0), vid(i + 1, 0))))] = bottom
        boundary[tuple(sorted((vid(i, ny), vid(i + 1, ny))))] = top
    mesh = Mesh(vertices=verts, triangles=tris, boundary_edges=boundary)
    mesh.validate(check_cylinders=False)
    return mesh
