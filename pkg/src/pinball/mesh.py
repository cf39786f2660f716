"""Triangle meshes with tagged boundaries, plus Gmsh MSH 2.2 ASCII I/O.

The file format uses the physical names inlet, walls, outlet, cyl1, cyl2,
cyl3; "walls" is split into wall_top / wall_bottom on load using the edge
midpoint.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .geometry import CYLINDER_CENTERS, CYLINDER_RADIUS, CYLINDER_TAGS, YMAX

BOUNDARY_TAGS = ("inlet", "wall_top", "wall_bottom", "outlet") + CYLINDER_TAGS

#: physical names used in the MSH files (walls merged)
MSH_NAMES = ("inlet", "walls", "outlet", "cyl1", "cyl2", "cyl3")


@dataclass
class Mesh:
    vertices: np.ndarray                  # (nv, 2)
    triangles: np.ndarray                 # (nt, 3) int, positively oriented
    boundary_edges: dict = field(default_factory=dict)  # (a, b) sorted -> tag

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def edges_of_tag(self, tag):
        return [e for e, t in self.boundary_edges.items() if t == tag]

    def validate(self, check_cylinders=True):
        """Check orientation, vertex uniqueness, and cylinder-edge geometry."""
        v = self.vertices
        t = self.triangles
        a = v[t[:, 1]] - v[t[:, 0]]
        b = v[t[:, 2]] - v[t[:, 0]]
        if np.any(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] <= 0):
            raise MeshError("negatively oriented or degenerate triangle")
        # duplicate check via lexicographic sort
        order = np.lexsort((v[:, 1], v[:, 0]))
        sv = v[order]
        close = np.all(np.abs(np.diff(sv, axis=0)) < 1e-9, axis=1)
        if np.any(close):
            raise MeshError("duplicate vertices within 1e-9")
        if check_cylinders:
            for k, tag in enumerate(CYLINDER_TAGS):
                for (i, j) in self.edges_of_tag(tag):
                    for p in (v[i], v[j]):
                        rr = np.hypot(*(p - CYLINDER_CENTERS[k]))
                        if abs(rr - CYLINDER_RADIUS) > 1e-6:
                            raise MeshError(
                                f"{tag} edge vertex off the circle by "
                                f"{abs(rr - CYLINDER_RADIUS):.2e}"
                            )


def fix_orientation(vertices, triangles):
    """Flip negatively oriented triangles in place; return flip count."""
    a = vertices[triangles[:, 1]] - vertices[triangles[:, 0]]
    b = vertices[triangles[:, 2]] - vertices[triangles[:, 0]]
    bad = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] < 0
    triangles[bad] = triangles[bad][:, [0, 2, 1]]
    return int(bad.sum())


def _split_walls(vertices, edge):
    mid_y = 0.5 * (vertices[edge[0], 1] + vertices[edge[1], 1])
    return "wall_top" if mid_y > YMAX / 2.0 else "wall_bottom"


def load_msh(path, require_all_tags=False):
    """Parse a Gmsh MSH 2.2 ASCII file into a Mesh.

    Raises MeshError with a line number on malformed input; repairs
    triangle orientation with a warning.  With ``require_all_tags`` the
    full pinball tag set must be present (used for production meshes).
    """
    with open(path) as f:
        lines = f.read().splitlines()

    sections = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            j = i + 1
            while j < len(lines) and lines[j].strip() != f"$End{name}":
                j += 1
            if j >= len(lines):
                raise MeshError(f"line {i + 1}: unterminated section ${name}")
            sections[name] = (i + 1, lines[i + 1:j])
            i = j + 1
        else:
            i += 1

    for required in ("MeshFormat", "PhysicalNames", "Nodes", "Elements"):
        if required not in sections:
            raise MeshError(f"missing ${required} section")

    start, fmt = sections["MeshFormat"]
    if not fmt or not fmt[0].split()[0].startswith("2.2"):
        raise MeshError(f"line {start + 1}: expected MSH format 2.2")

    start, phys = sections["PhysicalNames"]
    names = {}
    try:
        count = int(phys[0])
        for row in phys[1:1 + count]:
            parts = row.split()
            names[int(parts[1])] = parts[2].strip('"')
    except (ValueError, IndexError) as exc:
        raise MeshError(f"line {start + 1}: bad $PhysicalNames") from exc

    start, node_lines = sections["Nodes"]
    try:
        nv = int(node_lines[0])
        verts = np.empty((nv, 2))
        ids = {}
        for k, row in enumerate(node_lines[1:1 + nv]):
            parts = row.split()
            ids[int(parts[0])] = k
            verts[k] = [float(parts[1]), float(parts[2])]
    except (ValueError, IndexError) as exc:
        raise MeshError(f"line {start + 1}: bad $Nodes") from exc

    start, elem_lines = sections["Elements"]
    triangles = []
    boundary = {}
    try:
        ne = int(elem_lines[0])
        for row in elem_lines[1:1 + ne]:
            parts = [int(x) for x in row.split()]
            etype, ntags = parts[1], parts[2]
            tags = parts[3:3 + ntags]
            conn = [ids[n] for n in parts[3 + ntags:]]
            if etype == 2:
                triangles.append(conn)
            elif etype == 1:
                phys_name = names.get(tags[0] if tags else -1)
                if phys_name is None:
                    raise MeshError(
                        f"boundary edge with unknown physical tag {tags}"
                    )
                edge = tuple(sorted(conn))
                if phys_name == "walls":
                    phys_name = _split_walls(verts, edge)
                if phys_name not in BOUNDARY_TAGS:
                    raise MeshError(f"unknown boundary tag {phys_name!r}")
                boundary[edge] = phys_name
    except MeshError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise MeshError(f"line {start + 1}: bad $Elements") from exc

    triangles = np.asarray(triangles, dtype=np.int64)
    flips = fix_orientation(verts, triangles)
    if flips:
        warnings.warn(f"repaired orientation of {flips} triangles")

    if require_all_tags:
        missing = {t for t in MSH_NAMES if t not in names.values()}
        if missing:
            raise MeshError(f"missing physical groups: {sorted(missing)}")

    mesh = Mesh(vertices=verts, triangles=triangles, boundary_edges=boundary)
    mesh.validate(check_cylinders=any(t.startswith("cyl")
                                      for t in boundary.values()))
    return mesh


def packaged_mesh(name="desk"):
    """Load one of the shipped pinball meshes (coarse, desk, fine)."""
    from importlib.resources import files

    path = files("pinball") / "meshes" / f"pinball_{name}.msh"
    return load_msh(str(path), require_all_tags=True)


def write_msh(mesh, path):
    """Write a Mesh as Gmsh MSH 2.2 ASCII with the canonical physical names."""
    tag_to_phys = {"inlet": 1, "wall_top": 2, "wall_bottom": 2, "outlet": 3,
                   "cyl1": 4, "cyl2": 5, "cyl3": 6}
    with open(path, "w") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write("$PhysicalNames\n6\n")
        for pid, name in zip((1, 2, 3, 4, 5, 6), MSH_NAMES):
            f.write(f'1 {pid} "{name}"\n')
        f.write("$EndPhysicalNames\n")
        f.write(f"$Nodes\n{mesh.num_vertices}\n")
        for k, (x, y) in enumerate(mesh.vertices, start=1):
            f.write(f"{k} {x:.17g} {y:.17g} 0\n")
        f.write("$EndNodes\n")
        nelem = len(mesh.boundary_edges) + mesh.num_triangles
        f.write(f"$Elements\n{nelem}\n")
        eid = 1
        for (a, b), tag in sorted(mesh.boundary_edges.items()):
            pid = tag_to_phys[tag]
            f.write(f"{eid} 1 2 {pid} {pid} {a + 1} {b + 1}\n")
            eid += 1
        for (a, b, c) in mesh.triangles:
            f.write(f"{eid} 2 2 7 7 {a + 1} {b + 1} {c + 1}\n")
            eid += 1
        f.write("$EndElements\n")
