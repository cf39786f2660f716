"""Versioned artifact containers and text exports (CSV, legacy VTK).

Binary artifacts (steady states, reduced models, feedback gains) are
stored as NumPy archives carrying a kind tag and a format version; a
reader rejects unknown kinds and incompatible versions instead of
misreading them.  Text exports use a fixed float format so re-running a
deterministic pipeline reproduces files byte for byte.
"""

import numpy as np

from .errors import PinballError
from .model import ReducedQuadraticModel
from .qqr import PolynomialFeedback

CONTAINER_VERSION = 1

#: float format shared by all CSV writers (round-trip exact for doubles)
FLOAT_FMT = "%.17g"

TRACE_HEADER = ("t,u1,u2,u3," + ",".join(f"y{i}" for i in range(1, 25))
                + ",E,l2err,CL1,CL2,CL3,CLtot,CD1,CD2,CD3,CDtot,Jcum")


def _check_header(data, kind, path):
    if "kind" not in data or "version" not in data:
        raise PinballError(f"{path}: not a pinball artifact container")
    found = str(data["kind"])
    if found != kind:
        raise PinballError(f"{path}: container holds {found!r}, "
                           f"expected {kind!r}")
    version = int(data["version"])
    if version != CONTAINER_VERSION:
        raise PinballError(
            f"{path}: container version {version} is not supported "
            f"(this reader handles version {CONTAINER_VERSION})")


def save_steady(path, steady):
    """Write a steady-state artifact (velocity, pressure, solve report)."""
    np.savez_compressed(
        path, kind="steady", version=CONTAINER_VERSION,
        re=steady.re, v=steady.v, p=steady.p,
        residual_norm=steady.residual_norm,
        newton_iterations=steady.newton_iterations,
        residual_history=np.asarray(steady.residual_history))


def load_steady(path, space=None):
    """Read a steady-state artifact; optionally bind it to a space."""
    from .steady import SteadyState

    with np.load(path, allow_pickle=False) as data:
        _check_header(data, "steady", path)
        return SteadyState(
            space=space, re=float(data["re"]),
            v=data["v"], p=data["p"],
            residual_norm=float(data["residual_norm"]),
            newton_iterations=int(data["newton_iterations"]),
            residual_history=list(data["residual_history"]))


def save_rom(path, rom, shifts=None, directions=None):
    """Write a reduced-model artifact including the final shift set."""
    extras = {}
    if shifts is not None:
        extras["shifts"] = np.asarray(shifts, dtype=complex)
    if directions is not None:
        extras["directions"] = np.asarray(directions, dtype=complex)
    if rom.shift_history:
        extras["shift_history"] = np.asarray(rom.shift_history,
                                             dtype=complex)
    np.savez_compressed(
        path, kind="rom", version=CONTAINER_VERSION,
        Etil=rom.Etil, Atil=rom.Atil, Btil=rom.Btil, Ctil=rom.Ctil,
        Ntil=rom.Ntil, Phi=rom.Phi, **extras)


def load_rom(path):
    """Read a reduced-model artifact; returns (rom, shifts, directions)."""
    with np.load(path, allow_pickle=False) as data:
        _check_header(data, "rom", path)
        rom = ReducedQuadraticModel(
            Etil=data["Etil"], Atil=data["Atil"], Btil=data["Btil"],
            Ctil=data["Ctil"], Ntil=data["Ntil"], Phi=data["Phi"],
            shift_history=list(data["shift_history"])
            if "shift_history" in data else [])
        shifts = data["shifts"] if "shifts" in data else None
        directions = data["directions"] if "directions" in data else None
        return rom, shifts, directions


def save_gains(path, fb):
    """Write a feedback-gain artifact (k2 and v3 absent for degree 1)."""
    extras = {}
    if fb.k2 is not None:
        extras["k2"] = fb.k2
    if fb.v3 is not None:
        extras["v3"] = fb.v3
    np.savez_compressed(
        path, kind="gains", version=CONTAINER_VERSION,
        k1=fb.k1, v2=fb.v2, P=fb.P, R=fb.R, **extras)


def load_gains(path):
    with np.load(path, allow_pickle=False) as data:
        _check_header(data, "gains", path)
        return PolynomialFeedback(
            k1=data["k1"],
            k2=data["k2"] if "k2" in data else None,
            v2=data["v2"],
            v3=data["v3"] if "v3" in data else None,
            P=data["P"], R=data["R"])


# -- CSV exports ---------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(FLOAT_FMT % x for x in row) + "\n")


def write_trace_csv(path, trace):
    """One row per time step in the fixed 39-column trace schema."""
    cols = np.column_stack([
        trace.times, trace.inputs, trace.outputs, trace.energy,
        trace.l2_error, trace.cl, trace.cl_total, trace.cd,
        trace.cd_total, trace.cost])
    _write_csv(path, TRACE_HEADER, cols)


def read_trace_csv(path):
    """Trace columns as a dict of arrays keyed by header name."""
    with open(path) as f:
        header = f.readline().strip()
    if header != TRACE_HEADER:
        raise PinballError(f"{path}: unexpected trace header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return dict(zip(TRACE_HEADER.split(","), data.T))


def write_bode_csv(path, omegas, fom_mags, rom_mags):
    _write_csv(path, "omega,fom_sigma_max,rom_sigma_max",
               np.column_stack([omegas, fom_mags, rom_mags]))


def write_shifts_csv(path, shifts):
    shifts = np.asarray(shifts, dtype=complex)
    _write_csv(path, "re,im", np.column_stack([shifts.real, shifts.imag]))


# -- VTK snapshots -------------------------------------------------------

def vertex_vorticity(space, v):
    """Vorticity dv_y/dx - dv_x/dy at mesh vertices (adjacency average).

    The quadratic velocity gradient is evaluated at each triangle corner
    and averaged over the triangles sharing the vertex.
    """
    from .space import p2_grad

    mesh = space.mesh
    corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    g_ref = np.array([p2_grad(x, y) for x, y in corners])   # (3, 6, 2)
    # physical gradients at the corners of every triangle: (nt, 3, 6, 2)
    g = np.einsum("cil,elk->ecik", g_ref, space.invJ)
    tn6 = space.tri_nodes
    vx = v[2 * tn6]
    vy = v[2 * tn6 + 1]
    # omega[e, c] at corner c of triangle e
    omega = (np.einsum("ecik,ei->eck", g, vy)[:, :, 0]
             - np.einsum("ecik,ei->eck", g, vx)[:, :, 1])

    out = np.zeros(mesh.num_vertices)
    count = np.zeros(mesh.num_vertices)
    for c in range(3):
        np.add.at(out, mesh.triangles[:, c], omega[:, c])
        np.add.at(count, mesh.triangles[:, c], 1.0)
    return out / np.maximum(count, 1.0)


def write_vtk(path, space, v, p, title="pinball snapshot"):
    """Legacy ASCII VTK unstructured grid with velocity, pressure,
    vorticity point data at the mesh vertices."""
    mesh = space.mesh
    nv = mesh.num_vertices
    nt = mesh.num_triangles
    vort = vertex_vorticity(space, v)
    with open(path, "w", newline="") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(title + "\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            f.write(f"{FLOAT_FMT % x} {FLOAT_FMT % y} 0\n")
        f.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {nt}\n")
        f.write("5\n" * nt)
        f.write(f"POINT_DATA {nv}\n")
        f.write("VECTORS velocity double\n")
        for k in range(nv):
            f.write(f"{FLOAT_FMT % v[2 * k]} {FLOAT_FMT % v[2 * k + 1]} 0\n")
        f.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
        for k in range(nv):
            f.write(FLOAT_FMT % p[k] + "\n")
        f.write("SCALARS vorticity double 1\nLOOKUP_TABLE default\n")
        for k in range(nv):
            f.write(FLOAT_FMT % vort[k] + "\n")
