"""Renderers for the six figure kinds.

Every renderer takes a list of input paths and an output image path,
reads only the declared artifact schemas, and writes a single image.
Controller labels are inferred from trace file names of the form
``trace_<label>.csv`` so multi-trace figures get a meaningful legend.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, read_bode, read_shifts, read_trace, \
    read_vtk

#: cylinder centers and radius of the standard three-cylinder geometry,
#: drawn as outlines on vorticity snapshots
CYLINDERS = ((6.5 - np.sqrt(0.75), 6.0 - 0.75),
             (6.5 - np.sqrt(0.75), 6.0 + 0.75),
             (6.5 + np.sqrt(0.75), 6.0))
CYLINDER_RADIUS = 0.5


def trace_label(path):
    stem = Path(path).stem
    if stem.startswith("trace_"):
        return stem[len("trace_"):]
    return stem


def _single_input(paths, kind):
    if len(paths) != 1:
        raise SchemaError(paths[0] if paths else "<none>",
                          f"{kind} takes exactly one input file")
    return paths[0]


def render_bode(paths, out):
    data = read_bode(_single_input(paths, "bode"))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(data["omega"], data["fom_sigma_max"], "k-",
              label="full order")
    ax.loglog(data["omega"], data["rom_sigma_max"], "r--",
              label="reduced order")
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"$\sigma_{\max}(G(i\omega))$")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_shifts(paths, out):
    data = read_shifts(_single_input(paths, "shifts"))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(data["re"], data["im"], marker="x", color="tab:blue")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel(r"Re $\sigma$")
    ax.set_ylabel(r"Im $\sigma$")
    ax.grid(True, alpha=0.3)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_error_cost(paths, out):
    traces = [(trace_label(p), read_trace(p)) for p in paths]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for label, tr in traces:
        ax1.semilogy(tr["t"], tr["l2err"], label=label)
        ax2.plot(tr["t"], tr["Jcum"], label=label)
    ax1.set_xlabel("t")
    ax1.set_ylabel(r"$\|v - v_{ss}\|_{L_2}$")
    ax2.set_xlabel("t")
    ax2.set_ylabel("integrated cost J")
    if len(traces) > 1:
        ax1.legend()
        ax2.legend()
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_inputs(paths, out):
    tr = read_trace(_single_input(paths, "inputs"))
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in (1, 2, 3):
        ax.plot(tr["t"], tr[f"u{k}"], label=f"cylinder {k}")
    ax.set_xlabel("t")
    ax.set_ylabel("rotation speed u")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_lift_drag(paths, out):
    traces = [(trace_label(p), read_trace(p)) for p in paths]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for label, tr in traces:
        ax1.plot(tr["t"], tr["CLtot"], label=label)
        ax2.plot(tr["t"], tr["CDtot"], label=label)
    ax1.set_ylabel(r"total lift $C_L$")
    ax2.set_ylabel(r"total drag $C_D$")
    ax2.set_xlabel("t")
    if len(traces) > 1:
        ax1.legend()
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _grid_vorticity(points, triangles, velocity, nx=260, ny=120):
    """Finite-difference vorticity on a uniform resampling of the field."""
    import matplotlib.tri as mtri

    x0, x1 = points[:, 0].min(), points[:, 0].max()
    y0, y1 = points[:, 1].min(), points[:, 1].max()
    gx = np.linspace(x0, x1, nx)
    gy = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(gx, gy)
    triang = mtri.Triangulation(points[:, 0], points[:, 1], triangles)
    U = np.stack([
        np.nan_to_num(np.asarray(
            mtri.LinearTriInterpolator(triang, velocity[:, c])(X, Y)))
        for c in (0, 1)], axis=-1)
    dvy_dx = np.gradient(U[:, :, 1], gx, axis=1)
    dvx_dy = np.gradient(U[:, :, 0], gy, axis=0)
    return X, Y, dvy_dx - dvx_dy


def render_vorticity(paths, out):
    data = read_vtk(_single_input(paths, "vorticity"))
    pts = data["points"]
    fig, ax = plt.subplots(figsize=(9, 4))
    if "vorticity" in data:
        w = data["vorticity"]
        lim = np.percentile(np.abs(w), 98) or 1.0
        ax.tricontourf(pts[:, 0], pts[:, 1], data["triangles"], w,
                       levels=np.linspace(-lim, lim, 41), cmap="RdBu_r",
                       extend="both")
    else:
        X, Y, w = _grid_vorticity(pts, data["triangles"],
                                  data["velocity"])
        lim = np.percentile(np.abs(w), 98) or 1.0
        ax.contourf(X, Y, w, levels=np.linspace(-lim, lim, 41),
                    cmap="RdBu_r", extend="both")
    for cx, cy in CYLINDERS:
        ax.add_patch(plt.Circle((cx, cy), CYLINDER_RADIUS,
                                facecolor="white", edgecolor="k", zorder=3))
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


RENDERERS = {
    "bode": render_bode,
    "shifts": render_shifts,
    "error_cost": render_error_cost,
    "inputs": render_inputs,
    "lift_drag": render_lift_drag,
    "vorticity": render_vorticity,
}


def render(kind, paths, out):
    """Render one figure kind from artifact paths to an image file."""
    if kind not in RENDERERS:
        raise ValueError(f"unknown figure kind {kind!r}; expected one of "
                         + ", ".join(sorted(RENDERERS)))
    if not paths:
        raise SchemaError("<none>", "no input files given")
    RENDERERS[kind](paths, out)
