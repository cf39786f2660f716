"""Spectral and mesh-convergence diagnostics of the developed flow."""

import numpy as np

from .space import build_space
from .steady import solve_steady


def psd_peak(signal, dt):
    """Frequency at which the power spectral density peaks.

    The mean is removed before the discrete Fourier transform; the zero
    bin is excluded.  Requires at least 64 uniform samples.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) < 64:
        raise ValueError("need at least 64 uniformly sampled values")
    x = x - x.mean()
    if np.abs(x).max() <= 1e-14 * max(1.0, np.abs(signal).max()):
        raise ValueError("constant signal has no spectral peak")
    psd = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), dt)
    return float(freqs[1 + np.argmax(psd[1:])])


def mesh_convergence_report(meshes, reynolds, window_T=100.0,
                            spinup_T=200.0, dt=0.01):
    """Limit-cycle statistics per mesh with errors against the finest.

    For each mesh: spin up to the developed flow, then record the energy
    over ``window_T`` more time units and report its mean, standard
    deviation, and spectral peak.  Relative errors use
    eps(q) = |q / q_ref - 1| with the finest mesh (most vertices) as
    reference.
    """
    from .ipcs import pinball_simulator
    from .simulate import developed_initial_condition
    from .steady import boundary_velocity

    if len(meshes) < 2:
        raise ValueError("need at least two meshes")
    rows = []
    for mesh in meshes:
        space = build_space(mesh)
        steady = solve_steady(space, reynolds)
        sim = pinball_simulator(space, reynolds, dt)
        dev = developed_initial_condition(space, reynolds,
                                          spinup_T=spinup_T, dt=dt,
                                          steady=steady, sim=sim)
        bc = boundary_velocity(space)
        v, p = dev.v, dev.p
        nsteps = int(round(window_T / dt))
        energy = np.empty(nsteps + 1)
        energy[0] = sim.energy(v)
        for k in range(1, nsteps + 1):
            v, p = sim.step(v, p, bc)
            energy[k] = sim.energy(v)
        rows.append({
            "vertices": mesh.num_vertices,
            "triangles": mesh.num_triangles,
            "E_mean": float(energy.mean()),
            "E_rms": float(energy.std()),
            "f_peak": psd_peak(energy, dt) if energy.std() > 1e-12 else 0.0,
        })

    ref = max(rows, key=lambda r: r["vertices"])
    for row in rows:
        for q in ("E_mean", "E_rms", "f_peak"):
            denom = ref[q]
            row["eps_" + q] = (abs(row[q] / denom - 1.0)
                               if abs(denom) > 1e-300 else 0.0)
    return rows
