"""Command-line pipeline: steady, openloop, reduce, design, closedloop,
report.

Each subcommand reads an experiment config, picks up the artifacts
earlier stages wrote into the output directory, and writes its own.
Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
A lock file guards the output directory against concurrent runs.
"""

import argparse
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .config import load_config
from .containers import (
    load_gains,
    load_rom,
    load_steady,
    save_gains,
    save_rom,
    save_steady,
    write_bode_csv,
    write_shifts_csv,
    write_trace_csv,
    write_vtk,
)
from .errors import PinballError, UsageError
from .irka import bode_data, irka
from .mesh import load_msh, packaged_mesh
from .metrics import psd_peak
from .model import fom_transfer, rom_transfer
from .qqr import care_residual, design_feedback
from .simulate import (
    developed_initial_condition,
    running_cost,
    simulate,
    time_to_threshold,
)
from .space import build_space
from .steady import linearize, solve_steady


@contextmanager
def output_lock(output_dir):
    """Exclusive lock file guarding the output directory."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    lock = output_dir / ".lock"
    try:
        fd = open(lock, "x")
    except FileExistsError:
        raise UsageError(
            f"output directory {output_dir} is locked by another run "
            f"(remove {lock} if that run died)") from None
    try:
        fd.close()
        yield output_dir
    finally:
        lock.unlink(missing_ok=True)


def load_space(cfg):
    if not cfg.mesh_path:
        mesh = packaged_mesh("desk")
    else:
        path = Path(cfg.mesh_path)
        if not path.is_file():
            raise UsageError(f"mesh file not found: {path}")
        mesh = load_msh(path, require_all_tags=True)
    return build_space(mesh)


def _require(path, producer):
    if not Path(path).is_file():
        raise UsageError(f"missing artifact {path}; run `pinball "
                         f"{producer}` first")
    return path


def _load_steady_artifact(out, space):
    return load_steady(_require(out / "steady.npz", "steady"), space=space)


def _developed_state(cfg, out, space, steady):
    """Cached limit-cycle snapshot, spun up on first use."""
    path = out / "developed.npz"
    if path.is_file():
        with np.load(path, allow_pickle=False) as data:
            if float(data["re"]) == cfg.reynolds:
                return data["v"], data["p"]
    dev = developed_initial_condition(space, cfg.reynolds,
                                      spinup_T=cfg.spinup_T, dt=cfg.dt,
                                      steady=steady)
    np.savez_compressed(path, re=cfg.reynolds, v=dev.v, p=dev.p,
                        energy=dev.energy)
    return dev.v, dev.p


def _snapshot_hook(cfg, out, space, label):
    if cfg.snapshot_stride <= 0:
        return None

    def hook(k, t, v, p):
        if k % cfg.snapshot_stride == 0:
            write_vtk(out / f"snap_{label}_{k:06d}.vtk", space, v, p,
                      title=f"t={t:.3f}")
    return hook


def cmd_steady(cfg, args):
    space = load_space(cfg)
    with output_lock(cfg.output_dir) as out:
        steady = solve_steady(space, cfg.reynolds)
        save_steady(out / "steady.npz", steady)
        print(f"steady state at Re={cfg.reynolds:g}: "
              f"residual {steady.residual_norm:.3e}, "
              f"||v_ss||_L2 = {steady.l2_norm():.4f}, "
              f"{steady.newton_iterations} Newton steps")
    return 0


def cmd_openloop(cfg, args):
    space = load_space(cfg)
    with output_lock(cfg.output_dir) as out:
        steady = _load_steady_artifact(out, space)
        model = linearize(space, steady)
        v0, p0 = _developed_state(cfg, out, space, steady)
        trace = simulate(space, model, steady, controller="none",
                         v0=v0, p0=p0, T=cfg.t_final, dt=cfg.dt,
                         snapshot_hook=_snapshot_hook(cfg, out, space,
                                                      "none"))
        write_trace_csv(out / "trace_none.csv", trace)
        e_mean = float(trace.energy.mean())
        e_rms = float(trace.energy.std())
        try:
            f_peak = psd_peak(trace.energy, cfg.dt)
        except ValueError:
            f_peak = float("nan")
        print(f"open loop: E_mean {e_mean:.4f}, E_rms {e_rms:.4e}, "
              f"f_peak {f_peak:.4f}")
    return 0


def cmd_reduce(cfg, args):
    space = load_space(cfg)
    with output_lock(cfg.output_dir) as out:
        steady = _load_steady_artifact(out, space)
        model = linearize(space, steady)
        state, Phi, rom = irka(model, cfg.r, tol=cfg.irka_tol,
                               max_iter=cfg.irka_max_iter,
                               seed=cfg.rng_seed)
        if not state.converged and not args.accept_best:
            print("shift iteration did not converge; rerun with "
                  "--accept-best to keep the best iterate",
                  file=sys.stderr)
            return 1
        errs = []
        for s, b in zip(state.shifts, state.directions):
            Gf = fom_transfer(model, s) @ b
            Gr = rom_transfer(rom, s) @ b
            errs.append(np.linalg.norm(Gf - Gr)
                        / max(np.linalg.norm(Gf), 1e-300))
        save_rom(out / "rom.npz", rom, shifts=state.shifts,
                 directions=state.directions)
        write_shifts_csv(out / "shifts.csv", state.shifts)
        omegas = np.logspace(-2.0, 2.0, 200)
        write_bode_csv(out / "bode.csv", omegas,
                       bode_data(model, omegas), bode_data(rom, omegas))
        print(f"reduction to r={rom.r}: "
              f"{'converged' if state.converged else 'best iterate'} in "
              f"{state.iterations} iterations, max interpolation "
              f"residual {max(errs):.3e}")
    return 0


def cmd_design(cfg, args):
    if args.self_test:
        return _design_self_test()
    space = load_space(cfg)
    with output_lock(cfg.output_dir) as out:
        steady = _load_steady_artifact(out, space)
        model = linearize(space, steady)
        rom, _, _ = load_rom(_require(out / "rom.npz", "reduce"))
        fb = design_feedback(rom, M=model.E11, degree=cfg.control_degree,
                             care_tol=cfg.care_tol)
        Q = rom.Ctil.T @ rom.Ctil
        res = np.linalg.norm(care_residual(rom.Atil, rom.Btil, Q, fb.R,
                                           fb.v2))
        acl = rom.Atil + rom.Btil @ fb.k1
        abscissa = float(np.linalg.eigvals(acl).real.max())
        k2norm = (0.0 if fb.k2 is None
                  else float(np.linalg.norm(fb.k2)))
        save_gains(out / "gains.npz", fb)
        print(f"gains (degree {cfg.control_degree}): CARE residual "
              f"{res:.3e}, closed-loop abscissa {abscissa:.4f}, "
              f"||k2|| {k2norm:.4f}")
    return 0


def _design_self_test():
    """Scalar closed-form check of the synthesis chain."""
    from .model import ReducedQuadraticModel

    rom = ReducedQuadraticModel(
        Etil=np.eye(1), Atil=np.array([[1.0]]), Btil=np.eye(1),
        Ctil=np.eye(1), Ntil=np.ones((1, 1)), Phi=np.eye(1))
    fb = design_feedback(rom, degree=2)
    expect = {
        "v2": 1.0 + math.sqrt(2.0), "k1": -(1.0 + math.sqrt(2.0)),
        "v3": (2.0 + math.sqrt(2.0)) / 3.0, "k2": -(2.0 + math.sqrt(2.0)),
    }
    got = {"v2": fb.v2[0, 0], "k1": fb.k1[0, 0], "v3": fb.v3[0],
           "k2": fb.k2[0, 0]}
    ok = all(abs(got[k] - expect[k]) < 1e-10 for k in expect)
    for k in ("v2", "k1", "v3", "k2"):
        print(f"self-test {k}: got {got[k]:+.6f}, expected "
              f"{expect[k]:+.6f}")
    print("self-test " + ("passed" if ok else "FAILED"))
    return 0 if ok else 1


def _lift_amplitude(cl_total):
    return 0.5 * float(cl_total.max() - cl_total.min())


def cmd_closedloop(cfg, args):
    controller = args.controller
    space = load_space(cfg)
    with output_lock(cfg.output_dir) as out:
        steady = _load_steady_artifact(out, space)
        model = linearize(space, steady)
        fb = None
        if controller != "none":
            fb = load_gains(_require(out / "gains.npz", "design"))
            if controller == "qqr" and fb.k2 is None:
                raise UsageError("gains container holds a degree-1 "
                                 "design; rerun `pinball design` with "
                                 "control_degree = 2")
        v0, p0 = _developed_state(cfg, out, space, steady)
        trace = simulate(space, model, steady, controller=controller,
                         fb=fb, v0=v0, p0=p0, T=cfg.t_final, dt=cfg.dt,
                         snapshot_hook=_snapshot_hook(cfg, out, space,
                                                      controller))
        write_trace_csv(out / f"trace_{controller}.csv", trace)

        summary = {
            "controller": controller,
            "reynolds": cfg.reynolds,
            "t_final": cfg.t_final,
            "time_to_2pct": time_to_threshold(trace, 0.02),
            "final_rel_error": float(trace.l2_error[-1] / trace.vss_norm),
            "total_cost": running_cost(trace,
                                       None if fb is None else fb.R),
            "mean_drag": float(trace.cd_total.mean()),
            "lift_amplitude": _lift_amplitude(trace.cl_total),
        }
        ref = out / "trace_none.csv"
        if controller != "none" and ref.is_file():
            from .containers import read_trace_csv

            base = read_trace_csv(ref)
            mean_cd0 = float(base["CDtot"].mean())
            amp0 = _lift_amplitude(base["CLtot"])
            summary["drag_reduction_pct"] = \
                100.0 * (1.0 - summary["mean_drag"] / mean_cd0)
            summary["lift_amplitude_uncontrolled"] = amp0
            if amp0 > 0:
                summary["lift_suppression_pct"] = \
                    100.0 * (1.0 - summary["lift_amplitude"] / amp0)
        with open(out / f"summary_{controller}.json", "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_report(cfg, args):
    """Print a text digest of whatever artifacts the pipeline produced."""
    out = Path(cfg.output_dir)
    if not out.is_dir():
        raise UsageError(f"output directory not found: {out}")
    found = False
    if (out / "steady.npz").is_file():
        steady = load_steady(out / "steady.npz")
        print(f"steady: Re={steady.re:g}, residual "
              f"{steady.residual_norm:.3e}, "
              f"{steady.newton_iterations} Newton steps")
        found = True
    if (out / "rom.npz").is_file():
        rom, shifts, _ = load_rom(out / "rom.npz")
        print(f"rom: r={rom.r}, m={rom.m}, p={rom.p}, "
              f"{len(rom.shift_history)} shift iterations recorded")
        if shifts is not None:
            print(f"  shifts: {len(shifts)}, real range "
                  f"[{shifts.real.min():.3f}, {shifts.real.max():.3f}]")
        found = True
    if (out / "gains.npz").is_file():
        fb = load_gains(out / "gains.npz")
        degree = 1 if fb.k2 is None else 2
        print(f"gains: degree {degree}, r={fb.r}, m={fb.m}")
        found = True
    for name in sorted(out.glob("summary_*.json")):
        with open(name) as f:
            summary = json.load(f)
        print(f"{name.name}: t_2% = {summary.get('time_to_2pct')}, "
              f"J = {summary.get('total_cost'):.4f}")
        found = True
    if not found:
        print(f"no artifacts in {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pinball",
        description="Flow-control pipeline for the three-cylinder wake")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("steady", cmd_steady), ("openloop", cmd_openloop),
                     ("reduce", cmd_reduce), ("design", cmd_design),
                     ("closedloop", cmd_closedloop),
                     ("report", cmd_report)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="TOML experiment configuration")
        p.set_defaults(func=fn)
        if name == "reduce":
            p.add_argument("--accept-best", action="store_true",
                           help="keep the best iterate when the shift "
                                "iteration does not converge")
        if name == "design":
            p.add_argument("--self-test", action="store_true",
                           help="check the scalar closed-form gains and "
                                "exit")
        if name == "closedloop":
            p.add_argument("--controller", default="qqr",
                           choices=("linear", "qqr", "none"))
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PinballError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
