"""Command line interface.

Stages communicate through files inside the run directory given by ``--out``:
``traj.npz`` (full-order checkpoint), ``setup.json`` (window length and
step), ``grid.txt``, ``snaps.npz``, ``basis.npz``, ``rom_traj.csv``, and the
CSV artifacts ``eigs.csv``, ``errors.csv``, ``summary.csv``, ``audit.csv``.
Run ``podrom <stage> --config file --out dir``; ``experiment`` chains every
stage in one process and ``sweep`` repeats the reduced stages for several
snapshot counts against one shared reference orbit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ..integrator import IntegratorConfig, integrate_fom, load_trajectory, save_trajectory
from ..pod import PodBasis, dump_eigs_csv, pod_from_snapshots, select_r
from ..rom import build_rom, integrate_rom, save_rom_trajectory_csv, RomTrajectory
from ..snapshots import SnapshotSet, TimeGrid, build_snapshots, dump_grid, dump_snapshots_csv
from .audits import BoundAuditReport, audit_max_dif, audit_tail_identity, dump_audit_csv
from .config import ExperimentConfig, load_config, parse_t_relative
from .experiment import (
    _build_discretization,
    make_grid,
    prepare_setup,
    run_experiment,
    run_sweep,
    _summary_header,
    _summary_row,
)
from .series import dump_errors_csv, error_series, sample_times


def _setup_path(out):
    return os.path.join(out, "setup.json")


def _save_snaps(snaps: SnapshotSet, path):
    np.savez_compressed(
        path,
        vectors=snaps.vectors,
        grid_points=snaps.grid.points,
        meta=np.frombuffer(json.dumps({
            "kind": snaps.kind, "tau": snaps.tau, "w0_kind": snaps.w0_kind,
            "grid_kind": snaps.grid.kind, "n_components": snaps.n_components,
        }).encode(), dtype=np.uint8),
    )


def _load_snaps(path) -> SnapshotSet:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        grid = TimeGrid(points=data["grid_points"], kind=meta["grid_kind"])
        return SnapshotSet(
            vectors=data["vectors"], kind=meta["kind"], tau=meta["tau"],
            w0_kind=meta["w0_kind"], grid=grid,
            n_components=meta["n_components"],
        )


def _save_basis(basis: PodBasis, path):
    np.savez_compressed(
        path,
        lambdas=basis.lambdas,
        basis=basis.basis,
        all_eigenvalues=basis.all_eigenvalues,
        scalars=np.array([basis.d_r, basis.N, basis.n_components], dtype=np.int64),
        rank_tol=np.array([basis.rank_tol]),
    )


def _load_basis(path) -> PodBasis:
    with np.load(path) as data:
        d_r, N, ncomp = (int(v) for v in data["scalars"])
        return PodBasis(
            lambdas=data["lambdas"], basis=data["basis"], d_r=d_r, N=N,
            rank_tol=float(data["rank_tol"][0]),
            all_eigenvalues=data["all_eigenvalues"], n_components=ncomp,
        )


def _load_rom_csv(path):
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    r = (len(header) - 1) // 2
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return data[:, 0], data[:, 1:r + 1], data[:, r + 1:], r


def _cmd_fom_run(cfg: ExperimentConfig, out: str, args):
    setup = prepare_setup(cfg)
    icfg = IntegratorConfig(step=setup.step, method=cfg.method, newton_tol=cfg.newton_tol)
    horizon = cfg.horizon_periods * setup.T
    fom = integrate_fom(setup.problem, setup.space, setup.ops, (0.0, horizon),
                        setup.u_start, icfg)
    save_trajectory(fom, os.path.join(out, "traj.npz"))
    with open(_setup_path(out), "w") as f:
        json.dump({"T": setup.T, "step": setup.step,
                   "period_spread": setup.period_spread}, f)
    if cfg.debug_dumps:
        from ..mesh_fem import dump_matrix_csv, dump_mesh_csv
        dump_mesh_csv(setup.space.mesh, os.path.join(out, "mesh.csv"))
        dump_matrix_csv(setup.ops.mass, os.path.join(out, "mass.csv"))
        dump_matrix_csv(setup.ops.stiffness, os.path.join(out, "stiffness.csv"))
    print(f"wrote {out}/traj.npz ({fom.times.size} nodes, T={setup.T:.6g})")


def _restore(cfg: ExperimentConfig, out: str):
    problem, space, ops = _build_discretization(cfg)
    with open(_setup_path(out)) as f:
        setup_meta = json.load(f)
    fom = load_trajectory(os.path.join(out, "traj.npz"))
    return problem, space, ops, setup_meta, fom


def _cmd_snapshots(cfg: ExperimentConfig, out: str, args):
    problem, space, ops, meta, fom = _restore(cfg, out)
    from .experiment import ExperimentSetup
    setup = ExperimentSetup(problem=problem, space=space, ops=ops, T=meta["T"],
                            u_start=fom.states[0], step=meta["step"])
    grid = make_grid(cfg, setup, fom)
    tau = parse_t_relative(cfg.snapshots_tau, meta["T"])
    snaps = build_snapshots(fom, grid, cfg.snapshots_kind, tau, cfg.snapshots_w0)
    dump_grid(grid, os.path.join(out, "grid.txt"))
    _save_snaps(snaps, os.path.join(out, "snaps.npz"))
    if cfg.debug_dumps:
        dump_snapshots_csv(snaps, os.path.join(out, "snapshots.csv"))
    print(f"wrote {out}/snaps.npz (N={snaps.N}, kind={snaps.kind})")


def _cmd_pod(cfg: ExperimentConfig, out: str, args):
    _, _, ops, _, _ = _restore(cfg, out)
    snaps = _load_snaps(os.path.join(out, "snaps.npz"))
    basis = pod_from_snapshots(snaps, ops, rank_tol=cfg.pod_rank_tol)
    _save_basis(basis, os.path.join(out, "basis.npz"))
    dump_eigs_csv(basis, os.path.join(out, "eigs.csv"))
    print(f"wrote {out}/basis.npz (d_r={basis.d_r}) and eigs.csv")


def _chosen_r(cfg: ExperimentConfig, basis: PodBasis) -> int:
    r = cfg.rom_r if cfg.rom_r > 0 else select_r(basis.lambdas, cfg.rom_threshold)
    return min(r, basis.d_r)


def _cmd_rom_run(cfg: ExperimentConfig, out: str, args):
    problem, space, ops, meta, fom = _restore(cfg, out)
    basis = _load_basis(os.path.join(out, "basis.npz"))
    r = _chosen_r(cfg, basis)
    rom = build_rom(basis, r, ops, problem, fom.states[0], init=cfg.rom_init)
    icfg = IntegratorConfig(step=meta["step"], method=cfg.method, newton_tol=cfg.newton_tol)
    rtraj = integrate_rom(rom, (fom.t0, fom.t1), icfg)
    save_rom_trajectory_csv(rtraj, os.path.join(out, "rom_traj.csv"))
    print(f"wrote {out}/rom_traj.csv (r={r})")


def _cmd_errors(cfg: ExperimentConfig, out: str, args):
    problem, space, ops, meta, fom = _restore(cfg, out)
    basis = _load_basis(os.path.join(out, "basis.npz"))
    times, coeffs, dcoeffs, r = _load_rom_csv(os.path.join(out, "rom_traj.csv"))
    rom = build_rom(basis, r, ops, problem, fom.states[0], init=cfg.rom_init)
    rtraj = RomTrajectory(times=times, coeffs=coeffs, dcoeffs=dcoeffs, rom=rom)
    ts = sample_times(fom.t0, meta["T"], periods=cfg.horizon_periods,
                      density=cfg.sampling_density)
    series = error_series(fom, rtraj, ts)
    dump_errors_csv(series, os.path.join(out, "errors.csv"))
    with open(os.path.join(out, "summary.csv"), "w") as f:
        f.write(_summary_header(cfg, parse_t_relative(cfg.snapshots_tau, meta["T"])))
        f.write(_summary_row(len(np.loadtxt(os.path.join(out, "grid.txt"))) - 1, r, series))
    print(f"wrote {out}/errors.csv and summary.csv")


def _cmd_audit_bounds(cfg: ExperimentConfig, out: str, args):
    problem, space, ops, meta, fom = _restore(cfg, out)
    snaps = _load_snaps(os.path.join(out, "snaps.npz"))
    basis = _load_basis(os.path.join(out, "basis.npz"))
    rng = np.random.default_rng(cfg.seed)
    ranks = {1, max(1, basis.d_r // 2), basis.d_r}
    if basis.d_r > 3:
        ranks.update(int(r) for r in rng.integers(1, basis.d_r + 1, size=3))
    report = BoundAuditReport(entries=[])
    for r in sorted(ranks):
        report.add(audit_tail_identity(snaps, basis, ops, r))
        try:
            fd = audit_max_dif(fom, snaps, basis, ops, r)
            report.entries.extend(fd.entries)
            report.poincare_constant = fd.poincare_constant
        except Exception:
            pass  # mixed boundaries or non-difference sets: no explicit constants
    dump_audit_csv(report, os.path.join(out, "audit.csv"))
    status = "all passed" if report.passed else "FAILURES"
    print(f"wrote {out}/audit.csv ({len(report.entries)} entries, {status})")


def _cmd_experiment(cfg: ExperimentConfig, out: str, args):
    record = run_experiment(cfg, out)
    print(json.dumps({k: record[k] for k in
                      ("M", "r", "max_l2_rom", "max_l2_proj",
                       "max_h1_rom", "max_h1_proj")}, indent=2))


def _cmd_sweep(cfg: ExperimentConfig, out: str, args):
    Ms = [int(m) for m in args.M.split(",")] if args.M else \
        [int(m) for m in cfg.extras.get("sweep.M", "32,64,128").split(",")]
    records = run_sweep(cfg, Ms, out)
    for rec in records:
        print(f"M={rec['M']:4d} r={rec['r']:3d} max_l2_rom={rec['max_l2_rom']:.4e}")


_COMMANDS = {
    "fom-run": _cmd_fom_run,
    "snapshots": _cmd_snapshots,
    "pod": _cmd_pod,
    "rom-run": _cmd_rom_run,
    "errors": _cmd_errors,
    "audit-bounds": _cmd_audit_bounds,
    "experiment": _cmd_experiment,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="podrom",
        description="Full-order and POD reduced-order models of semilinear "
                    "reaction-diffusion problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override for randomized suites")
        if name == "sweep":
            p.add_argument("--M", default="", help="comma separated snapshot counts")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    _COMMANDS[args.command](cfg, args.out, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
