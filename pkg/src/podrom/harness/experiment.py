"""End-to-end experiment orchestration and artifact writing.

An experiment runs the stages full-order model -> snapshot grid -> snapshot
set -> POD basis -> reduced model -> dense error series -> audits, and writes
a per-run directory with the documented CSV artifacts:

* ``eigs.csv``     eigenvalue/singular-value decay and tail sums,
* ``errors.csv``   dense-in-time error series,
* ``summary.csv``  one row (M, r, four maximum errors),
* ``audit.csv``    identity/inequality audit results,
* ``grid.txt``     the snapshot times, one per line,
* ``run.json``     configuration echo plus derived quantities.

For the Brusselator the window length T is the estimated limit-cycle period:
the model is first integrated from its built-in perturbed state, the period
is measured from upward mean-crossings of a centre probe, and the reference
orbit is restarted on the attractor.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..integrator import (
    IntegratorConfig,
    Trajectory,
    dense_eval,
    estimate_period,
    integrate_fom,
    save_trajectory,
)
from ..mesh_fem import (
    assemble_operators,
    build_space,
    build_uniform_mesh,
    dump_matrix_csv,
    dump_mesh_csv,
)
from ..pod import dump_eigs_csv, pod_from_snapshots, select_r
from ..problems import PROBLEM_BUILDERS, initial_state
from ..rom import build_rom, integrate_rom, save_rom_trajectory_csv
from ..snapshots import (
    build_snapshots,
    dump_grid,
    dump_snapshots_csv,
    equidistribute_grid,
    patch_grid,
    uniform_grid,
)
from .audits import audit_max_dif, audit_tail_identity, BoundAuditReport, dump_audit_csv
from .config import ExperimentConfig, parse_segments, parse_t_relative
from .series import dump_errors_csv, error_series, sample_times
from .studies import temporal_floor


@dataclass
class ExperimentSetup:
    problem: object
    space: object
    ops: object
    T: float
    u_start: np.ndarray
    step: float
    period_spread: float | None = None


def _build_discretization(cfg: ExperimentConfig):
    bc = "brusselator_mixed" if cfg.problem == "brusselator" else "dirichlet_all"
    mesh = build_uniform_mesh(cfg.n, bc)
    space = build_space(mesh, cfg.degree)
    ops = assemble_operators(space)
    problem = PROBLEM_BUILDERS[cfg.problem](cfg.nu)
    return problem, space, ops


def _centre_probe(space) -> int:
    coords = space.dof_coords[space.free_idx]
    return int(np.argmin((coords[:, 0] - 0.5) ** 2 + (coords[:, 1] - 0.5) ** 2))


def _quietest_time(traj: Trajectory, ops, t_lo: float, t_hi: float) -> float:
    """Stored node in [t_lo, t_hi] minimizing the derivative energy."""
    _, stiff = ops.stacked(traj.n_components)
    mask = (traj.times >= t_lo) & (traj.times <= t_hi)
    idx = np.flatnonzero(mask)
    energies = np.array([
        traj.derivatives[i] @ (stiff @ traj.derivatives[i]) for i in idx
    ])
    return float(traj.times[idx[np.argmin(energies)]])


def prepare_setup(cfg: ExperimentConfig) -> ExperimentSetup:
    """Resolve the discretization, the window length T and the start state.

    For auto window lengths (Brusselator), the model is spun onto its limit
    cycle, the period is estimated from upward mean-crossings of a centre
    probe, and the window starts at the quietest point of the last period
    (minimum derivative energy), so the fast part of the cycle is interior
    to the snapshot window.
    """
    problem, space, ops = _build_discretization(cfg)
    spread = None
    if cfg.T_span == "auto":
        u0 = initial_state(problem, space)
        spin_cfg = IntegratorConfig(
            step=cfg.spinup_step, method=cfg.method, newton_tol=1e-10
        )
        spin = integrate_fom(problem, space, ops, (0.0, cfg.spinup_time), u0, spin_cfg)
        half = spin.times.size // 2
        late = Trajectory(
            times=spin.times[half:],
            states=spin.states[half:],
            derivatives=spin.derivatives[half:],
            n_components=spin.n_components,
        )
        est = estimate_period(late, _centre_probe(space))
        T = est.period
        spread = est.spread
        t_start = _quietest_time(spin, ops, spin.t1 - T, spin.t1)
        u_start = dense_eval(spin, t_start)
    else:
        T = float(cfg.T_span)
        u_start = initial_state(problem, space)
    step = T / 8192 if cfg.step == "auto" else float(cfg.step)
    return ExperimentSetup(
        problem=problem, space=space, ops=ops, T=T, u_start=u_start,
        step=step, period_spread=spread,
    )


def make_grid(cfg: ExperimentConfig, setup: ExperimentSetup, fom: Trajectory):
    T = setup.T
    if cfg.grid_kind == "uniform":
        return uniform_grid(T, cfg.grid_M, t0=fom.t0)
    if cfg.grid_kind == "equidistributed":
        return equidistribute_grid(fom, setup.ops, cfg.grid_M, span=(fom.t0, fom.t0 + T))
    segments = [
        ((fom.t0 + a * T, fom.t0 + b * T), dt * T)
        for a, b, dt in parse_segments(cfg.grid_segments)
    ]
    return patch_grid(segments)


def _summary_header(cfg: ExperimentConfig, tau: float) -> str:
    return (
        "# combined norm: sqrt(sum of squared component norms)\n"
        f"# kind={cfg.snapshots_kind} tau={tau!r} w0={cfg.snapshots_w0} "
        f"n={cfg.n} degree={cfg.degree}\n"
        "M,r,max_l2_rom,max_l2_proj,max_h1_rom,max_h1_proj\n"
    )


def _summary_row(M, r, series) -> str:
    return (
        f"{M},{r},{series.max_l2_rom!r},{series.max_l2_proj!r},"
        f"{series.max_h1_rom!r},{series.max_h1_proj!r}\n"
    )


class StageFailure(RuntimeError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


def run_experiment(cfg: ExperimentConfig, outdir) -> dict:
    """Run all stages for one configuration; returns the summary record.

    Any stage failure propagates as StageFailure carrying the stage name.
    """
    cfg.validate()
    os.makedirs(outdir, exist_ok=True)
    state = {"stage": "setup"}
    try:
        setup = prepare_setup(cfg)
        return _run_pipeline(cfg, setup, outdir, state)
    except StageFailure:
        raise
    except Exception as exc:
        raise StageFailure(state["stage"], exc) from exc


def _run_pipeline(cfg: ExperimentConfig, setup: ExperimentSetup, outdir, state=None) -> dict:
    state = state if state is not None else {}
    problem, space, ops = setup.problem, setup.space, setup.ops
    T, step = setup.T, setup.step
    horizon = cfg.horizon_periods * T
    icfg = IntegratorConfig(step=step, method=cfg.method, newton_tol=cfg.newton_tol)

    state["stage"] = "fom"
    fom = integrate_fom(problem, space, ops, (0.0, horizon), setup.u_start, icfg)
    state["stage"] = "snapshots"
    grid = make_grid(cfg, setup, fom)
    tau = parse_t_relative(cfg.snapshots_tau, T)
    snaps = build_snapshots(fom, grid, cfg.snapshots_kind, tau, cfg.snapshots_w0)
    state["stage"] = "pod"
    basis = pod_from_snapshots(snaps, ops, rank_tol=cfg.pod_rank_tol)
    r = cfg.rom_r if cfg.rom_r > 0 else select_r(basis.lambdas, cfg.rom_threshold)
    r = min(r, basis.d_r)

    state["stage"] = "rom"
    rom = build_rom(basis, r, ops, problem, setup.u_start, init=cfg.rom_init)
    rtraj = integrate_rom(rom, (0.0, horizon), icfg)
    state["stage"] = "errors"
    times = sample_times(0.0, T, periods=cfg.horizon_periods, density=cfg.sampling_density)
    series = error_series(fom, rtraj, times)

    state["stage"] = "audits"
    report = BoundAuditReport(entries=[])
    report.add(audit_tail_identity(snaps, basis, ops, r))
    report.add(audit_tail_identity(snaps, basis, ops, basis.d_r))
    try:
        fd_report = audit_max_dif(fom, snaps, basis, ops, r)
        report.entries.extend(fd_report.entries)
        report.poincare_constant = fd_report.poincare_constant
    except Exception:
        pass  # mixed boundaries or non-difference sets have no explicit constants

    floor = None
    if cfg.report_floor:
        floor = temporal_floor(
            problem, space, ops, (0.0, min(T, 256 * step)), setup.u_start, icfg,
            times[times <= min(T, 256 * step)][:: max(1, cfg.sampling_density // 64)],
        )

    state["stage"] = "artifacts"
    dump_eigs_csv(basis, os.path.join(outdir, "eigs.csv"))
    dump_errors_csv(series, os.path.join(outdir, "errors.csv"))
    dump_grid(grid, os.path.join(outdir, "grid.txt"))
    dump_audit_csv(report, os.path.join(outdir, "audit.csv"))
    with open(os.path.join(outdir, "summary.csv"), "w") as f:
        f.write(_summary_header(cfg, tau))
        f.write(_summary_row(grid.M, r, series))
    save_trajectory(fom, os.path.join(outdir, "traj.npz"))
    save_rom_trajectory_csv(rtraj, os.path.join(outdir, "rom_traj.csv"))
    if cfg.debug_dumps:
        dump_mesh_csv(space.mesh, os.path.join(outdir, "mesh.csv"))
        dump_matrix_csv(ops.mass, os.path.join(outdir, "mass.csv"))
        dump_matrix_csv(ops.stiffness, os.path.join(outdir, "stiffness.csv"))
        dump_snapshots_csv(snaps, os.path.join(outdir, "snapshots.csv"))

    record = {
        "M": grid.M,
        "r": r,
        "N": snaps.N,
        "d_r": basis.d_r,
        "tau": tau,
        "T": T,
        "step": step,
        "period_spread": setup.period_spread,
        "max_l2_rom": series.max_l2_rom,
        "max_l2_proj": series.max_l2_proj,
        "max_h1_rom": series.max_h1_rom,
        "max_h1_proj": series.max_h1_proj,
        "audits_passed": report.passed,
        "temporal_floor": floor,
        "config": cfg.to_dict(),
    }
    with open(os.path.join(outdir, "run.json"), "w") as f:
        json.dump(record, f, indent=2)
    return record


def run_sweep(cfg: ExperimentConfig, Ms, outdir) -> list[dict]:
    """Run one snapshot-count sweep sharing a single reference orbit."""
    cfg.validate()
    os.makedirs(outdir, exist_ok=True)
    setup = prepare_setup(cfg)
    problem, space, ops = setup.problem, setup.space, setup.ops
    T, step = setup.T, setup.step
    horizon = cfg.horizon_periods * T
    icfg = IntegratorConfig(step=step, method=cfg.method, newton_tol=cfg.newton_tol)
    fom = integrate_fom(problem, space, ops, (0.0, horizon), setup.u_start, icfg)
    times = sample_times(0.0, T, periods=cfg.horizon_periods, density=cfg.sampling_density)
    tau = parse_t_relative(cfg.snapshots_tau, T)

    records = []
    rows = []
    for M in Ms:
        if cfg.grid_kind == "uniform":
            grid = uniform_grid(T, int(M), t0=fom.t0)
        else:
            grid = equidistribute_grid(fom, ops, int(M), span=(fom.t0, fom.t0 + T))
        snaps = build_snapshots(fom, grid, cfg.snapshots_kind, tau, cfg.snapshots_w0)
        basis = pod_from_snapshots(snaps, ops, rank_tol=cfg.pod_rank_tol)
        r = cfg.rom_r if cfg.rom_r > 0 else select_r(basis.lambdas, cfg.rom_threshold)
        r = min(r, basis.d_r)
        rom = build_rom(basis, r, ops, problem, setup.u_start, init=cfg.rom_init)
        rtraj = integrate_rom(rom, (0.0, horizon), icfg)
        series = error_series(fom, rtraj, times)
        dump_eigs_csv(basis, os.path.join(outdir, f"eigs_M{int(M)}.csv"))
        dump_errors_csv(series, os.path.join(outdir, f"errors_M{int(M)}.csv"))
        rows.append(_summary_row(grid.M, r, series))
        records.append({
            "M": grid.M, "r": r, "max_l2_rom": series.max_l2_rom,
            "max_l2_proj": series.max_l2_proj, "max_h1_rom": series.max_h1_rom,
            "max_h1_proj": series.max_h1_proj,
        })
    with open(os.path.join(outdir, "summary.csv"), "w") as f:
        f.write(_summary_header(cfg, tau))
        f.writelines(rows)
    with open(os.path.join(outdir, "run.json"), "w") as f:
        json.dump({"T": T, "step": step, "rows": records, "config": cfg.to_dict()},
                  f, indent=2)
    return records
