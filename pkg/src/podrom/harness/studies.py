"""Convergence-order studies for the snapshot-spacing error.

With the basis rank taken as the full numerical rank, the eigenvalue-tail
contribution is eliminated and the remaining reduced-order error is governed
by the spacing of the snapshot grid.  The study fits the log-log slope of the
max-in-time L2 error against the spacing and reports the integrator's own
temporal-error floor alongside, estimated by re-running the full-order model
with a doubled step and measuring the disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..integrator import IntegratorConfig, Trajectory, dense_eval, integrate_fom
from ..mesh_fem import AssembledOperators, FemSpace, l2_norm
from ..pod import pod_from_snapshots
from ..problems import ProblemSpec, initial_state
from ..rom import build_rom, integrate_rom
from ..snapshots import build_snapshots, uniform_grid
from .series import error_series, sample_times

FULL_RANK = "full_rank"
FIXED_R = "fixed_r"


@dataclass(frozen=True)
class StudyRow:
    M: int
    dt: float
    r: int
    max_l2: float


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: list
    slope: float
    floor: float
    fom_step: float

    def table(self):
        return [(row.dt, row.max_l2) for row in self.rows]


def temporal_floor(
    problem: ProblemSpec,
    space: FemSpace,
    ops: AssembledOperators,
    t_span,
    u0,
    cfg: IntegratorConfig,
    times,
    fine: Trajectory | None = None,
) -> float:
    """Max L2 disagreement against a doubled-step run of the same model."""
    coarse = IntegratorConfig(
        step=2.0 * cfg.step, method=cfg.method,
        newton_tol=cfg.newton_tol, newton_max_iter=cfg.newton_max_iter,
        max_norm_warn=cfg.max_norm_warn,
    )
    if fine is None:
        fine = integrate_fom(problem, space, ops, t_span, u0, cfg)
    other = integrate_fom(problem, space, ops, t_span, u0, coarse)
    return max(
        l2_norm(dense_eval(fine, t) - dense_eval(other, t), ops) for t in times
    )


def spacing_order_study(
    problem: ProblemSpec,
    space: FemSpace,
    ops: AssembledOperators,
    T: float,
    Ms,
    kinds=("fd",),
    r_policy: str = FULL_RANK,
    fixed_r: int | None = None,
    tau: float | None = None,
    w0_kind: str = "initial",
    fom_step: float | None = None,
    rank_tol: float = 1e-12,
    density: int = 512,
) -> dict:
    """Reduced-order error versus snapshot spacing on uniform grids.

    Runs one reference trajectory and one floor estimate, shared by all
    requested snapshot kinds; returns a ConvergenceStudy per kind.
    """
    Ms = sorted(set(int(m) for m in Ms))
    if len(Ms) < 3:
        raise ValueError("a convergence study needs at least 3 grid levels")
    if r_policy not in (FULL_RANK, FIXED_R):
        raise ValueError(f"unknown r policy {r_policy!r}")
    if r_policy == FIXED_R and not fixed_r:
        raise ValueError("fixed_r policy needs a positive fixed_r")

    step = fom_step if fom_step is not None else T / 8192
    cfg = IntegratorConfig(step=step, method="bdf2", newton_tol=1e-12)
    u0 = initial_state(problem, space)
    fom = integrate_fom(problem, space, ops, (0.0, T), u0, cfg)
    tau_val = T if tau is None else tau

    times = sample_times(0.0, T, periods=1.0, density=density)
    floor = temporal_floor(problem, space, ops, (0.0, T), u0, cfg,
                           times[:: max(1, density // 64)], fine=fom)

    out = {}
    for kind in kinds:
        rows = []
        for M in Ms:
            grid = uniform_grid(T, M)
            snaps = build_snapshots(fom, grid, kind, tau_val, w0_kind)
            basis = pod_from_snapshots(snaps, ops, rank_tol=rank_tol)
            r = basis.d_r if r_policy == FULL_RANK else min(fixed_r, basis.d_r)
            rom = build_rom(basis, r, ops, problem, u0)
            rtraj = integrate_rom(rom, (0.0, T), cfg)
            series = error_series(fom, rtraj, times)
            rows.append(StudyRow(M=M, dt=T / M, r=r, max_l2=series.max_l2_rom))

        usable = [row for row in rows if row.max_l2 > 10.0 * floor]
        fit_rows = usable if len(usable) >= 2 else rows
        slope = float(np.polyfit(
            np.log([row.dt for row in fit_rows]),
            np.log([max(row.max_l2, 1e-300) for row in fit_rows]),
            1,
        )[0])
        out[kind] = ConvergenceStudy(rows=rows, slope=slope, floor=floor,
                                     fom_step=step)
    return out


def convergence_study(
    problem: ProblemSpec,
    space: FemSpace,
    ops: AssembledOperators,
    T: float,
    Ms,
    snapshot_kind: str = "fd",
    **kwargs,
) -> ConvergenceStudy:
    """Single-kind wrapper around :func:`spacing_order_study`."""
    return spacing_order_study(
        problem, space, ops, T, Ms, kinds=(snapshot_kind,), **kwargs
    )[snapshot_kind]
