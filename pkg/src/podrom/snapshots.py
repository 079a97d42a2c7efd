"""Snapshot time grids and snapshot-set assembly.

Two snapshot families are supported on any grid t_0 < ... < t_M inside a
trajectory's span:

* difference sets (N = M+1): a scaled anchor sqrt(N) w0 followed by the first
  order divided differences tau * (u(t_{j-1}) - u(t_{j-2})) / (t_{j-1} - t_{j-2});
* derivative sets (N = M+2): the same anchor followed by tau * u_t(t_j) at
  every grid time.

The anchor w0 is the state at t_0 or the mean of the states over the grid.
On nonuniform grids the divided difference uses the local spacing, which
reduces to the uniform formula when the spacing is constant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDensity
from .integrator import Trajectory, dense_eval, dense_eval_derivative
from .mesh_fem import AssembledOperators

UNIFORM = "uniform"
EQUIDISTRIBUTED = "equidistributed"
PATCHED = "patched"

KIND_FD = "fd"
KIND_DERIVATIVE = "derivative"

W0_INITIAL = "initial"
W0_MEAN = "mean"


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray
    kind: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")

    @property
    def M(self) -> int:
        return self.points.size - 1

    @property
    def T(self) -> float:
        return float(self.points[-1] - self.points[0])


@dataclass(frozen=True)
class SnapshotSet:
    vectors: np.ndarray        # (N, n_dof) rows y^1 .. y^N
    kind: str
    tau: float
    w0_kind: str
    grid: TimeGrid
    n_components: int

    @property
    def N(self) -> int:
        return self.vectors.shape[0]


def uniform_grid(T: float, M: int, t0: float = 0.0) -> TimeGrid:
    """M equal intervals spanning [t0, t0 + T]."""
    if T <= 0:
        raise ValueError("T must be positive")
    if M < 1:
        raise ValueError("M must be a positive integer")
    return TimeGrid(points=t0 + (T / M) * np.arange(M + 1), kind=UNIFORM)


def patch_grid(segments) -> TimeGrid:
    """Union of uniform grids on segments that tile an interval.

    ``segments`` is a sequence of ((a, b), dt) entries; consecutive segments
    must share endpoints and each length must be an integer multiple of its
    local dt.  Seam duplicates are removed.
    """
    segs = sorted(segments, key=lambda s: s[0][0])
    if not segs:
        raise ValueError("need at least one segment")
    pts = []
    prev_end = None
    for (a, b), dt in segs:
        if b <= a or dt <= 0:
            raise ValueError(f"bad segment ({a}, {b}) with dt={dt}")
        if prev_end is not None and not np.isclose(a, prev_end, rtol=0, atol=1e-12 * max(1.0, abs(b))):
            raise ValueError(f"segments do not tile: gap or overlap at {a}")
        m = (b - a) / dt
        m_int = int(round(m))
        if m_int < 1 or abs(m - m_int) > 1e-8 * m_int:
            raise ValueError(
                f"segment ({a}, {b}) length is not an integer multiple of dt={dt}"
            )
        local = a + (b - a) * np.arange(m_int + 1) / m_int
        pts.append(local if prev_end is None else local[1:])
        prev_end = b
    points = np.concatenate(pts)
    return TimeGrid(points=points, kind=PATCHED)


def equidistribute_grid(
    traj: Trajectory,
    ops: AssembledOperators,
    M: int,
    span=None,
    oversample: int = 16,
) -> TimeGrid:
    """Grid whose intervals carry equal integrals of |grad u_t|_0^2.

    The density is sampled on a grid at least ``oversample`` times finer than
    M, accumulated with the trapezoid rule, and inverted by linear
    interpolation of the cumulative integral.
    """
    if M < 1:
        raise ValueError("M must be a positive integer")
    t0, t1 = (traj.t0, traj.t1) if span is None else (float(span[0]), float(span[1]))
    if not (traj.t0 <= t0 < t1 <= traj.t1):
        raise ValueError("span must lie inside the trajectory span")
    if M == 1:
        return TimeGrid(points=np.array([t0, t1]), kind=EQUIDISTRIBUTED)

    k = traj.n_components
    _, stiff = ops.stacked(k)
    n_fine = max(oversample * M, 1024)
    ts = np.linspace(t0, t1, n_fine + 1)
    dens = np.empty(ts.size)
    for i, t in enumerate(ts):
        ut = dense_eval_derivative(traj, t)
        dens[i] = ut @ (stiff @ ut)

    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(ts))])
    total = cdf[-1]
    if total <= 1e-300 or total <= 1e-14 * (t1 - t0) * np.max(dens, initial=0.0):
        warnings.warn(
            "derivative energy is numerically zero; falling back to a uniform grid",
            DegenerateDensity,
        )
        return TimeGrid(points=np.linspace(t0, t1, M + 1), kind=EQUIDISTRIBUTED)

    levels = total * np.arange(1, M) / M
    interior = np.interp(levels, cdf, ts)
    points = np.concatenate([[t0], interior, [t1]])
    return TimeGrid(points=points, kind=EQUIDISTRIBUTED)


def _anchor(traj: Trajectory, grid: TimeGrid, w0_kind: str) -> np.ndarray:
    states = [dense_eval(traj, t) for t in grid.points]
    if w0_kind == W0_INITIAL:
        return states[0]
    if w0_kind == W0_MEAN:
        return np.mean(states, axis=0)
    raise ValueError(f"unknown w0 kind {w0_kind!r}")


def _check_snapshot_args(traj: Trajectory, grid: TimeGrid, tau: float):
    if tau <= 0:
        raise ValueError("tau must be positive")
    if grid.points[0] < traj.t0 or grid.points[-1] > traj.t1:
        raise ValueError("grid extends outside the trajectory span")


def build_fd_snapshots(
    traj: Trajectory, grid: TimeGrid, tau: float, w0_kind: str = W0_INITIAL
) -> SnapshotSet:
    """Divided-difference snapshot set with N = M+1 vectors."""
    _check_snapshot_args(traj, grid, tau)
    M = grid.M
    N = M + 1
    states = [dense_eval(traj, t) for t in grid.points]
    vectors = np.empty((N, states[0].size))
    vectors[0] = np.sqrt(N) * _anchor(traj, grid, w0_kind)
    for j in range(1, N):
        dt_local = grid.points[j] - grid.points[j - 1]
        vectors[j] = tau * (states[j] - states[j - 1]) / dt_local
    return SnapshotSet(
        vectors=vectors,
        kind=KIND_FD,
        tau=float(tau),
        w0_kind=w0_kind,
        grid=grid,
        n_components=traj.n_components,
    )


def build_derivative_snapshots(
    traj: Trajectory, grid: TimeGrid, tau: float, w0_kind: str = W0_INITIAL
) -> SnapshotSet:
    """Time-derivative snapshot set with N = M+2 vectors."""
    _check_snapshot_args(traj, grid, tau)
    M = grid.M
    N = M + 2
    vectors = np.empty((N, traj.states.shape[1]))
    vectors[0] = np.sqrt(N) * _anchor(traj, grid, w0_kind)
    for j, t in enumerate(grid.points):
        vectors[j + 1] = tau * dense_eval_derivative(traj, t)
    return SnapshotSet(
        vectors=vectors,
        kind=KIND_DERIVATIVE,
        tau=float(tau),
        w0_kind=w0_kind,
        grid=grid,
        n_components=traj.n_components,
    )


def build_snapshots(
    traj: Trajectory, grid: TimeGrid, kind: str, tau: float, w0_kind: str = W0_INITIAL
) -> SnapshotSet:
    if kind == KIND_FD:
        return build_fd_snapshots(traj, grid, tau, w0_kind)
    if kind == KIND_DERIVATIVE:
        return build_derivative_snapshots(traj, grid, tau, w0_kind)
    raise ValueError(f"unknown snapshot kind {kind!r}")


def dump_grid(grid: TimeGrid, path) -> None:
    """One time per line."""
    with open(path, "w") as f:
        for t in grid.points:
            f.write(f"{float(t)!r}\n")


def dump_snapshots_csv(snaps: SnapshotSet, path) -> None:
    """Matrix dump, one column per snapshot vector, behind the debug flag."""
    with open(path, "w") as f:
        f.write(",".join(f"y{j + 1}" for j in range(snaps.N)) + "\n")
        for row in snaps.vectors.T:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
