"""Fixed-step implicit BDF1/BDF2 integration with chord-Newton iterations.

The engine advances systems of the form  M y' = rhs(t, y)  and stores, at
every accepted node, the state and the time derivative recovered by a mass
solve.  Dense output between nodes is cubic Hermite interpolation on the
bracketing interval, so trajectories can be sampled (and differentiated)
anywhere inside their span.

The per-step nonlinear equation is solved by a Newton iteration with a frozen
iteration matrix; the matrix is refactorized only when convergence degrades,
in the spirit of production stiff ODE codes.  The convergence criterion is on
the Euclidean norm of the derivative-form residual  M y' - rhs(t, y).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .exceptions import InsufficientData, StepFailure
from .mesh_fem import AssembledOperators, FemSpace
from .problems import ProblemSpec

BDF1 = "bdf1"
BDF2 = "bdf2"


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step settings; ``newton_tol`` bounds the per-step residual norm
    relative to the magnitude of the discrete inertial term M dy/dt (with an
    absolute floor of newton_tol itself for small-scale problems)."""

    step: float
    method: str = BDF2
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    max_norm_warn: float | None = 1e3

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.method not in (BDF1, BDF2):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class Trajectory:
    """Time-discrete solution with stored states and time derivatives."""

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    n_components: int
    problem: ProblemSpec | None = None
    space: FemSpace | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def split(self, vec: np.ndarray) -> list[np.ndarray]:
        """Views of the per-component blocks of a stacked vector."""
        return np.split(np.asarray(vec), self.n_components)


def _factorize(matrix):
    if sp.issparse(matrix):
        lu = spla.splu(sp.csc_matrix(matrix))
        return lu.solve
    lu, piv = sla.lu_factor(np.asarray(matrix))
    return lambda b: sla.lu_solve((lu, piv), b)


class _ChordNewton:
    """Newton iteration with a frozen iteration matrix W = (c0/h) M - J."""

    def __init__(self, system, cfg: IntegratorConfig):
        self.system = system
        self.cfg = cfg
        self._solve = None
        self._key = None

    def invalidate(self):
        self._solve = None

    def _build(self, t, y, c0_over_h):
        W = c0_over_h * self.system.mass - self.system.jac(t, y)
        self._solve = _factorize(W)
        self._key = c0_over_h

    def solve(self, t, c0_over_h, hist_over_h, y_guess):
        """Solve (c0/h) M y + hist/h*M-part - rhs(t,y) = 0 for y.

        ``hist_over_h`` is the already mass-multiplied history combination
        divided by h.  Returns (y, n_iter, rhs_at_y).  Raises StepFailure if
        the iteration does not reach the tolerance.

        The tolerance is ``newton_tol`` scaled by the magnitude of the
        discrete inertial term (floored at 1), since an absolute residual
        below the round-off floor of that term cannot be reached.
        """
        cfg = self.cfg
        mass = self.system.mass
        if self._solve is None or self._key != c0_over_h:
            self._build(t, y_guess, c0_over_h)

        y = np.array(y_guess, dtype=float)
        # the two inertial pieces cancel to rhs size; their uncancelled
        # magnitude sets the round-off floor of the residual
        scale = c0_over_h * float(np.linalg.norm(mass @ y)) + float(
            np.linalg.norm(hist_over_h)
        )
        tol_abs = cfg.newton_tol
        tol_scaled = cfg.newton_tol * max(1.0, scale)
        norm = np.inf
        total_iters = 0
        for attempt in range(2):
            rhs = self.system.rhs(t, y)
            res = c0_over_h * (mass @ y) + hist_over_h - rhs
            norm = float(np.linalg.norm(res))
            prev = np.inf
            for _ in range(cfg.newton_max_iter):
                if norm <= tol_abs:
                    return y, total_iters, rhs
                if norm <= tol_scaled and norm > 0.5 * prev:
                    return y, total_iters, rhs  # at the round-off floor
                if norm > 0.9 * prev and total_iters >= 3:
                    break  # stagnating under the frozen matrix
                prev = norm
                y = y - self._solve(res)
                total_iters += 1
                rhs = self.system.rhs(t, y)
                res = c0_over_h * (mass @ y) + hist_over_h - rhs
                norm = float(np.linalg.norm(res))
            if norm <= tol_scaled:
                return y, total_iters, rhs
            if attempt == 0:
                self._build(t, y, c0_over_h)  # relinearize and retry once
        raise StepFailure(t, norm)


def integrate_system(system, t_span, y0, cfg: IntegratorConfig):
    """Run the BDF loop; returns (times, states, derivatives).

    ``system`` provides ``mass`` (sparse or dense), ``rhs(t, y)`` and
    ``jac(t, y)``.  The requested step is rounded to divide the span exactly.
    BDF2 starts itself with eight BDF1 substeps of length step/8.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    y0 = np.asarray(y0, dtype=float)
    span = t1 - t0
    n_steps = max(1, int(round(span / cfg.step)))
    h = span / n_steps

    mass_solve = _factorize(system.mass)
    newton = _ChordNewton(system, cfg)

    if cfg.method == BDF1:
        times = t0 + h * np.arange(n_steps + 1)
    else:
        startup = t0 + (h / 8.0) * np.arange(9)
        times = np.concatenate([startup, t0 + h * np.arange(2, n_steps + 1)])
    n_nodes = times.size

    states = np.empty((n_nodes, y0.size))
    derivs = np.empty_like(states)
    states[0] = y0
    derivs[0] = mass_solve(system.rhs(t0, y0))

    warned = False

    def store(i, y, rhs_val=None):
        nonlocal warned
        states[i] = y
        if rhs_val is None:
            rhs_val = system.rhs(times[i], y)
        derivs[i] = mass_solve(rhs_val)
        if (
            cfg.max_norm_warn is not None
            and not warned
            and np.max(np.abs(y)) > cfg.max_norm_warn
        ):
            warnings.warn(
                f"state max-norm exceeded {cfg.max_norm_warn:g} at t={times[i]:.6g}",
                RuntimeWarning,
            )
            warned = True

    def maybe_refresh(iters):
        # slow convergence means the frozen linearization drifted too far
        if iters > 5:
            newton.invalidate()

    if cfg.method == BDF1:
        y = y0
        for i in range(1, n_nodes):
            hist = -(system.mass @ y) / h
            guess = y if i == 1 else 2.0 * states[i - 1] - states[i - 2]
            y, iters, rhs_val = newton.solve(times[i], 1.0 / h, hist, guess)
            store(i, y, rhs_val)
            maybe_refresh(iters)
    else:
        # BDF1 startup across the first main interval
        hs = h / 8.0
        y = y0
        for i in range(1, 9):
            hist = -(system.mass @ y) / hs
            guess = y if i == 1 else 2.0 * states[i - 1] - states[i - 2]
            y, iters, rhs_val = newton.solve(times[i], 1.0 / hs, hist, guess)
            store(i, y, rhs_val)
            maybe_refresh(iters)
        newton.invalidate()  # step size changes for the main phase
        y_prev, y_curr = y0, states[8]
        for i in range(9, n_nodes):
            hist = (system.mass @ (-2.0 * y_curr + 0.5 * y_prev)) / h
            guess = 2.0 * y_curr - y_prev
            y, iters, rhs_val = newton.solve(times[i], 1.5 / h, hist, guess)
            store(i, y, rhs_val)
            maybe_refresh(iters)
            y_prev, y_curr = y_curr, y

    return times, states, derivs


class FomSystem:
    """Semi-discrete Galerkin system  M u' = -nu A u + R_load(u) + F(t)."""

    def __init__(self, problem: ProblemSpec, space: FemSpace, ops: AssembledOperators):
        self.problem = problem
        self.space = space
        self.ops = ops
        k = problem.n_components
        self.k = k
        self.mass, self.stiffness = ops.stacked(k)
        q = ops.quadrature
        self.basis_free = q.basis_free
        self.weights = q.weights
        self.qx = q.points[:, 0]
        self.qy = q.points[:, 1]
        self.n_free = ops.n_free

    def _quad_values(self, y: np.ndarray) -> np.ndarray:
        # one sparse matmul for all components
        cols = y.reshape(self.k, self.n_free).T
        return np.ascontiguousarray((self.basis_free @ cols).T)

    def _load(self, values: np.ndarray) -> np.ndarray:
        weighted = (self.weights[None, :] * values).T
        return (self.basis_free.T @ weighted).T.ravel()

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        out = -self.problem.nu * (self.stiffness @ y)
        vals = self._quad_values(y)
        out += self._load(self.problem.reaction.evaluate(vals))
        if self.problem.forcing is not None:
            f = np.atleast_2d(np.asarray(self.problem.forcing(t, self.qx, self.qy)))
            out += self._load(np.broadcast_to(f, (self.k, self.qx.size)))
        return out

    def jac(self, t: float, y: np.ndarray) -> sp.csr_matrix:
        vals = self._quad_values(y)
        jr = self.problem.reaction.jacobian(vals)
        blocks = []
        for a in range(self.k):
            row = []
            for b in range(self.k):
                scaled = self.basis_free.multiply((self.weights * jr[a, b])[:, None])
                row.append(self.basis_free.T @ scaled)
            blocks.append(row)
        jac_r = sp.bmat(blocks, format="csr") if self.k > 1 else blocks[0][0].tocsr()
        return (-self.problem.nu * self.stiffness + jac_r).tocsr()


def integrate_fom(
    problem: ProblemSpec,
    space: FemSpace,
    ops: AssembledOperators,
    t_span,
    u0: np.ndarray,
    cfg: IntegratorConfig,
) -> Trajectory:
    """Integrate the full-order model from the stacked free-dof state u0."""
    u0 = np.asarray(u0, dtype=float)
    expected = problem.n_components * ops.n_free
    if u0.shape != (expected,):
        raise ValueError(f"u0 must have length {expected}, got {u0.shape}")
    system = FomSystem(problem, space, ops)
    times, states, derivs = integrate_system(system, t_span, u0, cfg)
    return Trajectory(
        times=times,
        states=states,
        derivatives=derivs,
        n_components=problem.n_components,
        problem=problem,
        space=space,
        meta={"step": cfg.step, "method": cfg.method, "newton_tol": cfg.newton_tol},
    )


def _bracket(times: np.ndarray, t: float) -> int | None:
    """Index i with times[i] <= t <= times[i+1]; None when t hits a node."""
    if t < times[0] or t > times[-1]:
        raise ValueError(f"t={t!r} outside trajectory span [{times[0]}, {times[-1]}]")
    j = int(np.searchsorted(times, t))
    if j < times.size and times[j] == t:
        return None if j == 0 else -j  # encode exact hit
    return j - 1


def _hermite_weights(s: float):
    s2, s3 = s * s, s * s * s
    return (
        2 * s3 - 3 * s2 + 1,
        s3 - 2 * s2 + s,
        -2 * s3 + 3 * s2,
        s3 - s2,
    )


def _hermite_dweights(s: float):
    s2 = s * s
    return (
        6 * s2 - 6 * s,
        3 * s2 - 4 * s + 1,
        -6 * s2 + 6 * s,
        3 * s2 - 2 * s,
    )


def hermite_eval(times, values, derivs, t: float):
    """Cubic Hermite evaluation; exact passthrough at stored nodes."""
    idx = _bracket(np.asarray(times), float(t))
    if idx is None:
        return np.array(values[0], copy=True)
    if idx < 0:
        return np.array(values[-idx], copy=True)
    dt = times[idx + 1] - times[idx]
    s = (t - times[idx]) / dt
    h00, h10, h01, h11 = _hermite_weights(s)
    return (
        h00 * values[idx]
        + h10 * dt * derivs[idx]
        + h01 * values[idx + 1]
        + h11 * dt * derivs[idx + 1]
    )


def hermite_eval_derivative(times, values, derivs, t: float):
    """Time derivative of the cubic Hermite interpolant."""
    idx = _bracket(np.asarray(times), float(t))
    if idx is None:
        return np.array(derivs[0], copy=True)
    if idx < 0:
        return np.array(derivs[-idx], copy=True)
    dt = times[idx + 1] - times[idx]
    s = (t - times[idx]) / dt
    g00, g10, g01, g11 = _hermite_dweights(s)
    return (
        (g00 / dt) * values[idx]
        + g10 * derivs[idx]
        + (g01 / dt) * values[idx + 1]
        + g11 * derivs[idx + 1]
    )


def dense_eval(traj: Trajectory, t: float) -> np.ndarray:
    """Trajectory state at any time inside the span."""
    return hermite_eval(traj.times, traj.states, traj.derivatives, t)


def dense_eval_derivative(traj: Trajectory, t: float) -> np.ndarray:
    """Trajectory time derivative at any time inside the span."""
    return hermite_eval_derivative(traj.times, traj.states, traj.derivatives, t)


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    spread: float
    crossings: np.ndarray


def estimate_period(traj: Trajectory, observable) -> PeriodEstimate:
    """Period from refined upward mean-crossings of a linear state probe.

    ``observable`` is either a dof index or a weight vector; the scalar
    series is w . u(t).  Crossing times are refined on the cubic Hermite
    interpolant of the series.
    """
    if np.isscalar(observable):
        w = np.zeros(traj.states.shape[1])
        w[int(observable)] = 1.0
    else:
        w = np.asarray(observable, dtype=float)
        if w.shape != (traj.states.shape[1],):
            raise ValueError("observable weight length does not match state size")

    series = traj.states @ w
    dseries = traj.derivatives @ w
    mean = float(np.mean(series))
    f = series - mean
    if np.max(np.abs(f)) <= 1e-13 * max(1.0, abs(mean)):
        raise InsufficientData("observable is constant; no crossings to measure")

    def shifted(t):
        return float(hermite_eval(traj.times, f, dseries, t))

    crossings = []
    for i in range(traj.times.size - 1):
        if f[i] < 0.0 <= f[i + 1]:
            a, b = traj.times[i], traj.times[i + 1]
            if f[i + 1] == 0.0:
                crossings.append(float(b))
            else:
                crossings.append(float(brentq(shifted, a, b, xtol=1e-14, rtol=1e-15)))
    if len(crossings) < 3:
        raise InsufficientData(
            f"need at least 3 upward crossings, found {len(crossings)}"
        )
    gaps = np.diff(crossings)
    return PeriodEstimate(
        period=float(np.mean(gaps)),
        spread=float(np.max(gaps) - np.min(gaps)),
        crossings=np.asarray(crossings),
    )


def save_trajectory(traj: Trajectory, path) -> None:
    """Binary checkpoint: times/states/derivatives arrays plus a JSON header."""
    meta = dict(traj.meta)
    meta["n_components"] = traj.n_components
    if traj.problem is not None:
        meta["problem"] = traj.problem.name
        meta["nu"] = traj.problem.nu
    if traj.space is not None:
        meta["n_subdiv"] = traj.space.mesh.n_subdiv
        meta["degree"] = traj.space.degree
    np.savez_compressed(
        path,
        times=traj.times,
        states=traj.states,
        derivatives=traj.derivatives,
        meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
    )


def load_trajectory(path) -> Trajectory:
    """Load a checkpoint written by :func:`save_trajectory`."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        return Trajectory(
            times=data["times"],
            states=data["states"],
            derivatives=data["derivatives"],
            n_components=int(meta.pop("n_components")),
            meta=meta,
        )
