"""Galerkin reduced-order model on the leading POD modes.

The reduced system keeps the full-order treatment of the nonlinearity: the
reduced state is reconstructed at the element quadrature points, the reaction
is evaluated there, and the resulting load is restricted back to the modes.
No hyper-reduction is applied, so the reduced dynamics are exactly the
Galerkin restriction of the full-order right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrator import (
    IntegratorConfig,
    hermite_eval,
    hermite_eval_derivative,
    integrate_system,
)
from .mesh_fem import AssembledOperators
from .pod import PodBasis, project_coefficients
from .problems import ProblemSpec


@dataclass(frozen=True)
class RomModel:
    reduced_mass: np.ndarray
    reduced_stiffness: np.ndarray
    basis: PodBasis
    r: int
    problem: ProblemSpec
    ops: AssembledOperators
    initial_coeffs: np.ndarray

    @property
    def modes(self) -> np.ndarray:
        return self.basis.basis[:, : self.r]


@dataclass(frozen=True)
class RomTrajectory:
    times: np.ndarray
    coeffs: np.ndarray
    dcoeffs: np.ndarray
    rom: RomModel
    meta: dict = field(default_factory=dict)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])


def build_rom(
    basis: PodBasis,
    r: int,
    ops: AssembledOperators,
    problem: ProblemSpec,
    u_h0: np.ndarray,
    init: str = "h1_project",
) -> RomModel:
    """Assemble reduced operators; the initial state is a projection of u_h0.

    ``init`` selects the projection producing the initial coefficients:
    ``h1_project`` (stiffness inner product, the default) or ``l2_project``
    (mass inner product).
    """
    if not 1 <= r <= basis.d_r:
        raise ValueError(f"r must be in [1, {basis.d_r}], got {r}")
    k = problem.n_components
    mass, stiff = ops.stacked(k)
    phi = basis.basis[:, :r]
    if phi.shape[0] != mass.shape[0]:
        raise ValueError("basis dimension does not match the operators")
    reduced_mass = phi.T @ (mass @ phi)
    reduced_mass = 0.5 * (reduced_mass + reduced_mass.T)
    reduced_stiffness = phi.T @ (stiff @ phi)

    u_h0 = np.asarray(u_h0, dtype=float)
    if init == "h1_project":
        alpha0 = project_coefficients(basis, r, u_h0, ops)
    elif init == "l2_project":
        alpha0 = np.linalg.solve(reduced_mass, phi.T @ (mass @ u_h0))
    else:
        raise ValueError(f"unknown init choice {init!r}")

    return RomModel(
        reduced_mass=reduced_mass,
        reduced_stiffness=reduced_stiffness,
        basis=basis,
        r=r,
        problem=problem,
        ops=ops,
        initial_coeffs=alpha0,
    )


class RomSystem:
    """Reduced dynamics  (Phi' M Phi) a' = -nu a + Phi' (R_load + F)."""

    def __init__(self, rom: RomModel):
        self.rom = rom
        self.problem = rom.problem
        self.mass = rom.reduced_mass
        k = self.problem.n_components
        self.k = k
        q = rom.ops.quadrature
        self.weights = q.weights
        self.qx = q.points[:, 0]
        self.qy = q.points[:, 1]
        n_free = rom.ops.n_free
        self.nq = q.weights.size
        # per-component maps from coefficients to quadrature-point values,
        # stacked so one gemv covers all components
        self.qmaps = [
            np.ascontiguousarray(q.basis_free @ rom.modes[c * n_free:(c + 1) * n_free, :])
            for c in range(k)
        ]
        self.qall = np.vstack(self.qmaps)
        self.wall = np.tile(self.weights, k)
        self.nu_stiff = self.problem.nu * rom.reduced_stiffness

    def _quad_values(self, alpha: np.ndarray) -> np.ndarray:
        return (self.qall @ alpha).reshape(self.k, self.nq)

    def rhs(self, t: float, alpha: np.ndarray) -> np.ndarray:
        vals = self._quad_values(alpha)
        reac = self.problem.reaction.evaluate(vals)
        if self.problem.forcing is not None:
            f = np.atleast_2d(np.asarray(self.problem.forcing(t, self.qx, self.qy)))
            reac = reac + np.broadcast_to(f, (self.k, self.nq))
        return self.qall.T @ (self.wall * reac.ravel()) - self.nu_stiff @ alpha

    def jac(self, t: float, alpha: np.ndarray) -> np.ndarray:
        vals = self._quad_values(alpha)
        jr = self.problem.reaction.jacobian(vals)
        r = alpha.size
        out = -self.problem.nu * self.rom.reduced_stiffness.copy()
        for a in range(self.k):
            for b in range(self.k):
                out += self.qmaps[a].T @ ((self.weights * jr[a, b])[:, None] * self.qmaps[b])
        return out.reshape(r, r)


def integrate_rom(rom: RomModel, t_span, cfg: IntegratorConfig) -> RomTrajectory:
    """Advance the reduced model with the shared implicit BDF engine."""
    system = RomSystem(rom)
    times, coeffs, dcoeffs = integrate_system(
        system, t_span, rom.initial_coeffs, cfg
    )
    return RomTrajectory(
        times=times,
        coeffs=coeffs,
        dcoeffs=dcoeffs,
        rom=rom,
        meta={"step": cfg.step, "method": cfg.method, "newton_tol": cfg.newton_tol},
    )


def reconstruct(rom: RomModel, alpha: np.ndarray) -> np.ndarray:
    """Full-order coefficients of the reduced state Phi alpha."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (rom.r,):
        raise ValueError(f"alpha must have length {rom.r}, got {alpha.shape}")
    return rom.modes @ alpha


def rom_dense_coeffs(rtraj: RomTrajectory, t: float) -> np.ndarray:
    """Reduced coefficients at any time inside the span (cubic Hermite)."""
    return hermite_eval(rtraj.times, rtraj.coeffs, rtraj.dcoeffs, t)


def rom_dense_dcoeffs(rtraj: RomTrajectory, t: float) -> np.ndarray:
    return hermite_eval_derivative(rtraj.times, rtraj.coeffs, rtraj.dcoeffs, t)


def save_rom_trajectory_csv(rtraj: RomTrajectory, path) -> None:
    """Checkpoint with one row per node: t, r coefficients, r derivatives."""
    r = rtraj.rom.r
    with open(path, "w") as f:
        f.write("# reduced trajectory, r=%d\n" % r)
        cols = ["t"] + [f"a{k + 1}" for k in range(r)] + [f"da{k + 1}" for k in range(r)]
        f.write(",".join(cols) + "\n")
        for t, a, da in zip(rtraj.times, rtraj.coeffs, rtraj.dcoeffs):
            f.write(",".join(repr(float(v)) for v in [t, *a, *da]) + "\n")
