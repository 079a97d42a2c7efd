"""Built-in problem definitions.

Sign convention (single place of truth): the integrator advances

    u_t = nu * Laplace(u) + R(u) + f(t, x),

so a PDE written as ``u_t - nu*Laplace(u) + g(u) = f`` supplies R = -g.
Reactions evaluate vectorized: ``evaluate(values)`` takes an array of shape
(n_components, n_points) and returns the same shape; ``jacobian(values)``
returns (n_components, n_components, n_points).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mesh_fem import BC_BRUSSELATOR_MIXED, BC_DIRICHLET_ALL, FemSpace, interpolate


@dataclass(frozen=True)
class ReactionSpec:
    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    nu: float
    n_components: int
    reaction: ReactionSpec
    forcing: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None
    initial: Sequence[Callable[[np.ndarray, np.ndarray], np.ndarray]]
    bc_layout: str
    lifting: np.ndarray

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if np.any(self.lifting != 0.0) and self.bc_layout != BC_BRUSSELATOR_MIXED:
            raise ValueError("nonzero lifting requires the mixed boundary layout")


def initial_state(problem: ProblemSpec, space: FemSpace) -> np.ndarray:
    """Stacked free-dof interpolant of the problem's initial data."""
    parts = [interpolate(space, f) for f in problem.initial]
    return np.concatenate(parts)


def _zero_reaction() -> ReactionSpec:
    return ReactionSpec(
        evaluate=lambda u: np.zeros_like(u),
        jacobian=lambda u: np.zeros((u.shape[0], u.shape[0], u.shape[1])),
    )


def brusselator_reaction() -> ReactionSpec:
    """Unshifted Brusselator kinetics R(u, v) = (1 + u^2 v - 4u, 3u - u^2 v)."""

    def evaluate(state):
        u, v = state
        return np.stack([1.0 + u * u * v - 4.0 * u, 3.0 * u - u * u * v])

    def jacobian(state):
        u, v = state
        j = np.empty((2, 2, u.shape[-1]))
        j[0, 0] = 2.0 * u * v - 4.0
        j[0, 1] = u * u
        j[1, 0] = 3.0 - 2.0 * u * v
        j[1, 1] = -u * u
        return j

    return ReactionSpec(evaluate=evaluate, jacobian=jacobian)


def brusselator_lifted(nu: float) -> ProblemSpec:
    """Brusselator system in variables shifted by the boundary values (1, 3).

    The shift turns the inhomogeneous Dirichlet data on Gamma1 into
    homogeneous conditions while leaving the homogeneous Neumann data on
    Gamma2 untouched (constants are harmonic with zero normal derivative).
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    base = brusselator_reaction()

    def evaluate(state):
        shifted = state + np.array([1.0, 3.0])[:, None]
        return base.evaluate(shifted)

    def jacobian(state):
        shifted = state + np.array([1.0, 3.0])[:, None]
        return base.jacobian(shifted)

    # mildly asymmetric bump off the unstable equilibrium; vanishes on the
    # whole boundary so the Gamma1 constraint is respected
    def u0(x, y):
        return 0.1 * np.sin(np.pi * x) * np.sin(np.pi * y) \
            + 0.05 * np.sin(2 * np.pi * x) * np.sin(np.pi * y)

    def v0(x, y):
        return np.zeros_like(np.asarray(x, dtype=float))

    return ProblemSpec(
        name="brusselator",
        nu=nu,
        n_components=2,
        reaction=ReactionSpec(evaluate=evaluate, jacobian=jacobian),
        forcing=None,
        initial=(u0, v0),
        bc_layout=BC_BRUSSELATOR_MIXED,
        lifting=np.array([1.0, 3.0]),
    )


def _sine_mode(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def manufactured_problem(kind: str, nu: float = 1.0):
    """Problems with a known exact solution, for integrator verification.

    Returns ``(ProblemSpec, exact)`` where ``exact(t, x, y)`` evaluates the
    solution.  ``heat`` is the plain heat equation; ``cubic`` adds g(u) = u^3
    with the forcing that keeps the same exact solution; ``modulated`` uses a
    non-separable exact solution (rich in time) with the cubic reaction.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")

    if kind == "heat":
        def exact(t, x, y):
            return np.exp(-2.0 * nu * np.pi ** 2 * t) * _sine_mode(x, y)

        spec = ProblemSpec(
            name="heat",
            nu=nu,
            n_components=1,
            reaction=_zero_reaction(),
            forcing=None,
            initial=(_sine_mode,),
            bc_layout=BC_DIRICHLET_ALL,
            lifting=np.zeros(1),
        )
        return spec, exact

    if kind == "cubic":
        def exact(t, x, y):
            return np.exp(-2.0 * nu * np.pi ** 2 * t) * _sine_mode(x, y)

        def evaluate(state):
            return -state ** 3

        def jacobian(state):
            return (-3.0 * state ** 2)[None, :, :] * np.ones((1, 1, 1))

        # u_t - nu*Lap(u) vanishes on the exact solution, so f = g(u) = u^3
        def forcing(t, x, y):
            return exact(t, x, y) ** 3

        spec = ProblemSpec(
            name="cubic",
            nu=nu,
            n_components=1,
            reaction=ReactionSpec(evaluate=evaluate, jacobian=jacobian),
            forcing=forcing,
            initial=(_sine_mode,),
            bc_layout=BC_DIRICHLET_ALL,
            lifting=np.zeros(1),
        )
        return spec, exact

    if kind == "modulated":
        return _modulated_problem(nu)

    raise ValueError(f"unknown manufactured problem kind {kind!r}")


def _modulated_problem(nu: float, gamma: float = 0.6, omega: float = 2.0 * np.pi):
    """Cubic problem whose exact solution has genuinely high temporal rank.

    u(t, x, y) = sin(pi x) sin(pi y) exp(gamma * x * sin(omega t)); the
    forcing is derived symbolically once and compiled to numpy.
    """
    import sympy as sym

    t, x, y = sym.symbols("t x y")
    u = sym.sin(sym.pi * x) * sym.sin(sym.pi * y) * sym.exp(
        gamma * x * sym.sin(omega * t)
    )
    f = sym.diff(u, t) - nu * (sym.diff(u, x, 2) + sym.diff(u, y, 2)) + u ** 3
    exact_fn = sym.lambdify((t, x, y), u, modules="numpy")
    forcing_fn = sym.lambdify((t, x, y), sym.simplify(f), modules="numpy")

    def evaluate(state):
        return -state ** 3

    def jacobian(state):
        return (-3.0 * state ** 2)[None, :, :] * np.ones((1, 1, 1))

    def initial(xx, yy):
        return exact_fn(0.0, xx, yy)

    spec = ProblemSpec(
        name="modulated",
        nu=nu,
        n_components=1,
        reaction=ReactionSpec(evaluate=evaluate, jacobian=jacobian),
        forcing=lambda tt, xx, yy: forcing_fn(tt, xx, yy),
        initial=(initial,),
        bc_layout=BC_DIRICHLET_ALL,
        lifting=np.zeros(1),
    )

    def exact(tt, xx, yy):
        return exact_fn(tt, xx, yy)

    return spec, exact


PROBLEM_BUILDERS = {
    "heat": lambda nu: manufactured_problem("heat", nu)[0],
    "cubic": lambda nu: manufactured_problem("cubic", nu)[0],
    "modulated": lambda nu: manufactured_problem("modulated", nu)[0],
    "brusselator": brusselator_lifted,
}
