import numpy as np
import pytest

from podrom.exceptions import DegenerateDensity
from podrom.integrator import IntegratorConfig, Trajectory, dense_eval, integrate_fom
from podrom.mesh_fem import assemble_operators, build_space, build_uniform_mesh, interpolate
from podrom.problems import manufactured_problem
from podrom.snapshots import (
    build_derivative_snapshots,
    build_fd_snapshots,
    equidistribute_grid,
    patch_grid,
    uniform_grid,
)


@pytest.fixture(scope="module")
def heat_traj():
    prob, exact = manufactured_problem("heat")
    space = build_space(build_uniform_mesh(8))
    ops = assemble_operators(space)
    u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
    traj = integrate_fom(prob, space, ops, (0.0, 0.08), u0, IntegratorConfig(step=1e-3))
    return traj, ops


def synthetic(times, states, derivs):
    return Trajectory(times=times, states=states, derivatives=derivs, n_components=1)


def test_uniform_grid_values():
    g = uniform_grid(1.0, 4)
    assert np.allclose(g.points, [0, 0.25, 0.5, 0.75, 1.0])
    assert uniform_grid(1.0, 1).points.tolist() == [0.0, 1.0]
    g2 = uniform_grid(7.090636, 128)
    assert np.allclose(np.diff(g2.points), 7.090636 / 128)
    assert g2.M == 128


def test_uniform_grid_validation():
    with pytest.raises(ValueError):
        uniform_grid(0.0, 4)
    with pytest.raises(ValueError):
        uniform_grid(1.0, 0)


def test_patch_grid_counts_match_reported_values():
    T = 7.0906
    inner = [((T / 32, 23 * T / 32), T / 64), ((0.0, T / 32), T / 128),
             ((23 * T / 32, T), T / 128)]
    assert patch_grid(inner).M == 84
    coarser = [((0.0, T / 32), T / 128), ((T / 32, 23 * T / 32), T / 32),
               ((23 * T / 32, T), T / 128)]
    assert patch_grid(coarser).M == 62


def test_patch_grid_single_segment_equals_uniform():
    g = patch_grid([((0.0, 2.0), 0.25)])
    assert np.allclose(g.points, uniform_grid(2.0, 8).points)


def test_patch_grid_rejects_non_tiling():
    with pytest.raises(ValueError):
        patch_grid([((0.0, 0.5), 0.1), ((0.6, 1.0), 0.1)])
    with pytest.raises(ValueError):
        patch_grid([((0.0, 0.5), 0.3)])


def test_patch_grid_random_tilings_count_formula():
    rng = np.random.default_rng(5)
    for _ in range(50):
        k = rng.integers(1, 5)
        bounds = np.sort(rng.uniform(0.1, 1.0, size=k - 1)) if k > 1 else np.array([])
        edges = np.concatenate([[0.0], bounds, [1.0]])
        segs, expected = [], 0
        for a, b in zip(edges[:-1], edges[1:]):
            m = int(rng.integers(1, 9))
            segs.append(((a, b), (b - a) / m))
            expected += m
        assert patch_grid(segs).M == expected


def test_fd_snapshots_constant_trajectory():
    times = np.linspace(0, 1, 11)
    c = np.full((11, 5), 2.5)
    traj = synthetic(times, c, np.zeros_like(c))
    snaps = build_fd_snapshots(traj, uniform_grid(1.0, 4), tau=1.0)
    assert snaps.N == 5
    assert np.allclose(snaps.vectors[0], np.sqrt(5) * 2.5)
    assert np.allclose(snaps.vectors[1:], 0.0)


def test_fd_snapshots_linear_trajectory():
    times = np.linspace(0, 1, 11)
    b = np.arange(1.0, 6.0)
    states = np.outer(times, b)
    traj = synthetic(times, states, np.tile(b, (11, 1)))
    tau = 0.37
    snaps = build_fd_snapshots(traj, uniform_grid(1.0, 5), tau=tau)
    for j in range(1, snaps.N):
        assert np.allclose(snaps.vectors[j], tau * b)


def test_fd_snapshots_match_recomputation(heat_traj):
    traj, ops = heat_traj
    grid = uniform_grid(0.08, 4)
    tau = 0.08
    snaps = build_fd_snapshots(traj, grid, tau=tau)
    states = [dense_eval(traj, t) for t in grid.points]
    assert np.allclose(snaps.vectors[0], np.sqrt(5) * states[0], rtol=0, atol=1e-15)
    for j in range(1, 5):
        dd = tau * (states[j] - states[j - 1]) / (grid.points[j] - grid.points[j - 1])
        assert np.array_equal(snaps.vectors[j], dd)


def test_mean_anchor(heat_traj):
    traj, ops = heat_traj
    grid = uniform_grid(0.08, 4)
    snaps = build_fd_snapshots(traj, grid, tau=1.0, w0_kind="mean")
    mean = np.mean([dense_eval(traj, t) for t in grid.points], axis=0)
    assert np.allclose(snaps.vectors[0], np.sqrt(5) * mean)


def test_derivative_snapshots_counts_and_passthrough(heat_traj):
    traj, ops = heat_traj
    grid = uniform_grid(0.08, 32)
    snaps = build_derivative_snapshots(traj, grid, tau=1.0)
    assert snaps.N == 34
    # grid nodes at integration nodes: stored derivatives pass through
    idx = np.searchsorted(traj.times, grid.points[8])
    assert np.allclose(traj.times[idx], grid.points[8])
    assert np.array_equal(snaps.vectors[9], traj.derivatives[idx])


def test_derivative_snapshots_zero_for_equilibrium():
    times = np.linspace(0, 1, 6)
    states = np.ones((6, 4))
    traj = synthetic(times, states, np.zeros_like(states))
    snaps = build_derivative_snapshots(traj, uniform_grid(1.0, 3), tau=2.0)
    assert np.allclose(snaps.vectors[1:], 0.0)


def test_tau_validation_and_scaling(heat_traj):
    traj, ops = heat_traj
    grid = uniform_grid(0.08, 4)
    with pytest.raises(ValueError):
        build_fd_snapshots(traj, grid, tau=0.0)
    s1 = build_fd_snapshots(traj, grid, tau=1.0)
    s3 = build_fd_snapshots(traj, grid, tau=3.0)
    assert np.array_equal(s1.vectors[0], s3.vectors[0])
    assert np.allclose(3.0 * s1.vectors[1:], s3.vectors[1:])


def test_equidistribute_constant_density(heat_traj):
    _, ops = heat_traj
    # synthetic trajectory with |grad u_t| constant in time
    space = ops.space
    mode = interpolate(space, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    times = np.linspace(0.0, 1.0, 200)
    states = np.outer(times, mode)
    derivs = np.tile(mode, (200, 1))
    traj = synthetic(times, states, derivs)
    grid = equidistribute_grid(traj, ops, 8)
    assert np.max(np.abs(grid.points - np.linspace(0, 1, 9))) < 1e-3


def test_equidistribute_concentrated_density(heat_traj):
    _, ops = heat_traj
    space = ops.space
    mode = interpolate(space, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    times = np.linspace(0.0, 1.0, 400)
    # a(t) ramps sharply in the last quarter; u_t = a'(t) * mode
    aprime = 0.05 + np.where(times > 0.75, 40.0, 0.0)
    a = np.concatenate([[0.0], np.cumsum(0.5 * (aprime[1:] + aprime[:-1]) * np.diff(times))])
    traj = synthetic(times, np.outer(a, mode), np.outer(aprime, mode))
    M = 16
    grid = equidistribute_grid(traj, ops, M)
    interior = grid.points[1:-1]
    assert np.count_nonzero(interior > 0.75) >= (M - 1) / 2

    # brute-force inverse-CDF oracle on the same density
    tf = np.linspace(0, 1, 20001)
    dens = np.interp(tf, times, aprime) ** 2 * (mode @ (ops.stiffness @ mode))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(tf))])
    oracle = np.interp(np.arange(1, M) * cdf[-1] / M, cdf, tf)
    assert np.max(np.abs(interior - oracle)) < 5e-3


def test_equidistribute_degenerate_density():
    times = np.linspace(0.0, 1.0, 50)
    states = np.ones((50, 4))
    traj = synthetic(times, states, np.zeros_like(states))
    space = build_space(build_uniform_mesh(4))
    ops = assemble_operators(space)
    traj = synthetic(times, np.ones((50, ops.n_free)), np.zeros((50, ops.n_free)))
    with pytest.warns(DegenerateDensity):
        grid = equidistribute_grid(traj, ops, 5)
    assert np.allclose(grid.points, np.linspace(0, 1, 6))


def test_equidistribute_m1(heat_traj):
    traj, ops = heat_traj
    grid = equidistribute_grid(traj, ops, 1)
    assert np.allclose(grid.points, [0.0, 0.08])


def test_segment_integrals_equalized(heat_traj):
    traj, ops = heat_traj
    from podrom.integrator import dense_eval_derivative

    M = 6
    grid = equidistribute_grid(traj, ops, M, oversample=32)
    stiff = ops.stiffness
    vals = []
    for a, b in zip(grid.points[:-1], grid.points[1:]):
        ts = np.linspace(a, b, 200)
        d = [dense_eval_derivative(traj, t) for t in ts]
        rho = np.array([u @ (stiff @ u) for u in d])
        vals.append(np.trapezoid(rho, ts))
    vals = np.array(vals)
    assert (vals.max() - vals.min()) / vals.mean() < 0.005
