import numpy as np
import pytest
import scipy.sparse as sp

from podrom.exceptions import InsufficientData, StepFailure
from podrom.integrator import (
    IntegratorConfig,
    Trajectory,
    dense_eval,
    dense_eval_derivative,
    estimate_period,
    integrate_fom,
    integrate_system,
    load_trajectory,
    save_trajectory,
)
from podrom.mesh_fem import assemble_operators, build_space, build_uniform_mesh, interpolate, l2_norm
from podrom.problems import brusselator_lifted, manufactured_problem


@pytest.fixture(scope="module")
def heat16():
    prob, exact = manufactured_problem("heat")
    space = build_space(build_uniform_mesh(16))
    ops = assemble_operators(space)
    return prob, exact, space, ops


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(step=0.1, newton_tol=-1)
    with pytest.raises(ValueError):
        IntegratorConfig(step=0.1, method="rk4")


def test_heat_spatial_convergence():
    prob, exact = manufactured_problem("heat")
    errs = []
    for n in (8, 16, 32):
        space = build_space(build_uniform_mesh(n))
        ops = assemble_operators(space)
        u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
        traj = integrate_fom(prob, space, ops, (0.0, 0.1), u0,
                             IntegratorConfig(step=1e-3))
        ue = interpolate(space, lambda x, y: exact(0.1, x, y))
        errs.append(l2_norm(traj.states[-1] - ue, ops))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.9)


def test_step_halving_orders(heat16):
    prob, exact, space, ops = heat16
    u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
    T = 0.1
    ref = integrate_fom(prob, space, ops, (0.0, T), u0,
                        IntegratorConfig(step=T / 1600))

    def max_err(traj):
        return max(
            l2_norm(s - dense_eval(ref, t), ops)
            for t, s in zip(traj.times, traj.states)
        )

    for method, min_factor in (("bdf2", 3.7), ("bdf1", 1.9)):
        errs = [
            max_err(integrate_fom(prob, space, ops, (0.0, T), u0,
                                  IntegratorConfig(step=st, method=method)))
            for st in (T / 25, T / 50, T / 100)
        ]
        assert errs[0] / errs[1] >= min_factor
        assert errs[1] / errs[2] >= min_factor


def test_equilibrium_start_has_zero_derivative():
    prob = brusselator_lifted(0.002)
    space = build_space(build_uniform_mesh(8, "brusselator_mixed"))
    ops = assemble_operators(space)
    z = np.zeros(2 * ops.n_free)
    traj = integrate_fom(prob, space, ops, (0.0, 0.01), z, IntegratorConfig(step=1e-3))
    assert l2_norm(traj.derivatives[0], ops) <= 1e-12
    assert np.max(np.abs(traj.states[-1])) <= 1e-12


def test_bdf2_exact_on_linear_in_time(heat16):
    _, _, space, ops = heat16

    class Lin:
        mass = ops.mass
        b = np.linspace(-1.0, 1.0, ops.n_free)

        def rhs(self, t, y):
            return self.mass @ self.b

        def jac(self, t, y):
            return sp.csr_matrix(self.mass.shape)

    times, states, derivs = integrate_system(
        Lin(), (0.0, 1.0), np.zeros(ops.n_free), IntegratorConfig(step=0.125)
    )
    for t, s in zip(times, states):
        assert np.max(np.abs(s - t * Lin.b)) < 1e-13


def test_derivative_consistency(heat16):
    prob, exact, space, ops = heat16
    from podrom.integrator import FomSystem

    u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
    cfg = IntegratorConfig(step=2e-3)
    traj = integrate_fom(prob, space, ops, (0.0, 0.02), u0, cfg)
    system = FomSystem(prob, space, ops)
    for i in range(0, traj.times.size, 3):
        res = ops.mass @ traj.derivatives[i] - system.rhs(traj.times[i], traj.states[i])
        assert np.linalg.norm(res) <= cfg.newton_tol * max(
            1.0, np.linalg.norm(system.rhs(traj.times[i], traj.states[i]))
        )


def test_dense_eval_node_passthrough_and_cubic_reproduction():
    times = np.linspace(0.0, 1.0, 6)
    coeff = np.array([0.3, -1.2, 0.7, 2.0])

    def poly(t):
        return np.array([coeff @ [1, t, t * t, t ** 3]])

    def dpoly(t):
        return np.array([coeff @ [0, 1, 2 * t, 3 * t * t]])

    traj = Trajectory(
        times=times,
        states=np.vstack([poly(t) for t in times]),
        derivatives=np.vstack([dpoly(t) for t in times]),
        n_components=1,
    )
    for i, t in enumerate(times):
        assert dense_eval(traj, t)[0] == traj.states[i][0]  # bitwise at nodes
    for t in np.linspace(0.05, 0.95, 17):
        assert abs(dense_eval(traj, t)[0] - poly(t)[0]) < 1e-13
        assert abs(dense_eval_derivative(traj, t)[0] - dpoly(t)[0]) < 1e-12


def test_dense_eval_out_of_range(heat16):
    prob, exact, space, ops = heat16
    u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
    traj = integrate_fom(prob, space, ops, (0.0, 0.01), u0, IntegratorConfig(step=1e-3))
    with pytest.raises(ValueError):
        dense_eval(traj, -0.1)
    with pytest.raises(ValueError):
        dense_eval(traj, 0.02)


def test_dense_eval_accuracy_between_nodes(heat16):
    prob, exact, space, ops = heat16
    u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
    traj = integrate_fom(prob, space, ops, (0.0, 0.05), u0, IntegratorConfig(step=1e-3))

    def err_at(t):
        ue = interpolate(space, lambda x, y: exact(t, x, y))
        return l2_norm(dense_eval(traj, t) - ue, ops)

    on_node = max(err_at(t) for t in traj.times[::5])
    off_node = max(err_at(t) for t in np.linspace(0.0005, 0.0495, 40))
    assert off_node <= 2.0 * on_node


def test_estimate_period_sinusoid():
    times = np.linspace(0.0, 7 * np.pi, 2000)
    w = np.array([1.0, 0.5])
    traj = Trajectory(
        times=times,
        states=np.outer(np.sin(times - 0.5), w),
        derivatives=np.outer(np.cos(times - 0.5), w),
        n_components=1,
    )
    est = estimate_period(traj, 0)
    assert len(est.crossings) >= 3
    assert abs(est.period - 2 * np.pi) < 1e-6
    assert est.spread < 1e-6


def test_estimate_period_constant_raises():
    times = np.linspace(0.0, 1.0, 50)
    traj = Trajectory(
        times=times,
        states=np.ones((50, 3)),
        derivatives=np.zeros((50, 3)),
        n_components=1,
    )
    with pytest.raises(InsufficientData):
        estimate_period(traj, 1)


def test_newton_failure_carries_time_and_residual(heat16):
    _, _, space, ops = heat16

    class Bad:
        mass = ops.mass

        def rhs(self, t, y):
            return np.sqrt(np.abs(y) + 1e-30) * 1e6 + 1.0  # non-smooth, wild

        def jac(self, t, y):
            return sp.csr_matrix(self.mass.shape)

    with pytest.raises(StepFailure) as info:
        integrate_system(Bad(), (0.0, 1.0), np.zeros(ops.n_free),
                         IntegratorConfig(step=0.5, newton_max_iter=4))
    assert info.value.time > 0
    assert info.value.residual > 0


def test_checkpoint_roundtrip(tmp_path, heat16):
    prob, exact, space, ops = heat16
    u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
    traj = integrate_fom(prob, space, ops, (0.0, 0.01), u0, IntegratorConfig(step=1e-3))
    path = tmp_path / "traj.npz"
    save_trajectory(traj, path)
    back = load_trajectory(path)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.derivatives, traj.derivatives)
    assert back.n_components == 1
    assert back.meta["problem"] == "heat"


def test_max_norm_warning():
    space = build_space(build_uniform_mesh(4))
    ops = assemble_operators(space)

    class Grow:
        mass = ops.mass

        def rhs(self, t, y):
            return ops.mass @ (y + 1.0)

        def jac(self, t, y):
            return ops.mass.tocsr()

    with pytest.warns(RuntimeWarning, match="max-norm"):
        integrate_system(Grow(), (0.0, 12.0), np.ones(ops.n_free),
                         IntegratorConfig(step=0.1, max_norm_warn=10.0))
