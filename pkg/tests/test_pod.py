import numpy as np
import pytest
import scipy.linalg as sla

from podrom.exceptions import EmptyBasis
from podrom.integrator import IntegratorConfig, integrate_fom
from podrom.mesh_fem import (
    assemble_operators,
    build_space,
    build_uniform_mesh,
    h1_seminorm,
    interpolate,
)
from podrom.pod import (
    compute_pod_basis,
    correlation_matrix,
    pod_from_snapshots,
    project,
    select_r,
)
from podrom.problems import manufactured_problem
from podrom.snapshots import SnapshotSet, build_snapshots, uniform_grid


@pytest.fixture(scope="module")
def setup8():
    space = build_space(build_uniform_mesh(8))
    return space, assemble_operators(space)


def snapset(vectors, ops, tau=1.0):
    grid = uniform_grid(1.0, max(1, len(vectors) - 1))
    return SnapshotSet(
        vectors=np.asarray(vectors, dtype=float), kind="fd", tau=tau,
        w0_kind="initial", grid=grid, n_components=1,
    )


def random_snapshots(ops, n_vec, seed=0):
    rng = np.random.default_rng(seed)
    return snapset(rng.standard_normal((n_vec, ops.n_free)), ops)


def test_single_snapshot(setup8):
    _, ops = setup8
    y = interpolate(ops.space, lambda x, y: x * (1 - x) * y * (1 - y))
    snaps = snapset([y], ops)
    K = correlation_matrix(snaps, ops)
    s = h1_seminorm(y, ops)
    assert K.entries.shape == (1, 1)
    assert np.isclose(K.entries[0, 0], s ** 2)
    basis = compute_pod_basis(K, snaps, ops)
    assert basis.d_r == 1
    assert np.isclose(basis.lambdas[0], s ** 2)
    assert np.allclose(basis.basis[:, 0] * s, y) or np.allclose(basis.basis[:, 0] * s, -y)


def test_two_orthogonal_snapshots(setup8):
    _, ops = setup8
    y1 = interpolate(ops.space, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    y2 = interpolate(ops.space, lambda x, y: np.sin(2 * np.pi * x) * np.sin(np.pi * y))
    # discrete sine modes on this mesh are A-orthogonal; normalize H1 norms
    y2 = y2 * (h1_seminorm(y1, ops) / h1_seminorm(y2, ops))
    assert abs(y1 @ (ops.stiffness @ y2)) < 1e-12
    s = h1_seminorm(y1, ops)
    K = correlation_matrix(snapset([y1, y2], ops), ops)
    assert np.allclose(K.entries, (s ** 2 / 2) * np.eye(2), atol=1e-12)


def test_correlation_against_dense_oracle(setup8):
    _, ops = setup8
    snaps = random_snapshots(ops, 5, seed=2)
    K = correlation_matrix(snaps, ops)
    dense = ops.stiffness.toarray()
    for i in range(5):
        for j in range(5):
            ref = snaps.vectors[i] @ dense @ snaps.vectors[j] / 5
            assert np.isclose(K.entries[i, j], ref, rtol=1e-12, atol=1e-14)


def test_basis_spans_snapshot_space(setup8):
    _, ops = setup8
    snaps = random_snapshots(ops, 6, seed=3)
    basis = pod_from_snapshots(snaps, ops)
    # modified Gram-Schmidt in the A inner product as the oracle
    A = ops.stiffness.toarray()
    vecs = []
    for y in snaps.vectors:
        v = y.copy()
        for u in vecs:
            v -= (u @ A @ v) * u
        nrm = np.sqrt(v @ A @ v)
        if nrm > 1e-10:
            vecs.append(v / nrm)
    mgs = np.column_stack(vecs)
    R = sla.cholesky(A)
    angles = sla.subspace_angles(R @ basis.basis, R @ mgs)
    assert np.max(np.abs(angles)) < 1e-8


def test_trace_identity(setup8):
    _, ops = setup8
    snaps = random_snapshots(ops, 7, seed=4)
    basis = pod_from_snapshots(snaps, ops)
    trace = correlation_matrix(snaps, ops).trace
    assert abs(np.sum(basis.lambdas) - trace) <= 1e-12 * trace
    mean_sq = np.mean([h1_seminorm(y, ops) ** 2 for y in snaps.vectors])
    assert np.isclose(trace, mean_sq, rtol=1e-12)


def test_orthonormality_and_ordering(setup8):
    _, ops = setup8
    snaps = random_snapshots(ops, 9, seed=5)
    basis = pod_from_snapshots(snaps, ops)
    G = basis.basis.T @ (ops.stiffness @ basis.basis)
    assert np.max(np.abs(G - np.eye(basis.d_r))) <= 1e-10
    assert np.all(np.diff(basis.lambdas) <= 1e-12 * basis.lambdas[0])
    assert np.all(basis.lambdas > 0)


def test_empty_basis(setup8):
    _, ops = setup8
    with pytest.raises(EmptyBasis):
        pod_from_snapshots(snapset(np.zeros((3, ops.n_free)), ops), ops)


def test_project_examples(setup8):
    _, ops = setup8
    snaps = random_snapshots(ops, 5, seed=6)
    basis = pod_from_snapshots(snaps, ops)
    phi1 = basis.basis[:, 0]
    assert np.allclose(project(basis, 1, phi1, ops), phi1, atol=1e-12)

    rng = np.random.default_rng(7)
    w = rng.standard_normal(ops.n_free)
    for r in (1, 2, basis.d_r):
        pw = project(basis, r, w, ops)
        assert np.allclose(project(basis, r, pw, ops), pw, atol=1e-12)
        resid = w - pw
        for k in range(r):
            assert abs(basis.basis[:, k] @ (ops.stiffness @ resid)) < 1e-10
        # non-expansive in the A-norm
        assert h1_seminorm(pw, ops) <= h1_seminorm(w, ops) * (1 + 1e-12)

    with pytest.raises(ValueError):
        project(basis, 0, w, ops)
    with pytest.raises(ValueError):
        project(basis, basis.d_r + 1, w, ops)


def test_tail_identity_randomized():
    prob, exact = manufactured_problem("heat")
    rng = np.random.default_rng(42)
    checked = 0
    for n in (4, 8):
        space = build_space(build_uniform_mesh(n))
        ops = assemble_operators(space)
        u0 = interpolate(space, lambda x, y: exact(0.0, x, y))
        u0 = u0 + 0.2 * rng.standard_normal(u0.size)
        traj = integrate_fom(prob, space, ops, (0.0, 0.05), u0,
                             IntegratorConfig(step=2.5e-3))
        for M in (3, 6, 10):
            for kind in ("fd", "derivative"):
                for w0 in ("initial", "mean"):
                    snaps = build_snapshots(traj, uniform_grid(0.05, M), kind,
                                            float(rng.uniform(0.02, 2.0)), w0)
                    basis = pod_from_snapshots(snaps, ops)
                    total = basis.total
                    for r in range(1, basis.d_r + 1):
                        lhs = np.mean([
                            h1_seminorm(y - project(basis, r, y, ops), ops) ** 2
                            for y in snaps.vectors
                        ])
                        assert abs(lhs - basis.tail(r)) <= 1e-10 * total
                    checked += 1
    assert checked >= 20


def test_select_r():
    assert select_r(np.array([1.0, 0.1, 0.01]), 0.02) == 2
    assert select_r(np.array([1.0, 0.1, 0.01]), 2.0) == 1
    assert select_r(np.array([1.0, 0.1, 0.01]), 1e-9) == 3
    assert select_r(np.array([5.0]), 1e-12) == 1
    with pytest.raises(ValueError):
        select_r(np.array([]), 0.1)
    with pytest.raises(ValueError):
        select_r(np.array([1.0]), 0.0)


def test_eigs_dump(tmp_path, setup8):
    _, ops = setup8
    basis = pod_from_snapshots(random_snapshots(ops, 4, seed=9), ops)
    path = tmp_path / "eigs.csv"
    from podrom.pod import dump_eigs_csv

    dump_eigs_csv(basis, path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "k,lambda,sigma,tail"
    assert len(rows) == basis.d_r + 1
    k, lam, sigma, tail = rows[1].split(",")
    assert np.isclose(float(sigma), np.sqrt(float(lam)))
