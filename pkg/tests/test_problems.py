import numpy as np
import pytest
from hypothesis import given, strategies as st

from zoo import NAMES, small_problem
from ridable import problems as zoo
from ridable.manifolds import ManifoldPoint, from_complex
from ridable.ridability import fd_check
from ridable.solver import check_stationarity, minimize, recover_by_deflation

seeds = st.integers(0, 2**32 - 1)


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


# --------------------------------------------------------------------------- derivative oracle


@pytest.mark.parametrize("name", NAMES)
def test_fd_check_100_points(name):
    p = small_problem(name, seed=0)
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = ManifoldPoint(p.kind, p.kind.random_point(rng))
        rep = fd_check(p, x, 3, rng=rng)
        assert rep.passed, (name, rep.as_dict())


@pytest.mark.parametrize("name", NAMES)
def test_batch_values_match_pointwise(name):
    p = small_problem(name, seed=1)
    rng = np.random.default_rng(3)
    X = np.array([p.kind.random_point(rng) for _ in range(7)])
    np.testing.assert_allclose(p.values(X), [p.value(x) for x in X], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose([p.evaluate(x).value for x in X], [p.value(x) for x in X], rtol=1e-12, atol=1e-14)


# --------------------------------------------------------------------------- eigenvector


def test_eigenvector_examples():
    p = zoo.eigenvector_problem(np.diag([3.0, 2.0, 1.0]))
    s = check_stationarity(p, p.point([1, 0, 0]), 1e-14, 1e-12)
    assert p.value(np.array([1.0, 0, 0])) == -3.0 and s.grad_norm == 0.0
    assert p.optimal_value == -3.0


def test_identity_is_constant_and_critical(rng):
    p = zoo.eigenvector_problem(np.eye(4))
    for _ in range(10):
        x = unit(rng.standard_normal(4))
        assert p.value(x) == pytest.approx(-1.0, abs=1e-15)
        assert check_stationarity(p, p.point(x), 1e-12, 1e-12).first_order
    assert p.solution_set is None


def test_eigenvector_solver_vs_eigensolver(rng):
    for _ in range(5):
        A = zoo.random_symmetric(10, rng)
        p = zoo.eigenvector_problem(A)
        w, V = np.linalg.eigh(A)
        x, tr = minimize(p, p.point(p.kind.random_point(rng)))
        assert abs(tr.final.f + w[-1]) < 1e-8
        assert p.solution_set.distance(p.kind, x.coords) < 1e-6


def test_eigenvector_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        zoo.eigenvector_problem([[1.0, 1e-9], [0.0, 1.0]])
    with pytest.raises(ValueError, match="square"):
        zoo.eigenvector_problem(np.ones((2, 3)))


# --------------------------------------------------------------------------- dictionary


def test_logcosh_examples():
    mu = 0.01
    assert zoo.logcosh(0.0, mu) == 0.0
    t = 20 * mu
    assert abs(zoo.logcosh(t, mu) - (t - mu * np.log(2))) < 1e-8 * mu
    assert np.isfinite(zoo.logcosh(1e6, 1e-6))
    p = zoo.dictionary_problem(np.zeros((3, 5)), mu)
    assert np.abs(p.evaluate(unit([1, 2, 3])).grad).max() == 0.0


def test_dictionary_errors():
    with pytest.raises(ValueError):
        zoo.dictionary_problem(np.ones((3, 4)), 0.0)
    with pytest.raises(ValueError):
        zoo.dictionary_problem(np.ones((3, 0)), 0.1)


def test_dictionary_solver_lands_near_signed_basis():
    p = zoo.planted_dictionary(3, 50000, 0.3, 0.01, seed=0)
    rng = np.random.default_rng(8)
    for _ in range(100):
        x, _ = minimize(p, p.point(p.kind.random_point(rng)))
        assert p.solution_set.distance(p.kind, x.coords) < 0.05


# --------------------------------------------------------------------------- phase retrieval


def test_phase_retrieval_examples(rng):
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    p = zoo.phase_retrieval_problem(x, 60, seed=1)
    eu = p.evaluate(from_complex(x))
    assert eu.value == pytest.approx(0.0, abs=1e-24) and np.abs(eu.grad).max() < 1e-12
    with pytest.raises(ValueError):
        zoo.phase_retrieval_problem(x, 0, seed=1)


@given(seeds, st.floats(0, 2 * np.pi))
def test_phase_retrieval_phase_invariance(seed, theta):
    rng = np.random.default_rng(seed)
    p = zoo.phase_retrieval_problem(rng.standard_normal(3) + 1j * rng.standard_normal(3), 40, seed=2)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    a, b = p.value(from_complex(z)), p.value(from_complex(z * np.exp(1j * theta)))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_phase_retrieval_recovery_sample():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        x /= np.linalg.norm(x)
        p = zoo.phase_retrieval_problem(x, 600, seed=seed)
        z, tr = minimize(p, p.point(p.kind.random_point(rng)))
        hits += tr.final.f < 1e-10 and p.solution_set.distance(p.kind, z.coords) < 1e-5
    assert hits >= 9


# --------------------------------------------------------------------------- tensors


def test_tensor_single_examples():
    p = zoo.tensor_single_problem(np.eye(4))
    assert p.value(np.eye(4)[0]) == -1.0
    u = np.array([1, 1, 0, 0]) / np.sqrt(2)
    assert p.value(u) == pytest.approx(-0.5, abs=1e-15)
    s = check_stationarity(p, p.point(u), 1e-12, 1e-12)
    assert s.first_order and s.lambda_min < 0
    # ambient Hessian diag(-6, -6, 0, 0) shifted by -<u, egrad> = 2 along the tangent (1, -1)/sqrt 2
    assert s.lambda_min == pytest.approx(-4.0, abs=1e-12)
    rep = fd_check(p, p.point(u), 4, rng=np.random.default_rng(0))
    assert rep.passed


def test_tensor_errors():
    with pytest.raises(ValueError, match="orthonormal"):
        zoo.tensor_single_problem(np.ones((3, 3)))
    with pytest.raises(ValueError):
        zoo.tensor_joint_problem(np.eye(3), 4)
    with pytest.raises(ValueError):
        zoo.tensor_joint_problem(np.eye(3), 0)


@given(seeds)
def test_tensor_single_sign_invariance(seed):
    rng = np.random.default_rng(seed)
    p = zoo.tensor_single_problem(zoo.random_orthonormal(5, rng))
    u = unit(rng.standard_normal(5))
    assert abs(p.value(u) - p.value(-u)) <= 1e-12


def test_tensor_joint_examples(rng):
    p = zoo.tensor_joint_problem(np.eye(4), 4)
    assert p.value(np.eye(4).T.reshape(-1)) == 0.0
    q = zoo.tensor_joint_problem(np.eye(4), 2)
    e1 = np.eye(4)[0]
    assert q.value(np.concatenate([e1, e1])) == pytest.approx(2.0)
    X = q.kind.random_point(rng)
    assert q.value(X) >= 0.0


@given(seeds)
def test_tensor_joint_signed_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    n = 4
    p = zoo.tensor_joint_problem(zoo.random_orthonormal(n, rng), n)
    U = p.kind.random_point(rng).reshape(n, n)  # row i is u_i
    P = np.eye(n)[rng.permutation(n)] * rng.choice([-1.0, 1.0], n)[:, None]
    a, b = p.value(U.reshape(-1)), p.value((P @ U).reshape(-1))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_tensor_joint_recovery():
    p = zoo.tensor_joint_problem(np.eye(4), 4)
    rng = np.random.default_rng(5)
    x, tr = minimize(p, p.point(p.kind.random_point(rng)))
    assert tr.final.f < 1e-10
    assert p.solution_set.distance(p.kind, x.coords) < 1e-5


def test_deflation_recovers_all_components():
    rng = np.random.default_rng(0)
    A = zoo.random_orthonormal(10, rng)
    p = zoo.tensor_single_problem(A)
    found, traces = recover_by_deflation(p, rng)
    assert len(found) == 10
    for i in range(10):
        assert min(min(np.linalg.norm(v - A[:, i]), np.linalg.norm(v + A[:, i])) for v in found) < 1e-6


def test_deflate_basis():
    e = np.eye(4)
    B = zoo.deflate([e[0], e[2]], 4)
    assert B.shape == (4, 2)
    np.testing.assert_allclose(B.T @ B, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(B[[0, 2]], 0.0, atol=1e-14)
    assert np.array_equal(zoo.deflate([], 3), np.eye(3))


def test_restriction_keeps_inside_representatives():
    p = zoo.tensor_single_problem(np.eye(4))
    B = zoo.deflate([np.eye(4)[0]], 4)
    r = zoo.restrict_to_subspace(p, B)
    assert r.kind.n == 3 and len(r.solution_set.points) == 3
    assert fd_check(r, r.point(unit([1, 2, 3])), 3, rng=np.random.default_rng(0)).passed
    with pytest.raises(ValueError):
        zoo.restrict_to_subspace(zoo.tensor_joint_problem(np.eye(2), 2), np.eye(4)[:, :2])


# --------------------------------------------------------------------------- synchronization


def test_phase_sync_examples(rng):
    z = zoo.random_unit_complex(6, rng)
    p = zoo.phase_sync_problem(z, zoo.hermitian_noise(6, rng), 0.0)
    assert p.value(from_complex(z)) == pytest.approx(-36.0, abs=1e-12)
    assert p.optimal_value == -36.0
    one = zoo.phase_sync_problem(np.array([1j]), np.zeros((1, 1)), 0.0)
    for t in np.linspace(0, 6, 5):
        assert one.value(from_complex(np.exp(1j * np.array([t])))) == pytest.approx(-1.0, abs=1e-15)


def test_sync_errors(rng):
    with pytest.raises(ValueError, match="Hermitian"):
        zoo.phase_sync_problem(np.ones(2, complex), np.array([[0, 1j], [1j, 0]]), 0.1)
    with pytest.raises(ValueError, match="unit modulus"):
        zoo.phase_sync_problem(np.array([2.0 + 0j]), np.zeros((1, 1)), 0.1)
    with pytest.raises(ValueError, match="symmetric"):
        zoo.z2_sync_problem(np.ones(2), np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)
    with pytest.raises(ValueError):
        zoo.z2_sync_problem(np.array([1.0, 0.5]), np.zeros((2, 2)), 0.1)


def test_hermitian_noise_is_hermitian(rng):
    D = zoo.hermitian_noise(7, rng)
    assert np.array_equal(D, D.conj().T)


@given(seeds, st.floats(0, 2 * np.pi))
def test_phase_sync_phase_invariance(seed, theta):
    rng = np.random.default_rng(seed)
    p = zoo.phase_sync_problem(zoo.random_unit_complex(5, rng), zoo.hermitian_noise(5, rng), 0.3)
    x = zoo.random_unit_complex(5, rng)
    a, b = p.value(from_complex(x)), p.value(from_complex(x * np.exp(1j * theta)))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_sync_correlation(rng):
    z = zoo.random_unit_complex(5, rng)
    assert zoo.sync_correlation(z, from_complex(z * np.exp(0.7j))) == pytest.approx(1.0, abs=1e-15)


def test_z2_examples():
    z = np.array([1.0, -1.0, -1.0, 1.0, 1.0])
    p = zoo.z2_sync_problem(z, np.zeros((5, 5)), 0.0)
    W = np.column_stack([z, np.zeros(5)])
    assert p.value(W.reshape(-1)) == -25.0 and p.optimal_value == -25.0


@given(seeds, st.floats(0, 2 * np.pi))
def test_z2_rotation_invariance(seed, theta):
    rng = np.random.default_rng(seed)
    n = 6
    G = rng.standard_normal((n, n))
    p = zoo.z2_sync_problem(rng.choice([-1.0, 1.0], n), G + G.T, 0.5)
    W = p.kind.random_point(rng).reshape(n, 2)
    Q = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    a, b = p.value(W.reshape(-1)), p.value((W @ Q).reshape(-1))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_round_z2():
    z = np.array([1.0, -1.0, 1.0])
    q = np.array([np.cos(0.4), np.sin(0.4)])
    W = z[:, None] * q[None, :]
    r = zoo.round_z2(W.reshape(-1))
    assert np.array_equal(r, z) or np.array_equal(r, -z)


@given(seeds)
def test_sign_invariance_eigenvector_and_dictionary(seed):
    rng = np.random.default_rng(seed)
    x = unit(rng.standard_normal(3))
    for p in (zoo.eigenvector_problem(zoo.random_symmetric(3, rng)),
              zoo.dictionary_problem(rng.standard_normal((3, 50)), 0.1)):
        assert abs(p.value(x) - p.value(-x)) <= 1e-12 * max(1.0, abs(p.value(x)))


# --------------------------------------------------------------------------- known optima


def test_known_optima_at_solution_sets(rng):
    A = zoo.random_symmetric(5, rng)
    cases = [zoo.eigenvector_problem(A), zoo.tensor_single_problem(zoo.random_orthonormal(5, rng))]
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    cases.append(zoo.phase_retrieval_problem(x, 30, seed=0))
    cases.append(zoo.tensor_joint_problem(zoo.random_orthonormal(4, rng), 4))
    z = zoo.random_unit_complex(5, rng)
    cases.append(zoo.phase_sync_problem(z, zoo.hermitian_noise(5, rng), 0.0))
    cases.append(zoo.z2_sync_problem(rng.choice([-1.0, 1.0], 5), np.zeros((5, 5)), 0.0))
    for p in cases:
        for ref in p.solution_set.points:
            coords = ref.T.reshape(-1) if ref.ndim == 2 else ref
            assert p.value(coords) == pytest.approx(p.optimal_value, abs=1e-10 * max(1, abs(p.optimal_value)))
            assert check_stationarity(p, p.point(coords), 1e-8, 1e-8).second_order


def test_saddle_fixture_derivatives():
    quad, cubic = zoo.fig1_fixtures()
    o = np.zeros(2)
    np.testing.assert_array_equal(np.linalg.eigvalsh(quad.evaluate(o).hess_vec(np.eye(2))), [-2.0, 2.0])
    eu = cubic.evaluate(o)
    assert np.array_equal(eu.grad, [0.0, 0.0]) and np.array_equal(eu.hess_vec(np.eye(2)), np.zeros((2, 2)))
