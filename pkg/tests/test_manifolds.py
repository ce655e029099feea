import numpy as np
import pytest
from hypothesis import given, strategies as st

from ridable.manifolds import (
    ComplexEuclidean,
    ComplexTorus,
    EuclideanDerivatives,
    Euclidean,
    ManifoldPoint,
    Oblique,
    Sphere,
    TangentVector,
    distance,
    from_complex,
    project_tangent,
    retract,
    riemannian_grad,
    riemannian_hess_vec,
    tangent_basis,
    to_complex,
)
from ridable.problems import eigenvector_problem

KINDS = [Sphere(2), Sphere(3), Sphere(6), Oblique(3, 2), Oblique(2, 4), ComplexTorus(1), ComplexTorus(4),
         Euclidean(3), ComplexEuclidean(2)]
kinds = st.sampled_from(KINDS)
seeds = st.integers(0, 2**32 - 1)


def point(kind, seed):
    # a stream distinct from the per-test ``np.random.default_rng(seed)``
    return ManifoldPoint(kind, kind.random_point(np.random.default_rng([seed, 7])))


def quadratic_derivs(A, x):
    return EuclideanDerivatives(-float(x @ A @ x), -2.0 * A @ x, lambda u: -2.0 * A @ u)


# --------------------------------------------------------------------------- examples


def test_project_removes_radial_component():
    x = ManifoldPoint(Sphere(3), [1.0, 0.0, 0.0])
    assert np.array_equal(project_tangent(x, [1.0, 2.0, 0.0]).coords, [0.0, 2.0, 0.0])
    assert np.array_equal(project_tangent(x, [1.0, 0.0, 0.0]).coords, [0.0, 0.0, 0.0])


def test_project_oblique_per_column():
    kind = Oblique(2, 2)
    x = ManifoldPoint(kind, kind.from_matrix(np.eye(2)))
    out = project_tangent(x, kind.from_matrix(np.eye(2)))
    assert np.array_equal(kind.as_matrix(out.coords), np.zeros((2, 2)))


def test_project_dimension_mismatch():
    x = ManifoldPoint(Sphere(3), [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        project_tangent(x, [1.0, 2.0])


def test_retract_normalizes():
    x = ManifoldPoint(Sphere(3), [1.0, 0.0, 0.0])
    y = retract(x, project_tangent(x, [0.0, 1.0, 0.0]))
    np.testing.assert_allclose(y.coords, np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0), rtol=0, atol=1e-15)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_retract_zero_is_identity(kind):
    x = point(kind, 3)
    assert np.array_equal(retract(x, np.zeros(kind.ambient_dim)).coords, x.coords)


def _exp_map(x, d):
    nd = np.linalg.norm(d)
    return np.cos(nd) * x + np.sin(nd) * d / nd


def test_retract_against_exponential_map():
    # both curves stay on the unit circle; they differ in angle by |d| - atan|d|
    x = ManifoldPoint(Sphere(2), [1.0, 0.0])
    d = np.array([0.0, 0.1])
    gap = np.linalg.norm(retract(x, d).coords - _exp_map(x.coords, d))
    chord = 2.0 * np.sin((0.1 - np.arctan(0.1)) / 2.0)
    assert abs(gap - chord) < 1e-15
    small = np.array([0.0, 0.05])
    assert np.linalg.norm(retract(x, small).coords - _exp_map(x.coords, small)) < 1e-4


@pytest.mark.xfail(strict=True, reason="metric projection differs from the exponential map by "
                                       "|d|^3/3 ~ 3.3e-4 at |d| = 0.1, above the 1e-4 bound")
def test_retract_within_1e4_of_exponential_map_at_step_0_1():
    x = ManifoldPoint(Sphere(2), [1.0, 0.0])
    d = np.array([0.0, 0.1])
    assert np.linalg.norm(retract(x, d).coords - _exp_map(x.coords, d)) < 1e-4


def test_riemannian_grad_at_eigenvector_vanishes():
    A = np.diag([3.0, 1.0])
    x = ManifoldPoint(Sphere(2), [0.0, 1.0])
    eu = quadratic_derivs(A, x.coords)
    np.testing.assert_array_equal(eu.grad, [0.0, -2.0])
    np.testing.assert_array_equal(riemannian_grad(x, eu).coords, [0.0, 0.0])


def test_riemannian_grad_euclidean_is_identity():
    x = ManifoldPoint(Euclidean(2), [0.3, -0.2])
    eu = EuclideanDerivatives(0.0, np.array([1.5, 2.5]), lambda u: u)
    np.testing.assert_array_equal(riemannian_grad(x, eu).coords, [1.5, 2.5])


def test_riemannian_grad_matches_finite_differences():
    A = np.diag([3.0, 2.0, 1.0])
    x = ManifoldPoint(Sphere(3), np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0))
    g = riemannian_grad(x, quadratic_derivs(A, x.coords)).coords
    f = lambda y: -float(y @ A @ y)
    for u in tangent_basis(x).T:
        t = 1e-5
        fd = (f(retract(x, t * u).coords) - f(retract(x, -t * u).coords)) / (2 * t)
        assert abs(fd - g @ u) <= 1e-6 * max(abs(g @ u), np.linalg.norm(g))


@pytest.mark.parametrize("u, expected", [([1.0, 0.0, 0.0], [-2.0, 0.0, 0.0]), ([0.0, 0.0, 1.0], [0.0, 0.0, 2.0])])
def test_riemannian_hessian_at_saddle(u, expected):
    A = np.diag([3.0, 2.0, 1.0])
    x = ManifoldPoint(Sphere(3), [0.0, 1.0, 0.0])
    hu = riemannian_hess_vec(x, quadratic_derivs(A, x.coords), u).coords
    np.testing.assert_allclose(hu, expected, atol=1e-14)
    # second finite difference of f along the retraction curve
    f = lambda y: -float(y @ A @ y)
    t = 1e-4
    u = np.asarray(u)
    d2 = (f(retract(x, t * u).coords) - 2 * f(x.coords) + f(retract(x, -t * u).coords)) / t**2
    assert abs(d2 - hu @ u) < 1e-6


def test_riemannian_hessian_euclidean_is_ambient():
    x = ManifoldPoint(Euclidean(2), [0.3, -0.2])
    M = np.array([[2.0, 1.0], [1.0, -3.0]])
    eu = EuclideanDerivatives(0.0, np.zeros(2), lambda u: M @ u)
    np.testing.assert_array_equal(riemannian_hess_vec(x, eu, [1.0, 2.0]).coords, M @ [1.0, 2.0])


def test_riemannian_hessian_rejects_normal_vector():
    A = np.diag([3.0, 2.0, 1.0])
    x = ManifoldPoint(Sphere(3), [0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="not tangent"):
        riemannian_hess_vec(x, quadratic_derivs(A, x.coords), [0.0, 1.0, 0.0])


def test_tangent_basis_examples():
    x = ManifoldPoint(Sphere(3), [1.0, 0.0, 0.0])
    U = tangent_basis(x)
    np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(U.T @ x.coords, 0.0, atol=1e-15)
    np.testing.assert_array_equal(tangent_basis(ManifoldPoint(Euclidean(3), np.zeros(3))), np.eye(3))
    z = ManifoldPoint(ComplexTorus(1), [1.0, 0.0])
    assert tangent_basis(z).shape == (2, 1)
    np.testing.assert_allclose(np.abs(tangent_basis(z)[:, 0]), [0.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("kind, dim", [(Sphere(5), 4), (Oblique(3, 4), 8), (ComplexTorus(3), 3),
                                       (Euclidean(4), 4), (ComplexEuclidean(2), 4)], ids=str)
def test_tangent_dimension(kind, dim):
    assert tangent_basis(point(kind, 0)).shape == (kind.ambient_dim, dim)
    assert kind.dim == dim


def test_distance_examples():
    x = ManifoldPoint(Sphere(3), [1.0, 0.0, 0.0])
    assert distance(x, x) == 0.0
    assert distance(x, ManifoldPoint(Sphere(3), [-1.0, 0.0, 0.0]), "sign") == 0.0
    assert distance(x, ManifoldPoint(Sphere(3), [-1.0, 0.0, 0.0])) == 2.0
    z = np.array([1 + 2j, -0.5j, 3.0])
    a = ManifoldPoint(ComplexEuclidean(3), from_complex(z))
    b = ManifoldPoint(ComplexEuclidean(3), from_complex(z * np.exp(1j * np.pi / 3)))
    assert distance(a, b, "phase") < 1e-14
    assert distance(a, b) > 1.0


def test_distance_signed_permutation_and_rotation():
    kind = Oblique(3, 3)
    P = np.array([[0, -1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    a = ManifoldPoint(kind, kind.from_matrix(np.eye(3)))
    b = ManifoldPoint(kind, kind.from_matrix(P))
    assert distance(a, b, "signed_permutation") == 0.0
    kind2 = Oblique(2, 4)
    W = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])  # rows w_i
    c = np.cos(0.7), np.sin(0.7)
    Q = np.array([[c[0], -c[1]], [c[1], c[0]]])
    x = ManifoldPoint(kind2, W.reshape(-1))
    y = ManifoldPoint(kind2, (W @ Q).reshape(-1))
    assert distance(x, y, "rotation") < 1e-14


def test_distance_errors():
    with pytest.raises(ValueError, match="kind mismatch"):
        distance(ManifoldPoint(Sphere(2), [1.0, 0.0]), ManifoldPoint(Euclidean(2), [1.0, 0.0]))
    with pytest.raises(ValueError, match="unknown quotient"):
        distance(ManifoldPoint(Sphere(2), [1.0, 0.0]), ManifoldPoint(Sphere(2), [1.0, 0.0]), "mirror")


def test_point_validation():
    with pytest.raises(ValueError, match="not on"):
        ManifoldPoint(Sphere(2), [1.0, 1.0])
    with pytest.raises(ValueError, match="coordinates"):
        ManifoldPoint(Sphere(2), [1.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="non-finite"):
        ManifoldPoint(Euclidean(1), [np.nan])
    with pytest.raises(ValueError, match="not on"):
        ManifoldPoint(ComplexTorus(2), [1.0, 0.0, 0.5, 0.5])
    x = ManifoldPoint(Sphere(2), [0.0, 1.0])
    with pytest.raises(ValueError):
        x.coords[0] = 1.0


def test_complex_round_trip():
    z = np.array([1 + 2j, -3j])
    np.testing.assert_array_equal(from_complex(z), [1.0, 2.0, 0.0, -3.0])
    np.testing.assert_array_equal(to_complex(from_complex(z)), z)


# --------------------------------------------------------------------------- properties


@given(kinds, seeds)
def test_feasibility_tolerances(kind, seed):
    x = point(kind, seed)
    assert kind.constraint_residual(x.coords) <= 1e-12


@given(kinds, seeds)
def test_projection_idempotent_and_self_adjoint(kind, seed):
    rng = np.random.default_rng(seed)
    x = point(kind, seed)
    v, w = rng.standard_normal((2, kind.ambient_dim))
    pv = project_tangent(x, v).coords
    np.testing.assert_allclose(project_tangent(x, pv).coords, pv, rtol=0, atol=1e-12 * max(1, np.abs(v).max()))
    pw = project_tangent(x, w).coords
    assert abs(pv @ w - v @ pw) <= 1e-12 * np.linalg.norm(v) * np.linalg.norm(w)


@given(kinds, seeds, st.floats(0.0, 0.99))
def test_retraction_feasible(kind, seed, scale):
    rng = np.random.default_rng(seed)
    x = point(kind, seed)
    d = project_tangent(x, rng.standard_normal(kind.ambient_dim)).coords
    nd = np.linalg.norm(d)
    d = scale * d / nd if nd > 0 else d
    y = retract(x, d)
    assert kind.constraint_residual(y.coords) <= 1e-12


@given(kinds, seeds)
def test_retraction_first_order(kind, seed):
    rng = np.random.default_rng(seed)
    x = point(kind, seed)
    d = kind.random_tangent(x.coords, rng)
    err = {t: np.linalg.norm(retract(x, t * d).coords - (x.coords + t * d)) for t in (1e-2, 1e-4)}
    # o(t): the error relative to t must shrink with t
    assert err[1e-4] / 1e-4 <= 0.05 * err[1e-2] / 1e-2 + 1e-12


@given(kinds, seeds)
def test_basis_consistency(kind, seed):
    rng = np.random.default_rng(seed)
    x = point(kind, seed)
    U = tangent_basis(x)
    np.testing.assert_allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-12)
    u = project_tangent(x, rng.standard_normal(kind.ambient_dim)).coords
    assert np.linalg.norm(U @ (U.T @ u) - u) < 1e-10


@given(seeds)
def test_hessian_symmetric_on_tangent_space(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 5))
    A = A + A.T
    x = point(Sphere(5), seed)
    eu = quadratic_derivs(A, x.coords)
    u, v = (project_tangent(x, rng.standard_normal(5)).coords for _ in range(2))
    hu = riemannian_hess_vec(x, eu, u).coords
    hv = riemannian_hess_vec(x, eu, v).coords
    assert abs(hu @ v - u @ hv) <= 1e-9 * max(1.0, abs(hu @ v))


@given(seeds)
def test_ambient_hess_vec_linear_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    P = eigenvector_problem(np.diag([3.0, 2.0, 1.0]))
    eu = P.evaluate(Sphere(3).random_point(rng))
    u, v = rng.standard_normal((2, 3))
    assert abs(eu.hess_vec(u) @ v - u @ eu.hess_vec(v)) <= 1e-9 * max(1.0, abs(u @ eu.hess_vec(v)))
    np.testing.assert_allclose(eu.hess_vec(2.0 * u + v), 2.0 * eu.hess_vec(u) + eu.hess_vec(v), atol=1e-12)


def test_tangent_vector_checks_dimension():
    x = ManifoldPoint(Sphere(2), [1.0, 0.0])
    with pytest.raises(ValueError):
        TangentVector(x, [0.0, 1.0, 0.0])
    assert TangentVector(x, [0.0, 2.0]).norm == 2.0
