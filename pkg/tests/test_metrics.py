import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elastipath.errors import DegenerateGradientError
from elastipath.grid import (
    GridSpec2,
    GridSpec3,
    LiftedPoint,
    LiftedVector,
    orientation_vector,
)
from elastipath.metrics import (
    AnisotropicMetric2D,
    DataDrivenElasticaMetric,
    ElasticaParams,
    FinslerElasticaMetric,
    IsotropicMetric2D,
    OrientationLiftedIsotropicMetric,
    anisotropy_ratio,
    ball_quadratic_coefficients,
    dual_norm,
    eval_elastica,
    eval_elastica_limit,
    optimal_direction,
    quadratic_characterization,
    randers_decomposition,
    unit_ball_membership,
)

from oracles import brute_force_dual

GRID = GridSpec3(GridSpec2(16, 16), 36)


def pt(theta=0.0, x=1.0, y=1.0):
    return LiftedPoint(x, y, theta)


def vec(ux, uy, nu):
    return LiftedVector((ux, uy), nu)


finite_floats = st.floats(-10.0, 10.0, allow_nan=False)
angles = st.floats(0.0, 2.0 * math.pi - 1e-9)
lams = st.sampled_from([1.0, 1.5, 2.0, 10.0, 100.0])
alphas = st.sampled_from([0.25, 1.0, 5.0, 100.0])


# ---------------------------------------------------------------------------
# Direct elastica evaluation
# ---------------------------------------------------------------------------

def test_forward_unit_vector_costs_one():
    for lam in (1.0, 2.0, 100.0):
        for alpha in (0.5, 1.0, 400.0):
            for theta in (0.0, 1.2, 4.4):
                v = orientation_vector(theta)
                params = ElasticaParams(lam, alpha)
                assert eval_elastica(params, pt(theta), vec(v[0], v[1], 0.0)) == pytest.approx(1.0)


def test_reverse_unit_vector_costs_2lam_minus_1():
    params = ElasticaParams(2.0, 1.0)
    v = orientation_vector(0.7)
    fwd = eval_elastica(params, pt(0.7), vec(v[0], v[1], 0.0))
    bwd = eval_elastica(params, pt(0.7), vec(-v[0], -v[1], 0.0))
    assert bwd == pytest.approx(3.0)
    assert bwd / fwd == pytest.approx(3.0)


def test_pure_rotation_cost():
    params = ElasticaParams(2.0, 1.0)
    assert eval_elastica(params, pt(0.3), vec(0, 0, 1.5)) == pytest.approx(
        math.sqrt(2 * 1.0 * 2.0) * 1.5
    )


@given(lams, alphas, angles, finite_floats, finite_floats, finite_floats,
       st.floats(0.01, 7.0))
@settings(max_examples=200)
def test_positive_homogeneity(lam, alpha, theta, ux, uy, nu, t):
    params = ElasticaParams(lam, alpha)
    f1 = eval_elastica(params, pt(theta), vec(ux, uy, nu))
    ft = eval_elastica(params, pt(theta), vec(t * ux, t * uy, t * nu))
    assert ft == pytest.approx(t * f1, rel=1e-9, abs=1e-9)


@given(lams, alphas, angles, finite_floats, finite_floats, finite_floats)
@settings(max_examples=200)
def test_positivity_off_zero(lam, alpha, theta, ux, uy, nu):
    if math.hypot(ux, uy) < 1e-9 and abs(nu) < 1e-9:  # avoid fp underflow near 0
        return
    params = ElasticaParams(lam, alpha)
    assert eval_elastica(params, pt(theta), vec(ux, uy, nu)) > 0.0


@given(lams, alphas, angles,
       finite_floats, finite_floats, finite_floats,
       finite_floats, finite_floats, finite_floats)
@settings(max_examples=200)
def test_triangle_inequality(lam, alpha, theta, ax, ay, an, bx, by, bn):
    params = ElasticaParams(lam, alpha)
    p = pt(theta)
    fa = eval_elastica(params, p, vec(ax, ay, an))
    fb = eval_elastica(params, p, vec(bx, by, bn))
    fab = eval_elastica(params, p, vec(ax + bx, ay + by, an + bn))
    assert fab <= fa + fb + 1e-9


def test_asymmetry_witness():
    params = ElasticaParams(10.0, 1.0)
    v = vec(1.0, 0.2, 0.1)
    neg = vec(-1.0, -0.2, -0.1)
    assert eval_elastica(params, pt(0.0), v) != pytest.approx(
        eval_elastica(params, pt(0.0), neg)
    )


# ---------------------------------------------------------------------------
# Limit metric
# ---------------------------------------------------------------------------

def test_limit_metric_aligned_values():
    v = orientation_vector(1.1)
    assert eval_elastica_limit(1.0, pt(1.1), vec(v[0], v[1], 0.0)) == pytest.approx(1.0)
    assert eval_elastica_limit(1.0, pt(1.1), vec(2 * v[0], 2 * v[1], 1.0)) == pytest.approx(2.5)


def test_limit_metric_blocked_directions():
    v = orientation_vector(0.4)
    assert eval_elastica_limit(1.0, pt(0.4), vec(-v[0], -v[1], 0.0)) == math.inf
    assert eval_elastica_limit(1.0, pt(0.4), vec(-v[1], v[0], 0.0)) == math.inf


@given(lams, alphas, angles, st.floats(0.05, 5.0), finite_floats)
@settings(max_examples=200)
def test_penalized_below_limit_on_aligned_vectors(lam, alpha, theta, speed, nu):
    """The penalized norm never exceeds the limit norm (finite samples)."""
    params = ElasticaParams(lam, alpha)
    v = orientation_vector(theta)
    w = vec(speed * v[0], speed * v[1], nu)
    assert eval_elastica(params, pt(theta), w) <= eval_elastica_limit(
        alpha, pt(theta), w
    ) + 1e-9


def test_pointwise_convergence_to_limit():
    alpha = 2.0
    theta = 0.9
    v = orientation_vector(theta)
    w = vec(1.3 * v[0], 1.3 * v[1], 0.7)
    limit = eval_elastica_limit(alpha, pt(theta), w)
    gaps = []
    for lam in (10.0, 100.0, 1000.0, 10000.0):
        val = eval_elastica(ElasticaParams(lam, alpha), pt(theta), w)
        gaps.append(abs(val - limit))
    assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


# ---------------------------------------------------------------------------
# Randers decomposition
# ---------------------------------------------------------------------------

def test_randers_tensor_and_drift():
    form = randers_decomposition(ElasticaParams(100.0, 500.0), theta=0.0)
    assert np.allclose(np.diag(form.M), [1e4, 1e4, 2 * 500.0 * 100.0])
    assert form.omega == pytest.approx([99.0, 0.0, 0.0])
    assert form.smallness() == pytest.approx(0.99 ** 2, abs=1e-12)


def test_randers_lambda_one_is_riemannian():
    form = randers_decomposition(ElasticaParams(1.0, 3.0))
    assert np.allclose(form.omega, 0.0)


@given(lams, alphas, angles, finite_floats, finite_floats, finite_floats)
@settings(max_examples=300)
def test_randers_reconstruction_matches_eval(lam, alpha, theta, ux, uy, nu):
    params = ElasticaParams(lam, alpha)
    form = randers_decomposition(params, theta)
    u = np.array([ux, uy, nu])
    direct = eval_elastica(params, pt(theta), vec(ux, uy, nu))
    assert form.eval(u) == pytest.approx(direct, abs=1e-10 * max(1.0, abs(direct)))


def test_smallness_values():
    for lam in (1.5, 10.0, 100.0, 1000.0):
        form = randers_decomposition(ElasticaParams(lam, 1.0))
        assert form.smallness() == pytest.approx((1 - 1 / lam) ** 2, abs=1e-12)
        assert form.smallness() < 1.0


# ---------------------------------------------------------------------------
# Unit ball quadratic characterization
# ---------------------------------------------------------------------------

def test_boundary_vector_is_member():
    params = ElasticaParams(7.0, 2.0)
    v = orientation_vector(0.5)
    assert unit_ball_membership(params, pt(0.5), vec(v[0], v[1], 0.0))
    res = quadratic_characterization(params, pt(0.5), vec(v[0], v[1], 0.0))
    assert res == pytest.approx(0.0, abs=1e-12)


def test_quadratic_coefficients_limit():
    a, b, c = ball_quadratic_coefficients(1e9)
    assert (a, b, c) == pytest.approx((1.0, 1.0, 1.0), abs=1e-8)
    # at lam -> inf the ball is (u_par - 1/2)^2 + alpha nu^2 <= 1/4;
    # with alpha = 1 that is a disk of radius 1/2
    params = ElasticaParams(1e9, 1.0)
    for ang in np.linspace(0, 2 * math.pi, 17):
        u_par = 0.5 + 0.4999 * math.cos(ang)
        nu = 0.4999 * math.sin(ang)
        assert quadratic_characterization(params, pt(0.0), vec(u_par, 0.0, nu)) < 0
        u_par = 0.5 + 0.62 * math.cos(ang)
        nu = 0.62 * math.sin(ang)
        assert quadratic_characterization(params, pt(0.0), vec(u_par, 0.0, nu)) > 0


@given(lams, alphas, angles, finite_floats, finite_floats, finite_floats)
@settings(max_examples=300)
def test_membership_agrees_with_residual(lam, alpha, theta, ux, uy, nu):
    params = ElasticaParams(lam, alpha)
    f = eval_elastica(params, pt(theta), vec(ux, uy, nu))
    res = quadratic_characterization(params, pt(theta), vec(ux, uy, nu))
    if abs(f - 1.0) < 1e-7:  # boundary: both sides ~0, sign unstable
        return
    assert (f <= 1.0) == (res <= 0.0)


# ---------------------------------------------------------------------------
# Dual norm and optimal direction
# ---------------------------------------------------------------------------

def test_dual_norm_isotropic():
    grid2 = GridSpec2(8, 8)
    m = IsotropicMetric2D(grid2, 2.0)
    g = np.array([3.0, 4.0])
    assert dual_norm(m, (1.0, 1.0), g) == pytest.approx(5.0 / 2.0)
    psi = optimal_direction(m, (1.0, 1.0), g)
    assert psi == pytest.approx(g / (2.0 * 5.0))


def test_dual_norm_riemannian_closed_form():
    grid2 = GridSpec2(8, 8)
    tensors = np.zeros((8, 8, 2, 2))
    tensors[:, :] = np.array([[4.0, 1.0], [1.0, 3.0]])
    m = AnisotropicMetric2D(grid2, tensors)
    g = np.array([1.0, -2.0])
    Minv = np.linalg.inv(np.array([[4.0, 1.0], [1.0, 3.0]]))
    assert dual_norm(m, (2.0, 2.0), g) == pytest.approx(math.sqrt(g @ Minv @ g))
    psi = optimal_direction(m, (2.0, 2.0), g)
    ref = Minv @ g
    assert psi[0] * ref[1] - psi[1] * ref[0] == pytest.approx(0.0, abs=1e-12)


def test_dual_norm_zero_gradient_raises():
    m = FinslerElasticaMetric(ElasticaParams(10.0, 1.0), GRID)
    with pytest.raises(DegenerateGradientError):
        dual_norm(m, pt(0.0), np.zeros(3))


def test_duality_consistency_and_brute_force():
    params = ElasticaParams(3.0, 1.5)
    m = FinslerElasticaMetric(params, GRID)
    rng = np.random.default_rng(3)
    for _ in range(12):
        theta = rng.uniform(0, 2 * math.pi)
        point = pt(theta)
        g = rng.standard_normal(3)
        t = dual_norm(m, point, g)
        psi = optimal_direction(m, point, g)
        assert eval_elastica(params, point, vec(*psi[:2], psi[2])) == pytest.approx(1.0, abs=1e-9)
        assert float(g @ psi) == pytest.approx(t, rel=1e-6)

        brute = brute_force_dual(
            lambda d: eval_elastica(params, point, vec(d[0], d[1], d[2])), g
        )
        assert brute == pytest.approx(t, rel=1e-4)


# ---------------------------------------------------------------------------
# Anisotropy ratio
# ---------------------------------------------------------------------------

def test_anisotropy_ratio_elastica():
    m = FinslerElasticaMetric(ElasticaParams(2.0, 1.0), GRID)
    assert anisotropy_ratio(m, n_dirs=512, node_sample=2) == pytest.approx(3.0, abs=1e-6)


def test_physical_anisotropy_ratio_any_alpha():
    for lam, alpha in ((100.0, 7.0), (100.0, 0.3)):
        m = FinslerElasticaMetric(ElasticaParams(lam, alpha), GRID)
        assert anisotropy_ratio(m, physical_only=True, n_dirs=512, node_sample=2) == pytest.approx(
            2 * lam - 1, rel=1e-9
        )


def test_anisotropy_ratio_isotropic_is_one():
    m = IsotropicMetric2D(GridSpec2(8, 8), 1.7)
    assert anisotropy_ratio(m, n_dirs=256, node_sample=2) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def test_isotropic_baseline_euclidean():
    grid2 = GridSpec2(8, 8)
    m = IsotropicMetric2D.from_potential(grid2, w=1.0, potential=np.zeros((8, 8)))
    assert m.eval((3.0, 3.0), (3.0, 4.0)) == pytest.approx(5.0)


def test_lifted_isotropic_baseline():
    grid = GridSpec3(GridSpec2(8, 8), 36)
    m = OrientationLiftedIsotropicMetric(grid, 1.0, rho=4.0)
    assert m.eval(pt(0.0), vec(0.0, 0.0, 1.0)) == pytest.approx(2.0)


def test_anisotropic_baseline_eigen_directions():
    grid2 = GridSpec2(8, 8)
    tensors = np.zeros((8, 8, 2, 2))
    tensors[:, :] = np.diag([4.0, 1.0])
    m = AnisotropicMetric2D(grid2, tensors)
    assert m.eval((2.0, 2.0), (1.0, 0.0)) == pytest.approx(2.0)
    assert m.eval((2.0, 2.0), (0.0, 1.0)) == pytest.approx(1.0)


def test_data_driven_scaling():
    params = ElasticaParams(10.0, 1.0)
    speed = np.full(GRID.shape, 2.0)
    m = DataDrivenElasticaMetric(params, GRID, speed)
    v = orientation_vector(0.0)
    assert m.eval(pt(0.0, 2.0, 2.0), vec(v[0], v[1], 0.0)) == pytest.approx(0.5)


def test_data_driven_asymmetry():
    params = ElasticaParams(10.0, 1.0)
    speed = np.full(GRID.shape, 1.5)
    m = DataDrivenElasticaMetric(params, GRID, speed)
    w = vec(0.3, -0.8, 0.2)
    neg = vec(-0.3, 0.8, -0.2)
    assert m.eval(pt(1.0), w) != pytest.approx(m.eval(pt(1.0), neg))
