"""Evaluable metric families on the planar and orientation-lifted domains.

All metrics are asymmetric norms of Randers form

    F(x, u) = sqrt(<u, M(x) u>) - <omega(x), u>,

with M symmetric positive definite and <omega, M^-1 omega> < 1 so the norm
stays positive.  The curvature-penalizing family uses

    M = diag(lam^2, lam^2, 2*alpha*lam),   omega = (lam - 1) * (v_theta, 0),

whose value at (x, theta) against a lifted vector (u, nu) is

    sqrt(lam^2 |u|^2 + 2 alpha lam nu^2) - (lam - 1) <v_theta, u>.

As lam grows this converges to the singular limit norm
|u| + alpha nu^2 / |u| (finite only for u positively aligned with v_theta),
whose path integral over canonically lifted curves is the bending energy
length + alpha * integral(kappa^2).  Data-driven variants divide by a
strictly positive speed field sampled on the lifted grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradientError
from .grid import GridSpec2, GridSpec3, LiftedPoint, LiftedVector, orientation_vector
from .interp import bilinear, trilinear

INF = math.inf


# ---------------------------------------------------------------------------
# Parameter blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElasticaParams:
    """Penalization strength lam >= 1 and curvature weight alpha > 0."""

    lam: float
    alpha: float

    def __post_init__(self):
        if not self.lam >= 1.0:
            raise ValueError("lam must be >= 1")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be > 0")


@dataclass(frozen=True)
class RandersForm:
    """Symmetric part M (SPD) and drift omega with <omega, M^-1 omega> < 1."""

    M: np.ndarray
    omega: np.ndarray

    def smallness(self) -> float:
        return float(self.omega @ np.linalg.solve(self.M, self.omega))

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if not np.allclose(M, M.T):
            raise ValueError("M must be symmetric")
        if np.any(np.linalg.eigvalsh(M) <= 0.0):
            raise ValueError("M must be positive definite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))
        if not self.smallness() < 1.0:
            raise ValueError("drift violates the smallness condition")

    def eval(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(u @ self.M @ u) - self.omega @ u)


def randers_decomposition(params: ElasticaParams, theta: float = 0.0) -> RandersForm:
    """Symmetric/drift split of the curvature-penalized norm at orientation theta."""
    lam, alpha = params.lam, params.alpha
    M = np.diag([lam * lam, lam * lam, 2.0 * alpha * lam])
    v = orientation_vector(theta)
    omega = (lam - 1.0) * np.array([v[0], v[1], 0.0])
    return RandersForm(M, omega)


# ---------------------------------------------------------------------------
# Elastica unit-ball characterization
# ---------------------------------------------------------------------------

def ball_quadratic_coefficients(lam: float) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the squared unit-ball characterization.

    Membership F(u, nu) <= 1 is equivalent to

        (lam/2) u_perp^2 + a (u_par - b/2)^2 + alpha nu^2 <= c/4,

    obtained by moving the drift term across and squaring; all three
    coefficients are 1 + O(1/lam).
    """
    a = (2.0 * lam - 1.0) / (2.0 * lam)
    b = 2.0 * (lam - 1.0) / (2.0 * lam - 1.0)
    c = 2.0 * lam / (2.0 * lam - 1.0)
    return a, b, c


def quadratic_characterization(params: ElasticaParams, point: LiftedPoint, vec: LiftedVector) -> float:
    """Signed residual of the unit-ball quadratic; <= 0 means inside the ball."""
    a, b, c = ball_quadratic_coefficients(params.lam)
    v = orientation_vector(point.theta)
    ux, uy = vec.u
    u_par = ux * v[0] + uy * v[1]
    u_perp = -ux * v[1] + uy * v[0]
    return (
        0.5 * params.lam * u_perp * u_perp
        + a * (u_par - 0.5 * b) ** 2
        + params.alpha * vec.nu * vec.nu
        - 0.25 * c
    )


def unit_ball_membership(params: ElasticaParams, point: LiftedPoint, vec: LiftedVector,
                         tol: float = 1e-12) -> bool:
    """Whether the lifted vector lies in the metric's unit ball at the point."""
    return eval_elastica(params, point, vec) <= 1.0 + tol


# ---------------------------------------------------------------------------
# Direct evaluations
# ---------------------------------------------------------------------------

def eval_elastica(params: ElasticaParams, point: LiftedPoint, vec: LiftedVector) -> float:
    """Curvature-penalized norm at a lifted point against a lifted vector."""
    lam, alpha = params.lam, params.alpha
    ux, uy = vec.u
    nu = vec.nu
    v = orientation_vector(point.theta)
    sym = math.sqrt(lam * lam * (ux * ux + uy * uy) + 2.0 * alpha * lam * nu * nu)
    return sym - (lam - 1.0) * (v[0] * ux + v[1] * uy)


def eval_elastica_limit(alpha: float, point: LiftedPoint, vec: LiftedVector,
                        align_tol: float = 1e-9) -> float:
    """Singular limit norm: |u| + alpha nu^2/|u| if u is positively aligned
    with the point's orientation vector (within ``align_tol`` in angle),
    +inf otherwise.  The zero vector evaluates to 0.
    """
    ux, uy = vec.u
    norm_u = math.hypot(ux, uy)
    if norm_u == 0.0:
        return 0.0 if vec.nu == 0.0 else INF
    v = orientation_vector(point.theta)
    dot = (v[0] * ux + v[1] * uy) / norm_u
    cross = abs(v[0] * uy - v[1] * ux) / norm_u
    if dot <= 0.0 or cross > align_tol:
        return INF
    return norm_u + alpha * vec.nu * vec.nu / norm_u


# ---------------------------------------------------------------------------
# Metric field classes
# ---------------------------------------------------------------------------

class MetricBase:
    """Common surface shared by all metric fields.

    Subclasses provide ``dim`` (2 or 3), ``grid``, ``eval(point, vec)``
    and ``randers_at(point) -> (M, omega)`` in physical units; the solver
    additionally consumes ``solver_model()``.
    """

    dim: int = 3
    kind: str = "base"

    def eval(self, point, vec) -> float:
        raise NotImplementedError

    def randers_at(self, point):
        raise NotImplementedError

    def stencil_hint(self) -> dict:
        """Anisotropy information used by the adaptive stencil builder."""
        return {"family": "axis"}


class FinslerElasticaMetric(MetricBase):
    """Constant-speed curvature-penalized metric on a lifted grid."""

    kind = "finsler_elastica"
    dim = 3

    def __init__(self, params: ElasticaParams, grid: GridSpec3):
        self.params = params
        self.grid = grid

    def eval(self, point: LiftedPoint, vec: LiftedVector) -> float:
        return eval_elastica(self.params, point, vec)

    def randers_at(self, point: LiftedPoint):
        form = randers_decomposition(self.params, point.theta)
        return form.M, form.omega

    def scale_at(self, point: LiftedPoint) -> float:
        return 1.0

    def stencil_hint(self) -> dict:
        return {"family": "fan", "lam": self.params.lam, "alpha": self.params.alpha}

    def solver_model(self) -> dict:
        lam, alpha = self.params.lam, self.params.alpha
        K = self.grid.n_theta
        thetas = np.arange(K) * self.grid.theta_step
        omega0 = np.zeros((K, 3))
        omega0[:, 0] = (lam - 1.0) * np.cos(thetas)
        omega0[:, 1] = (lam - 1.0) * np.sin(thetas)
        return {
            "kind": "template",
            "grid": self.grid,
            "M0": np.array([lam * lam, lam * lam, 2.0 * alpha * lam]),
            "omega0": omega0,
            "scale": None,  # constant 1
        }


class DataDrivenElasticaMetric(FinslerElasticaMetric):
    """Curvature-penalized metric divided by a positive lifted speed field."""

    kind = "data_driven_finsler_elastica"

    def __init__(self, params: ElasticaParams, grid: GridSpec3, speed: np.ndarray):
        super().__init__(params, grid)
        speed = np.asarray(speed, dtype=float)
        if speed.shape != grid.shape:
            raise ValueError(f"speed shape {speed.shape} != grid shape {grid.shape}")
        if not np.all(speed > 0.0):
            raise ValueError("speed must be strictly positive")
        self.speed = speed

    def scale_at(self, point: LiftedPoint) -> float:
        return 1.0 / float(trilinear(self.speed, self.grid, point.x, point.y, point.theta))

    def eval(self, point: LiftedPoint, vec: LiftedVector) -> float:
        return self.scale_at(point) * eval_elastica(self.params, point, vec)

    def randers_at(self, point: LiftedPoint):
        M, omega = super().randers_at(point)
        s = self.scale_at(point)
        return s * s * M, s * omega

    def solver_model(self) -> dict:
        model = super().solver_model()
        model["scale"] = 1.0 / self.speed
        return model


class ElasticaLimitMetric(MetricBase):
    """Singular limit norm; used for tests and limit checks, never solved."""

    kind = "elastica_limit"
    dim = 3

    def __init__(self, alpha: float, grid: GridSpec3 | None = None, align_tol: float = 1e-9):
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        self.alpha = alpha
        self.grid = grid
        self.align_tol = align_tol

    def eval(self, point: LiftedPoint, vec: LiftedVector) -> float:
        return eval_elastica_limit(self.alpha, point, vec, self.align_tol)


class IsotropicMetric2D(MetricBase):
    """Planar metric c(x) |u| with a strictly positive coefficient field."""

    kind = "isotropic"
    dim = 2

    def __init__(self, grid: GridSpec2, coeff):
        self.grid = grid
        arr = np.asarray(coeff, dtype=float)
        if arr.ndim == 0:
            arr = np.full(grid.shape, float(arr))
        if arr.shape != grid.shape:
            raise ValueError(f"coefficient shape {arr.shape} != grid {grid.shape}")
        if not np.all(arr > 0.0):
            raise ValueError("metric coefficient must be strictly positive")
        self.coeff = arr

    @classmethod
    def from_potential(cls, grid: GridSpec2, w: float, potential) -> "IsotropicMetric2D":
        """Classic form (w + P(x)) |u| with w > 0 and P >= 0."""
        return cls(grid, w + np.asarray(potential, dtype=float))

    @classmethod
    def from_saliency(cls, grid: GridSpec2, saliency, beta1: float = 1.0,
                      beta2: float = 20.0, p: float = 2.0) -> "IsotropicMetric2D":
        """Edge-driven form 1 / (beta1 + beta2 * saliency^p)."""
        s = np.asarray(saliency, dtype=float)
        return cls(grid, 1.0 / (beta1 + beta2 * np.power(np.maximum(s, 0.0), p)))

    def coeff_at(self, x: float, y: float) -> float:
        return float(bilinear(self.coeff, self.grid, x, y))

    def eval(self, point, vec) -> float:
        x, y = point[0], point[1]
        u = np.asarray(vec, dtype=float)[:2]
        return self.coeff_at(x, y) * float(np.hypot(u[0], u[1]))

    def randers_at(self, point):
        c = self.coeff_at(point[0], point[1])
        return c * c * np.eye(2), np.zeros(2)

    def solver_model(self) -> dict:
        return {
            "kind": "template",
            "grid": self.grid,
            "M0": np.array([1.0, 1.0]),
            "omega0": np.zeros((1, 2)),
            "scale": self.coeff,
        }


class AnisotropicMetric2D(MetricBase):
    """Planar Riemannian metric sqrt(<u, M(x) u>) with per-node SPD tensors."""

    kind = "anisotropic"
    dim = 2

    def __init__(self, grid: GridSpec2, tensors: np.ndarray):
        tensors = np.asarray(tensors, dtype=float)
        if tensors.shape != (grid.width, grid.height, 2, 2):
            raise ValueError("tensors must have shape (W, H, 2, 2)")
        self.grid = grid
        self.tensors = tensors

    def tensor_at(self, x: float, y: float) -> np.ndarray:
        return bilinear(self.tensors, self.grid, x, y)

    def eval(self, point, vec) -> float:
        M = self.tensor_at(point[0], point[1])
        u = np.asarray(vec, dtype=float)[:2]
        return float(np.sqrt(u @ M @ u))

    def randers_at(self, point):
        return self.tensor_at(point[0], point[1]), np.zeros(2)

    def solver_model(self) -> dict:
        return {"kind": "tensor2d", "grid": self.grid, "tensors": self.tensors}


class OrientationLiftedIsotropicMetric(MetricBase):
    """Lifted metric (1/Phi) sqrt(|u|^2 + rho nu^2) with positive speed Phi."""

    kind = "isotropic_lifted"
    dim = 3

    def __init__(self, grid: GridSpec3, speed, rho: float):
        if not rho > 0:
            raise ValueError("rho must be > 0")
        arr = np.asarray(speed, dtype=float)
        if arr.ndim == 0:
            arr = np.full(grid.shape, float(arr))
        if arr.shape != grid.shape:
            raise ValueError(f"speed shape {arr.shape} != grid shape {grid.shape}")
        if not np.all(arr > 0.0):
            raise ValueError("speed must be strictly positive")
        self.grid = grid
        self.speed = arr
        self.rho = rho

    def scale_at(self, point: LiftedPoint) -> float:
        return 1.0 / float(trilinear(self.speed, self.grid, point.x, point.y, point.theta))

    def eval(self, point: LiftedPoint, vec: LiftedVector) -> float:
        ux, uy = vec.u
        return self.scale_at(point) * math.sqrt(ux * ux + uy * uy + self.rho * vec.nu ** 2)

    def randers_at(self, point: LiftedPoint):
        s = self.scale_at(point)
        return s * s * np.diag([1.0, 1.0, self.rho]), np.zeros(3)

    def solver_model(self) -> dict:
        K = self.grid.n_theta
        return {
            "kind": "template",
            "grid": self.grid,
            "M0": np.array([1.0, 1.0, self.rho]),
            "omega0": np.zeros((K, 3)),
            "scale": 1.0 / self.speed,
        }


# ---------------------------------------------------------------------------
# Dual norm and optimal direction (shared Randers closed form)
# ---------------------------------------------------------------------------

def _randers_dual(M: np.ndarray, omega: np.ndarray, g: np.ndarray):
    """Dual value and maximizing direction for F(u) = |u|_M - <omega, u>.

    The dual value t solves |g + t*omega|_{M^-1} = t, a quadratic with a
    single admissible root; the maximizer is proportional to
    M^-1 (g + t*omega).
    """
    Minv_g = np.linalg.solve(M, g)
    Minv_w = np.linalg.solve(M, omega)
    a = 1.0 - float(omega @ Minv_w)
    b = float(g @ Minv_w)
    c = float(g @ Minv_g)
    t = (b + math.sqrt(b * b + a * c)) / a
    w = Minv_g + t * Minv_w
    return t, w


def dual_norm(metric: MetricBase, point, grad) -> float:
    """sup over v != 0 of <grad, v> / F(point, v)."""
    g = np.asarray(grad, dtype=float)
    if not np.any(g):
        raise DegenerateGradientError("dual norm of a zero gradient")
    M, omega = metric.randers_at(point)
    t, _ = _randers_dual(M, omega, g)
    return t


def optimal_direction(metric: MetricBase, point, grad) -> np.ndarray:
    """Maximizer of <grad, v>/F(v), normalized so F(point, v) = 1."""
    g = np.asarray(grad, dtype=float)
    if not np.any(g):
        raise DegenerateGradientError("optimal direction of a zero gradient")
    M, omega = metric.randers_at(point)
    _, w = _randers_dual(M, omega, g)
    value = math.sqrt(w @ M @ w) - float(omega @ w)
    return w / value


# ---------------------------------------------------------------------------
# Anisotropy ratio
# ---------------------------------------------------------------------------

def _sphere_directions(n: int) -> np.ndarray:
    """Fibonacci point set on the unit sphere."""
    idx = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * idx
    z = 1.0 - 2.0 * idx / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _circle_directions(n: int) -> np.ndarray:
    ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _eval_generic(metric: MetricBase, point, d: np.ndarray) -> float:
    if metric.dim == 3:
        return metric.eval(point, LiftedVector((d[0], d[1]), d[2]))
    return metric.eval(point, d)


def anisotropy_ratio(metric: MetricBase, physical_only: bool = False,
                     n_dirs: int = 4096, node_sample: int = 16) -> float:
    """Worst-case ratio F(w)/F(v) over unit direction pairs, sup over nodes.

    Dense direction sampling augmented with the analytic extremal pair
    (+/- v_theta, 0); ``physical_only`` restricts to directions with zero
    orientation rate.
    """
    if metric.dim == 3:
        dirs = _sphere_directions(n_dirs)
        if physical_only:
            circ = _circle_directions(n_dirs)
            dirs = np.concatenate([circ, np.zeros((n_dirs, 1))], axis=1)
    else:
        dirs = _circle_directions(n_dirs)

    points = _probe_points(metric, node_sample)
    worst = 1.0
    for point in points:
        vals = []
        for d in dirs:
            vals.append(_eval_generic(metric, point, d))
        if metric.dim == 3:
            theta = point.theta
            v = orientation_vector(theta)
            for sign in (1.0, -1.0):
                vals.append(_eval_generic(metric, point, np.array([sign * v[0], sign * v[1], 0.0])))
        vals = np.asarray(vals)
        finite = vals[np.isfinite(vals)]
        ratio = float(finite.max() / finite.min())
        worst = max(worst, ratio)
    return worst


def _probe_points(metric: MetricBase, node_sample: int):
    grid = getattr(metric, "grid", None)
    if metric.dim == 3:
        if grid is None:
            thetas = np.linspace(0, 2 * math.pi, 8, endpoint=False)
            return [LiftedPoint(0.0, 0.0, t) for t in thetas]
        rng = np.random.default_rng(0)
        pts = []
        for _ in range(node_sample):
            i = int(rng.integers(0, grid.width))
            j = int(rng.integers(0, grid.height))
            k = int(rng.integers(0, grid.n_theta))
            pts.append(LiftedPoint(i * grid.spacing, j * grid.spacing, k * grid.theta_step))
        return pts
    rng = np.random.default_rng(0)
    pts = []
    for _ in range(node_sample):
        i = int(rng.integers(0, grid.width))
        j = int(rng.integers(0, grid.height))
        pts.append((i * grid.spacing, j * grid.spacing))
    return pts
