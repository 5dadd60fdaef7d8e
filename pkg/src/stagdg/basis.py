"""Nodal bases on reference elements, Lagrange time basis, quadrature rules.

The spatial bases are classical nodal Lagrange bases: on the reference
triangle T_std = {0 <= xi, 0 <= eta, xi + eta <= 1} for the primal grid and
on the unit square for the dual quadrilaterals.  The time basis consists of
the Lagrange polynomials through the Gauss-Legendre points of [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_SPACE_DEGREE = 4
MAX_TIME_DEGREE = 3


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points/weights on a reference domain.

    ``domain`` is one of "triangle", "quad", "interval"; ``exactness`` is the
    total polynomial degree integrated exactly.
    """

    domain: str
    exactness: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def make_quadrature(domain: str, exactness: int) -> QuadratureRule:
    """Build a quadrature rule of the requested polynomial exactness."""
    if exactness < 0 or exactness > 40:
        raise ValueError(f"unsupported quadrature exactness {exactness}")
    if domain == "interval":
        n = exactness // 2 + 1
        x, w = gauss_legendre_01(n)
        return QuadratureRule(domain, exactness, x[:, None], w)
    if domain == "triangle":
        # Duffy/collapsed tensor rule: exact for total degree <= 2n - 2.
        n = exactness // 2 + 2
        x, w = gauss_legendre_01(n)
        xi = np.repeat(x, n)
        eta = np.tile(x, n) * (1.0 - xi)
        ww = np.outer(w, w).ravel() * (1.0 - xi)
        return QuadratureRule(domain, exactness, np.column_stack([xi, eta]), ww)
    if domain == "quad":
        n = exactness // 2 + 1
        x, w = gauss_legendre_01(n)
        xi = np.repeat(x, n)
        eta = np.tile(x, n)
        ww = np.outer(w, w).ravel()
        return QuadratureRule(domain, exactness, np.column_stack([xi, eta]), ww)
    raise ValueError(f"unknown quadrature domain {domain!r}")


def _monomial_eval(expo: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate 2D monomials xi^a eta^b at pts, shape (npts, nmono)."""
    return pts[:, 0:1] ** expo[None, :, 0] * pts[:, 1:2] ** expo[None, :, 1]


def _monomial_grad(expo: np.ndarray, pts: np.ndarray) -> np.ndarray:
    a = expo[None, :, 0].astype(float)
    b = expo[None, :, 1].astype(float)
    xi = pts[:, 0:1]
    eta = pts[:, 1:2]
    with np.errstate(divide="ignore", invalid="ignore"):
        dxi = np.where(a > 0, a * xi ** np.maximum(a - 1, 0) * eta**b, 0.0)
        deta = np.where(b > 0, b * xi**a * eta ** np.maximum(b - 1, 0), 0.0)
    return np.stack([dxi, deta], axis=-1)


class SpatialBasis:
    """Nodal Lagrange basis on a reference triangle or quad.

    Attributes
    ----------
    kind : "triangle" or "quad"
    degree : polynomial degree p
    nodes : (n, 2) reference coordinates of the Lagrange nodes
    """

    def __init__(self, kind: str, degree: int):
        if not 0 <= degree <= MAX_SPACE_DEGREE:
            raise ValueError(f"unsupported spatial degree {degree}")
        if kind not in ("triangle", "quad"):
            raise ValueError(f"unknown element kind {kind!r}")
        self.kind = kind
        self.degree = degree
        p = degree
        if p == 0:
            nodes = np.array([[1 / 3, 1 / 3]] if kind == "triangle" else [[0.5, 0.5]])
            expo = np.array([[0, 0]])
        elif kind == "triangle":
            nodes = np.array(
                [(i / p, j / p) for j in range(p + 1) for i in range(p + 1 - j)]
            )
            expo = np.array(
                [(a, b) for b in range(p + 1) for a in range(p + 1 - b)]
            )
        else:
            g = np.arange(p + 1) / p
            nodes = np.array([(x, y) for y in g for x in g])
            expo = np.array([(a, b) for b in range(p + 1) for a in range(p + 1)])
        self.nodes = nodes
        self._expo = expo
        self.n = len(nodes)
        vand = _monomial_eval(expo, nodes)
        self._coef = np.linalg.inv(vand)  # monomial coefficients per basis fn

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values, shape (npts, n)."""
        return _monomial_eval(self._expo, np.atleast_2d(pts)) @ self._coef

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Reference-space gradients, shape (npts, n, 2)."""
        g = _monomial_grad(self._expo, np.atleast_2d(pts))
        return np.einsum("pmd,mk->pkd", g, self._coef)


def make_spatial_basis(kind: str, degree: int) -> SpatialBasis:
    return SpatialBasis(kind, degree)


class TimeBasis:
    """Lagrange basis at the Gauss-Legendre nodes of [0, 1]."""

    def __init__(self, degree: int):
        if not 0 <= degree <= MAX_TIME_DEGREE:
            raise ValueError(f"unsupported time degree {degree}")
        self.degree = degree
        self.n = degree + 1
        self.nodes, self.weights = gauss_legendre_01(self.n)
        # Lagrange via Vandermonde in the monomial basis.
        vand = np.vander(self.nodes, self.n, increasing=True)
        self._coef = np.linalg.inv(vand)

    def eval(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.vander(tau, self.n, increasing=True) @ self._coef

    def deriv(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        powers = np.arange(self.n)
        dv = np.zeros((len(tau), self.n))
        if self.n > 1:
            dv[:, 1:] = np.vander(tau, self.n - 1, increasing=True) * powers[1:]
        return dv @ self._coef


def make_time_basis(degree: int) -> TimeBasis:
    return TimeBasis(degree)


@dataclass
class SpaceTimeBasis:
    """Tensor-product space-time machinery shared by the solver.

    Holds the primal (triangle) and dual (quad) spatial bases, the time
    basis, and the temporal coupling matrices of the upwind-in-time weak
    form, all on the reference time interval (time-step scaling is applied
    where the operators are used):

    ``t_minus[k, l]`` couples the end state of the previous slab to the new
    one, ``t_stiff[k, l]`` is the asymmetric in-slab coupling, and
    ``t_mass`` is the (diagonal) temporal Gram matrix at the collocation
    nodes.
    """

    p: int
    p_gamma: int
    tri: SpatialBasis = field(init=False)
    quad: SpatialBasis = field(init=False)
    time: TimeBasis = field(init=False)

    def __post_init__(self):
        self.tri = SpatialBasis("triangle", self.p)
        self.quad = SpatialBasis("quad", self.p)
        self.time = TimeBasis(self.p_gamma)
        tb = self.time
        g0 = tb.eval(0.0)[0]
        g1 = tb.eval(1.0)[0]
        # Exact Gauss-Legendre integration of gamma_k * gamma_l'.
        tq, wq = gauss_legendre_01(tb.n + 1)
        gv = tb.eval(tq)
        gd = tb.deriv(tq)
        k_kl = np.einsum("q,qk,ql->kl", wq, gv, gd)
        # M = M^+ - M^circ reduces to gamma(0) gamma(0)^T + int gamma gamma'.
        self.t_evolve = np.outer(g0, g0) + k_kl
        self.t_minus = np.outer(g0, g1)
        self.t_mass = np.diag(tb.weights)
        self.t_evolve_inv = np.linalg.inv(self.t_evolve)
        self.gamma0 = g0
        self.gamma1 = g1

    @property
    def n_phi(self) -> int:
        return self.tri.n

    @property
    def n_psi(self) -> int:
        return self.quad.n

    @property
    def n_gamma(self) -> int:
        return self.time.n


def bilinear_map(verts: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Map reference-square points to a physical quad.

    verts: (..., 4, 2) quad corners in order v00, v10, v11, v01;
    ref: (npts, 2).  Returns (..., npts, 2).
    """
    xi = ref[:, 0]
    eta = ref[:, 1]
    sh = np.stack(
        [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=-1
    )
    return np.einsum("qv,...vd->...qd", sh, verts)


def inverse_bilinear(verts: np.ndarray, pts: np.ndarray, iters: int = 30) -> np.ndarray:
    """Invert the bilinear quad map with a vectorized Newton iteration.

    verts: (..., 4, 2); pts: (..., 2) physical points (broadcastable against
    the leading axes of verts).  Returns reference coordinates (..., 2).
    """
    v00, v10, v11, v01 = (verts[..., k, :] for k in range(4))
    a = v00
    b = v10 - v00
    c = v01 - v00
    d = v11 - v10 - v01 + v00
    ref = np.full(pts.shape, 0.5)
    for _ in range(iters):
        xi = ref[..., 0:1]
        eta = ref[..., 1:2]
        f = a + b * xi + c * eta + d * xi * eta - pts
        jxx = b + d * eta
        jyy = c + d * xi
        det = jxx[..., 0] * jyy[..., 1] - jxx[..., 1] * jyy[..., 0]
        # guard against a singular Jacobian at an intermediate iterate
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dxi = (f[..., 0] * jyy[..., 1] - f[..., 1] * jyy[..., 0]) / det
        deta = (jxx[..., 0] * f[..., 1] - jxx[..., 1] * f[..., 0]) / det
        step = np.stack([dxi, deta], axis=-1)
        np.clip(step, -1.0, 1.0, out=step)
        ref = ref - step
        if np.max(np.abs(f)) < 1e-14:
            break
    return ref
