"""Quadrature rules for bi-unit reference elements.

All 1D rules are generated by Golub-Welsch eigenvalue decomposition of the
Jacobi matrix built from analytic recurrence coefficients (Gautschi,
"Orthogonal Polynomials: Computation and Approximation").  Multi-dimensional
rules are conical products assembled through the Duffy collapse maps, so
exactness degrees are guaranteed by construction rather than by tabulated
point sets.

Exactness conventions: tensor-product rules (interval, hex) record the
per-direction degree; simplex, wedge and pyramid rules record the total
degree.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, gamma

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .refelem import duffy_map

__all__ = [
    "QuadratureRule",
    "gauss_legendre_1d",
    "gauss_lobatto_1d",
    "gauss_jacobi_1d",
    "triangle_rule",
    "symmetric_triangle_rule",
    "element_rule",
    "analytic_moment",
]

REFERENCE_MEASURE = {
    "interval": 2.0,
    "triangle": 2.0,
    "hex": 8.0,
    "wedge": 4.0,
    "pyramid": 8.0 / 3.0,
    "tet": 4.0 / 3.0,
}


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on a reference domain.

    ``points`` holds reference coordinates, shape (n, dim) for dim > 1 and
    (n,) for 1D rules.  ``collapsed`` holds the (a, b, c) tensor preimages
    under the Duffy map for volume rules that are built as conical products;
    operator construction uses these, the public contract does not.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    domain: str
    degree_convention: str  # "per_direction" or "total"
    collapsed: np.ndarray | None = field(default=None, compare=False)

    @property
    def n(self):
        return len(self.weights)


def _jacobi_recurrence(n, alpha, beta):
    """First n recurrence coefficients (a_k, b_k) for the monic Jacobi
    polynomials with weight (1-x)^alpha (1+x)^beta, plus the zeroth moment."""
    a = np.zeros(n)
    b = np.zeros(n)
    apb = alpha + beta
    mu0 = 2.0 ** (apb + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(apb + 2.0)
    if n == 0:
        return a, b, mu0
    a[0] = (beta - alpha) / (apb + 2.0)
    for k in range(1, n):
        den = (2.0 * k + apb) * (2.0 * k + apb + 2.0)
        a[k] = (beta * beta - alpha * alpha) / den
        num = 4.0 * k * (k + alpha) * (k + beta) * (k + apb)
        den = (2.0 * k + apb) ** 2 * (2.0 * k + apb + 1.0) * (2.0 * k + apb - 1.0)
        b[k] = num / den
    return a, b, mu0


def gauss_jacobi_1d(alpha, beta, n):
    """n-point Gauss-Jacobi rule for weight (1-x)^alpha (1+x)^beta on [-1,1].

    Exact for polynomial degree 2n-1 against the weighted measure.
    """
    if alpha <= -1.0 or beta <= -1.0:
        raise ValueError(f"Jacobi exponents must exceed -1, got ({alpha}, {beta})")
    if n < 1:
        raise ValueError("Gauss-Jacobi rule needs at least one point")
    a, b, mu0 = _jacobi_recurrence(n, alpha, beta)
    if n == 1:
        x = a.copy()
        w = np.array([mu0])
    else:
        x, vec = eigh_tridiagonal(a, np.sqrt(b[1:]))
        w = mu0 * vec[0, :] ** 2
    return QuadratureRule(x, w, 2 * n - 1, "interval", "per_direction")


def gauss_legendre_1d(n):
    """n-point Gauss-Legendre rule on [-1,1], exact for degree 2n-1."""
    if n < 1:
        raise ValueError("Gauss-Legendre rule needs at least one point")
    return gauss_jacobi_1d(0.0, 0.0, n)


def gauss_lobatto_1d(n):
    """n-point Gauss-Legendre-Lobatto rule on [-1,1] including the endpoints.

    Exact for degree 2n-3.  Interior points are the Gauss-Jacobi(1,1) nodes;
    endpoint weights are 2/(n(n-1)).
    """
    if n < 2:
        raise ValueError("Lobatto rules include both endpoints, need n >= 2")
    x = np.zeros(n)
    x[0], x[-1] = -1.0, 1.0
    if n > 2:
        x[1:-1] = gauss_jacobi_1d(1.0, 1.0, n - 2).points
    # w_i = 2 / (n(n-1) P_{n-1}(x_i)^2) with classical Legendre P_{n-1}
    pm1 = np.ones_like(x)
    p = x.copy()
    for k in range(1, n - 1):
        pm1, p = p, ((2 * k + 1) * x * p - k * pm1) / (k + 1)
    w = 2.0 / (n * (n - 1) * p**2)
    return QuadratureRule(x, w, 2 * n - 3, "interval", "per_direction")


def triangle_rule(N):
    """Conical-product rule on the bi-unit triangle, exact for total degree
    2N+1.

    Built as GL(N+1) x GJ(1,0)(N+1) collapsed through the triangle Duffy map;
    the (1-b)/2 Duffy volume factor is absorbed into the Jacobi weights.
    """
    if N < 0:
        raise ValueError("polynomial order must be nonnegative")
    ga = gauss_legendre_1d(N + 1)
    gb = gauss_jacobi_1d(1.0, 0.0, N + 1)
    a, b = np.meshgrid(ga.points, gb.points, indexing="ij")
    a, b = a.ravel(), b.ravel()
    r = (1.0 + a) * (1.0 - b) / 2.0 - 1.0
    s = b
    w = np.outer(ga.weights, gb.weights / 2.0).ravel()
    pts = np.column_stack([r, s])
    return QuadratureRule(pts, w, 2 * N + 1, "triangle", "total",
                          collapsed=np.column_stack([a, b]))


# Affine maps of the bi-unit triangle onto itself: images of the three
# vertices (-1,-1), (1,-1), (-1,1) under the six vertex relabelings.
_TRI_VERTS = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
_TRI_PERMS = [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (2, 1, 0), (1, 0, 2)]


def _tri_barycentric(pts):
    r, s = pts[:, 0], pts[:, 1]
    return np.column_stack([-(r + s) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0])


def symmetric_triangle_rule(N):
    """Triangle rule whose point set is invariant under all six vertex
    relabelings, exact for total degree 2N+1.

    Face-trace matching locates each cubature point of a neighboring element
    by coordinates, which requires the point set to be symmetric; the plain
    conical rule is not.  Averaging it over the symmetry group preserves
    exactness.
    """
    base = triangle_rule(N)
    lam = _tri_barycentric(base.points)
    pts = []
    wts = []
    for perm in _TRI_PERMS:
        pts.append(lam[:, perm] @ _TRI_VERTS)
        wts.append(base.weights / len(_TRI_PERMS))
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), 2 * N + 1,
                          "triangle", "total")


def element_rule(elem_type, N):
    """Volume rule on the bi-unit reference element for order-N bases.

    hex:     GL(N+1)^3, exact per-direction degree 2N+1
    wedge:   triangle_rule(N) x GL(N+1), exact total degree 2N+1
    pyramid: GL(N+1)^2 x GJ(2,0)(N+1) through the Duffy map
    tet:     GL(N+1) x GJ(1,0)(N+1) x GJ(2,0)(N+1) conical product
    """
    if N < 0:
        raise ValueError("polynomial order must be nonnegative")
    if elem_type == "hex":
        g = gauss_legendre_1d(N + 1)
        a, b, c = np.meshgrid(g.points, g.points, g.points, indexing="ij")
        abc = np.column_stack([a.ravel(), b.ravel(), c.ravel()])
        w = np.einsum("i,j,k->ijk", g.weights, g.weights, g.weights).ravel()
        return QuadratureRule(abc, w, 2 * N + 1, "hex", "per_direction",
                              collapsed=abc)
    if elem_type == "wedge":
        tri = triangle_rule(N)
        gs = gauss_legendre_1d(N + 1)
        nt, ns = tri.n, gs.n
        r = np.repeat(tri.points[:, 0], ns)
        t = np.repeat(tri.points[:, 1], ns)
        s = np.tile(gs.points, nt)
        w = np.outer(tri.weights, gs.weights).ravel()
        a = np.repeat(tri.collapsed[:, 0], ns)
        c = np.repeat(tri.collapsed[:, 1], ns)
        return QuadratureRule(np.column_stack([r, s, t]), w, 2 * N + 1,
                              "wedge", "total",
                              collapsed=np.column_stack([a, s, c]))
    if elem_type == "pyramid":
        g = gauss_legendre_1d(N + 1)
        gc = gauss_jacobi_1d(2.0, 0.0, N + 1)
        a, b, c = np.meshgrid(g.points, g.points, gc.points, indexing="ij")
        abc = np.column_stack([a.ravel(), b.ravel(), c.ravel()])
        w = np.einsum("i,j,k->ijk", g.weights, g.weights, gc.weights / 4.0).ravel()
        rst = duffy_map("pyramid", abc)
        return QuadratureRule(rst, w, 2 * N + 1, "pyramid", "total",
                              collapsed=abc)
    if elem_type == "tet":
        ga = gauss_legendre_1d(N + 1)
        gb = gauss_jacobi_1d(1.0, 0.0, N + 1)
        gc = gauss_jacobi_1d(2.0, 0.0, N + 1)
        a, b, c = np.meshgrid(ga.points, gb.points, gc.points, indexing="ij")
        abc = np.column_stack([a.ravel(), b.ravel(), c.ravel()])
        w = np.einsum("i,j,k->ijk", ga.weights, gb.weights / 2.0,
                      gc.weights / 4.0).ravel()
        rst = duffy_map("tet", abc)
        return QuadratureRule(rst, w, 2 * N + 1, "tet", "total",
                              collapsed=abc)
    raise ValueError(f"unknown element type {elem_type!r}")


def _interval_moment(p):
    # integral of x^p over [-1,1]
    return Fraction(0) if p % 2 else Fraction(2, p + 1)


def _factorial(p):
    out = 1
    for k in range(2, p + 1):
        out *= k
    return out


def _unit_simplex_moment(exps):
    # integral of prod X_i^{p_i} over the unit d-simplex: prod p_i! / (sum p_i + d)!
    d = len(exps)
    num = 1
    for p in exps:
        num *= _factorial(p)
    return Fraction(num, _factorial(sum(exps) + d))


def _biunit_simplex_moment(exps):
    # integral over the bi-unit simplex of prod r_i^{p_i}, r_i = 2 X_i - 1
    d = len(exps)
    total = Fraction(0)

    def rec(dim, coeff, sub):
        nonlocal total
        if dim == d:
            total += coeff * _unit_simplex_moment(tuple(sub))
            return
        p = exps[dim]
        for i in range(p + 1):
            c = comb(p, i) * Fraction(2) ** i * Fraction(-1) ** (p - i)
            rec(dim + 1, coeff * c, sub + [i])

    rec(0, Fraction(2) ** d, [])
    return total


def analytic_moment(domain, exps):
    """Exact monomial moment over a bi-unit reference domain as a Fraction.

    ``exps`` are the exponents of the reference coordinates, e.g. (i, j)
    for r^i s^j on the triangle.  Used as the independent oracle behind the
    quadrature moment tests.
    """
    if domain == "interval":
        (p,) = exps
        return _interval_moment(p)
    if domain == "triangle":
        return _biunit_simplex_moment(tuple(exps))
    if domain == "hex":
        out = Fraction(1)
        for p in exps:
            out *= _interval_moment(p)
        return out
    if domain == "tet":
        return _biunit_simplex_moment(tuple(exps))
    if domain == "wedge":
        # triangle in (r,t), interval in s
        i, j, k = exps
        return _biunit_simplex_moment((i, k)) * _interval_moment(j)
    if domain == "pyramid":
        return _pyramid_moment(*exps)
    raise ValueError(f"unknown domain {domain!r}")


def _pyramid_moment(i, j, k):
    # integral of r^i s^j t^k over the bi-unit right pyramid via the collapse
    # r = (1+a)(1-c)/2 - 1, s = (1+b)(1-c)/2 - 1, t = c, volume factor ((1-c)/2)^2
    total = Fraction(0)
    for p in range(i + 1):
        # (1+r)^p = 2^p ((1+a)/2)^p ((1-c)/2)^p
        cp = comb(i, p) * Fraction(-1) ** (i - p) * Fraction(2) ** p
        ia = _one_plus_moment(p)
        for q in range(j + 1):
            cq = comb(j, q) * Fraction(-1) ** (j - q) * Fraction(2) ** q
            ib = _one_plus_moment(q)
            # remaining c-integral: ((1-c)/2)^(p+q+2) * c^k
            ic = _half_one_minus_times_power(p + q + 2, k)
            total += cp * cq * ia * ib * ic
    return total


def _one_plus_moment(p):
    # integral of ((1+x)/2)^p over [-1,1]
    return Fraction(2, p + 1)


def _half_one_minus_times_power(m, k):
    # integral of ((1-c)/2)^m c^k over [-1,1]
    total = Fraction(0)
    for q in range(m + 1):
        c = comb(m, q) * Fraction(-1) ** q / Fraction(2) ** m
        total += c * _interval_moment(k + q)
    return total
