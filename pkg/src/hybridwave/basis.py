"""Element bases: nodal GL/SEM hex, nodal tet, modal wedge (low-storage
curvilinear scaling), and the semi-nodal rational pyramid basis.

Modal bases are orthonormal on the bi-unit reference elements; the
normalization constants are fixed by the Gram tests rather than quoted.
Evaluation at collapsed edges uses the guarded power-form of the gradient
formulas so no singular factors are ever formed.
"""

from dataclasses import dataclass
from math import gamma, sqrt

import numpy as np

from .quadrature import gauss_legendre_1d, gauss_lobatto_1d

__all__ = [
    "BasisSpec",
    "Vandermonde",
    "jacobi_p",
    "grad_jacobi_p",
    "lagrange_matrices_1d",
    "hex_nodal_eval",
    "tet_orthobasis_eval",
    "tet_nodal_points",
    "wedge_orthobasis_eval",
    "wedge_tri_basis_eval",
    "pyramid_seminodal_eval",
    "lsc_wedge_basis_eval",
    "basis_dimension",
]

FLAVORS = ("hex_GL", "hex_SEM", "tet_nodal", "wedge_LSC", "pyramid_seminodal")


def basis_dimension(elem_type, N):
    if elem_type == "hex":
        return (N + 1) ** 3
    if elem_type == "tet":
        return (N + 1) * (N + 2) * (N + 3) // 6
    if elem_type == "wedge":
        return (N + 1) ** 2 * (N + 2) // 2
    if elem_type == "pyramid":
        return (N + 1) * (N + 2) * (2 * N + 3) // 6
    raise ValueError(f"unknown element type {elem_type!r}")


@dataclass(frozen=True)
class BasisSpec:
    elem_type: str
    N: int
    flavor: str

    @property
    def Np(self):
        return basis_dimension(self.elem_type, self.N)


@dataclass
class Vandermonde:
    """Basis values and reference-coordinate derivatives at a point set."""

    V: np.ndarray
    Vr: np.ndarray
    Vs: np.ndarray
    Vt: np.ndarray


# ------------------------------------------------------------------
# Jacobi polynomials, orthonormal on [-1,1] w.r.t. (1-x)^a (1+x)^b
# ------------------------------------------------------------------

def jacobi_p(x, alpha, beta, n):
    """Orthonormal Jacobi polynomial of degree n at points x."""
    x = np.asarray(x, dtype=float)
    apb = alpha + beta
    gamma0 = (2.0 ** (apb + 1) / (apb + 1.0) * gamma(alpha + 1) * gamma(beta + 1)
              / gamma(apb + 1))
    p0 = np.full_like(x, 1.0 / sqrt(gamma0))
    if n == 0:
        return p0
    gamma1 = (alpha + 1.0) * (beta + 1.0) / (apb + 3.0) * gamma0
    p1 = ((apb + 2.0) * x / 2.0 + (alpha - beta) / 2.0) / sqrt(gamma1)
    if n == 1:
        return p1
    aold = 2.0 / (2.0 + apb) * sqrt((alpha + 1.0) * (beta + 1.0) / (apb + 3.0))
    for i in range(1, n):
        h1 = 2.0 * i + apb
        anew = (2.0 / (h1 + 2.0)
                * sqrt((i + 1.0) * (i + 1.0 + apb) * (i + 1.0 + alpha)
                       * (i + 1.0 + beta) / (h1 + 1.0) / (h1 + 3.0)))
        bnew = -(alpha * alpha - beta * beta) / (h1 * (h1 + 2.0))
        p0, p1 = p1, (-aold * p0 + (x - bnew) * p1) / anew
        aold = anew
    return p1


def grad_jacobi_p(x, alpha, beta, n):
    """Derivative of the orthonormal Jacobi polynomial of degree n."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return sqrt(n * (n + alpha + beta + 1.0)) * jacobi_p(x, alpha + 1, beta + 1, n - 1)


def legendre_vandermonde_1d(nodes, N):
    V = np.empty((len(nodes), N + 1))
    for j in range(N + 1):
        V[:, j] = jacobi_p(nodes, 0.0, 0.0, j)
    return V


def lagrange_matrices_1d(nodes, x):
    """Values and derivatives of the Lagrange basis on ``nodes`` at ``x``.

    Evaluated through the orthonormal Legendre Vandermonde, which is well
    conditioned for Gauss-type node sets at the orders used here.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    N = len(nodes) - 1
    Vn = legendre_vandermonde_1d(nodes, N)
    Vx = legendre_vandermonde_1d(x, N)
    dVx = np.empty_like(Vx)
    for j in range(N + 1):
        dVx[:, j] = grad_jacobi_p(x, 0.0, 0.0, j)
    Vn_inv = np.linalg.inv(Vn)
    return Vx @ Vn_inv, dVx @ Vn_inv


# ------------------------------------------------------------------
# Hexahedron: tensor-product Lagrange at GL or GLL nodes
# ------------------------------------------------------------------

def hex_nodes_1d(N, flavor):
    if flavor == "GL":
        return gauss_legendre_1d(N + 1)
    if flavor == "SEM":
        if N < 1:
            raise ValueError("SEM needs N >= 1 (GLL rules need 2 points)")
        return gauss_lobatto_1d(N + 1)
    raise ValueError(f"unknown hex flavor {flavor!r}")


def hex_mode_ids(N):
    i, j, k = np.meshgrid(np.arange(N + 1), np.arange(N + 1), np.arange(N + 1),
                          indexing="ij")
    return i.ravel(), j.ravel(), k.ravel()


def hex_nodal_eval(N, flavor, pts):
    """Vandermonde of the tensor Lagrange basis at (r,s,t) points.

    Mode order is t-fastest: flat = (i (N+1) + j)(N+1) + k.
    """
    rule = hex_nodes_1d(N, flavor)
    Lr, dLr = lagrange_matrices_1d(rule.points, pts[:, 0])
    Ls, dLs = lagrange_matrices_1d(rule.points, pts[:, 1])
    Lt, dLt = lagrange_matrices_1d(rule.points, pts[:, 2])
    i, j, k = hex_mode_ids(N)
    V = Lr[:, i] * Ls[:, j] * Lt[:, k]
    Vr = dLr[:, i] * Ls[:, j] * Lt[:, k]
    Vs = Lr[:, i] * dLs[:, j] * Lt[:, k]
    Vt = Lr[:, i] * Ls[:, j] * dLt[:, k]
    return Vandermonde(V, Vr, Vs, Vt)


# ------------------------------------------------------------------
# Tetrahedron: orthonormal collapsed-coordinate basis and nodal points
# ------------------------------------------------------------------

def tet_mode_ids(N):
    ids = [(i, j, k)
           for i in range(N + 1)
           for j in range(N + 1 - i)
           for k in range(N + 1 - i - j)]
    return ids


def _pow_half(v, p):
    # ((1 - v)/2)^p with p possibly 0
    if p == 0:
        return np.ones_like(v)
    return (0.5 * (1.0 - v)) ** p


def tet_orthobasis_eval(N, abc):
    """Orthonormal tet basis and derivatives at collapsed points (a,b,c).

    The guarded power form keeps every expression polynomial, so collapsed
    edges (b = 1 or c = 1) evaluate cleanly.
    """
    abc = np.atleast_2d(np.asarray(abc, dtype=float))
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    ids = tet_mode_ids(N)
    n = len(abc)
    V = np.empty((n, len(ids)))
    Vr = np.empty_like(V)
    Vs = np.empty_like(V)
    Vt = np.empty_like(V)
    for m, (i, j, k) in enumerate(ids):
        fa = jacobi_p(a, 0, 0, i)
        dfa = grad_jacobi_p(a, 0, 0, i)
        gb = jacobi_p(b, 2 * i + 1, 0, j)
        dgb = grad_jacobi_p(b, 2 * i + 1, 0, j)
        hc = jacobi_p(c, 2 * (i + j) + 2, 0, k)
        dhc = grad_jacobi_p(c, 2 * (i + j) + 2, 0, k)
        scale = 2.0 ** (2 * i + j + 1.5)

        V[:, m] = scale * fa * gb * _pow_half(b, i) * hc * _pow_half(c, i + j)

        dr = dfa * gb * hc
        if i > 0:
            dr = dr * _pow_half(b, i - 1)
        if i + j > 0:
            dr = dr * _pow_half(c, i + j - 1)
        Vr[:, m] = scale * dr

        ds = 0.5 * (1 + a) * dr
        tmp = dgb * _pow_half(b, i)
        if i > 0:
            tmp = tmp - 0.5 * i * gb * _pow_half(b, i - 1)
        if i + j > 0:
            tmp = tmp * _pow_half(c, i + j - 1)
        tmp = fa * tmp * hc
        Vs[:, m] = scale * (ds + tmp)

        dt = 0.5 * (1 + a) * dr + 0.5 * (1 + b) * tmp
        tmp2 = dhc * _pow_half(c, i + j)
        if i + j > 0:
            tmp2 = tmp2 - 0.5 * (i + j) * hc * _pow_half(c, i + j - 1)
        dt = dt + fa * gb * _pow_half(b, i) * tmp2
        Vt[:, m] = scale * dt
    return Vandermonde(V, Vr, Vs, Vt)


# blend parameters for the warped node sets, one per order (tuned values
# from the warp-and-blend construction)
_WB_ALPHA = [0.0, 0.0, 0.0, 0.0, 0.1002, 1.1332, 1.5608, 1.3413, 1.2577,
             1.1603, 1.10938, 0.6591, 0.3512, 0.2321, 0.2852, 0.8182]


def _warp_1d(N, gll, xout):
    """Deflated 1D warp: interpolated (GLL - equidistant) displacement with
    the endpoint roots divided out analytically."""
    xeq = np.array([-1.0 + 2.0 * (N - i) / N for i in range(N + 1)])
    warp = np.zeros_like(xout)
    for i in range(N + 1):
        d = np.full_like(xout, gll[i] - xeq[i])
        for j in range(1, N):
            if i != j:
                d = d * (xout - xeq[j]) / (xeq[i] - xeq[j])
        if i != 0:
            d = -d / (xeq[i] - xeq[0])
        if i != N:
            d = d / (xeq[i] - xeq[N])
        warp = warp + d
    return warp


def _eval_shift(N, pval, L1, L2, L3):
    gll = -gauss_lobatto_1d(N + 1).points  # descending, pairs with xeq
    blend1 = L2 * L3
    blend2 = L1 * L3
    blend3 = L1 * L2
    wf1 = 4.0 * _warp_1d(N, gll, L3 - L2)
    wf2 = 4.0 * _warp_1d(N, gll, L1 - L3)
    wf3 = 4.0 * _warp_1d(N, gll, L2 - L1)
    w1 = blend1 * wf1 * (1 + (pval * L1) ** 2)
    w2 = blend2 * wf2 * (1 + (pval * L2) ** 2)
    w3 = blend3 * wf3 * (1 + (pval * L3) ** 2)
    wx = w1 + np.cos(2 * np.pi / 3) * w2 + np.cos(4 * np.pi / 3) * w3
    wy = np.sin(2 * np.pi / 3) * w2 + np.sin(4 * np.pi / 3) * w3
    return wx, wy


def tet_nodal_points(N, tol=1e-10):
    """Warp-and-blend interpolation nodes on the bi-unit reference tet.

    Equidistant barycentric points on the equilateral tetrahedron are warped
    face by face with the 1D GLL displacement, then mapped affinely to the
    reference element.  Includes the 4 vertices; unisolvent for all orders
    used here (checked by the Vandermonde condition test).
    """
    if N < 1:
        raise ValueError("nodal sets need N >= 1")
    alpha = _WB_ALPHA[N] if N < len(_WB_ALPHA) else 1.0

    pts = [(-1.0 + 2.0 * q / N, -1.0 + 2.0 * m / N, -1.0 + 2.0 * n / N)
           for n in range(N + 1)
           for m in range(N + 2 - (n + 1))
           for q in range(N + 3 - (n + 1) - (m + 1))]
    rst = np.array(pts)
    r, s, t = rst[:, 0], rst[:, 1], rst[:, 2]
    L1 = (1 + t) / 2
    L2 = (1 + s) / 2
    L3 = -(1 + r + s + t) / 2
    L4 = (1 + r) / 2

    v1 = np.array([-1.0, -1 / np.sqrt(3.0), -1 / np.sqrt(6.0)])
    v2 = np.array([1.0, -1 / np.sqrt(3.0), -1 / np.sqrt(6.0)])
    v3 = np.array([0.0, 2 / np.sqrt(3.0), -1 / np.sqrt(6.0)])
    v4 = np.array([0.0, 0.0, 3 / np.sqrt(6.0)])
    XYZ = np.outer(L3, v1) + np.outer(L4, v2) + np.outer(L2, v3) + np.outer(L1, v4)

    t1 = np.array([v2 - v1, v2 - v1, v3 - v2, v3 - v1])
    t2 = np.array([v3 - 0.5 * (v1 + v2), v4 - 0.5 * (v1 + v2),
                   v4 - 0.5 * (v2 + v3), v4 - 0.5 * (v1 + v3)])
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 /= np.linalg.norm(t2, axis=1)[:, None]

    shift = np.zeros_like(XYZ)
    faces = [(L1, L2, L3, L4), (L2, L1, L3, L4), (L3, L1, L4, L2),
             (L4, L1, L3, L2)]
    for face, (La, Lb, Lc, Ld) in enumerate(faces):
        wx, wy = _eval_shift(N, alpha, Lb, Lc, Ld)
        blend = Lb * Lc * Ld
        denom = (Lb + 0.5 * La) * (Lc + 0.5 * La) * (Ld + 0.5 * La)
        ok = denom > tol
        blend = np.where(ok, (1 + (alpha * La) ** 2) * blend / np.where(ok, denom, 1.0), blend)
        shift += (blend * wx)[:, None] * t1[face] + (blend * wy)[:, None] * t2[face]
        # points on this face but on one of its edges keep only the pure
        # face warp (the blended sum would double-count adjacent faces)
        on_edge = (La < tol) & ((Lb > tol).astype(int) + (Lc > tol).astype(int)
                                + (Ld > tol).astype(int) < 3)
        if np.any(on_edge):
            shift[on_edge] = (wx[on_edge, None] * t1[face]
                              + wy[on_edge, None] * t2[face])
    XYZ = XYZ + shift

    # affine map equilateral -> bi-unit reference tet
    ref = np.array([[-1.0, -1.0, -1.0], [1.0, -1.0, -1.0],
                    [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
    E = np.column_stack([v2 - v1, v3 - v1, v4 - v1])
    R = np.column_stack([ref[1] - ref[0], ref[2] - ref[0], ref[3] - ref[0]])
    A = R @ np.linalg.inv(E)
    return (XYZ - v1) @ A.T + ref[0]


# ------------------------------------------------------------------
# Wedge: orthonormal triangle x line tensor basis
# ------------------------------------------------------------------

def wedge_tri_mode_ids(N):
    return [(i, k) for i in range(N + 1) for k in range(N + 1 - i)]


def wedge_mode_ids(N):
    """Full wedge modes ordered (triangle mode major, 1D mode minor)."""
    return [(i, j, k)
            for (i, k) in wedge_tri_mode_ids(N)
            for j in range(N + 1)]


def wedge_tri_basis_eval(N, ac):
    """Orthonormal basis of the (r,t) reference triangle at collapsed
    points (a, c): values and (r,t) derivatives, (npts, Np_tri) each."""
    ac = np.atleast_2d(np.asarray(ac, dtype=float))
    a, c = ac[:, 0], ac[:, 1]
    ids = wedge_tri_mode_ids(N)
    n = len(ac)
    V = np.empty((n, len(ids)))
    Vr = np.empty_like(V)
    Vt = np.empty_like(V)
    for m, (i, k) in enumerate(ids):
        fa = jacobi_p(a, 0, 0, i)
        dfa = grad_jacobi_p(a, 0, 0, i)
        hc = jacobi_p(c, 2 * i + 1, 0, k)
        dhc = grad_jacobi_p(c, 2 * i + 1, 0, k)
        scale = 2.0 ** (i + 0.5)
        V[:, m] = scale * fa * _pow_half(c, i) * hc

        dr = dfa * hc
        if i > 0:
            dr = dr * _pow_half(c, i - 1)
        Vr[:, m] = scale * dr

        dt = 0.5 * (1 + a) * dr
        tmp = dhc * _pow_half(c, i)
        if i > 0:
            tmp = tmp - 0.5 * i * hc * _pow_half(c, i - 1)
        Vt[:, m] = scale * (dt + fa * tmp)
    return V, Vr, Vt


def wedge_orthobasis_eval(N, abc):
    """Orthonormal wedge basis at collapsed points: triangle factor in
    (a,c) times Legendre in b = s."""
    abc = np.atleast_2d(np.asarray(abc, dtype=float))
    b = abc[:, 1]
    Vt2, Vr2, Vt2d = wedge_tri_basis_eval(N, abc[:, [0, 2]])
    P = legendre_vandermonde_1d(b, N)
    dP = np.column_stack([grad_jacobi_p(b, 0, 0, j) for j in range(N + 1)])
    ids = wedge_mode_ids(N)
    tri_ids = {tk: m for m, tk in enumerate(wedge_tri_mode_ids(N))}
    n = len(abc)
    V = np.empty((n, len(ids)))
    Vr = np.empty_like(V)
    Vs = np.empty_like(V)
    Vt = np.empty_like(V)
    for m, (i, j, k) in enumerate(ids):
        tm = tri_ids[(i, k)]
        V[:, m] = Vt2[:, tm] * P[:, j]
        Vr[:, m] = Vr2[:, tm] * P[:, j]
        Vs[:, m] = Vt2[:, tm] * dP[:, j]
        Vt[:, m] = Vt2d[:, tm] * P[:, j]
    return Vandermonde(V, Vr, Vs, Vt)


def lsc_wedge_basis_eval(N, J, abc):
    """Physical low-storage wedge basis values: reference modal values
    scaled by 1/sqrt(J) at the evaluation points."""
    if np.any(J <= 0):
        raise ValueError("low-storage wedge scaling needs J > 0")
    vdm = wedge_orthobasis_eval(N, abc)
    return vdm.V / np.sqrt(J)[:, None]


# ------------------------------------------------------------------
# Pyramid: orthonormal semi-nodal rational basis
# ------------------------------------------------------------------

def pyramid_mode_ids(N):
    """Flat mode order: vertical level k outer, then (i, j) within the
    (k+1)^2 Gauss-Legendre grid of that level."""
    return [(k, i, j)
            for k in range(N + 1)
            for i in range(k + 1)
            for j in range(k + 1)]


def pyramid_level_rules(N):
    return [gauss_legendre_1d(k + 1) for k in range(N + 1)]


def _pyramid_c_factors(N):
    """Per-level c-direction factors C_k(c) = gamma_k ((1-c)/2)^k P_{N-k}(c)
    normalized so that int C_k^2 ((1-c)/2)^2 dc = 1."""
    quad = gauss_legendre_1d(N + 2)
    gammas = np.empty(N + 1)
    for k in range(N + 1):
        vals = _pow_half(quad.points, k) * jacobi_p(quad.points, 2 * k + 3, 0, N - k)
        nrm2 = np.sum(quad.weights * vals**2 * _pow_half(quad.points, 1) ** 2)
        gammas[k] = 1.0 / sqrt(nrm2)
    return gammas


def pyramid_seminodal_eval(N, abc):
    """Semi-nodal pyramid basis at collapsed points (a,b,c): Lagrange at
    (k+1)-point GL nodes in a and b per level k, weighted Jacobi in c.

    Spans the rational pyramid space (polynomials of total order N plus the
    xy/(1-z) modes) and is orthonormal on the reference pyramid.
    """
    abc = np.atleast_2d(np.asarray(abc, dtype=float))
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    ids = pyramid_mode_ids(N)
    rules = pyramid_level_rules(N)
    gammas = _pyramid_c_factors(N)
    n = len(abc)
    V = np.empty((n, len(ids)))
    Vr = np.empty_like(V)
    Vs = np.empty_like(V)
    Vt = np.empty_like(V)
    La, dLa, Lb, dLb = {}, {}, {}, {}
    for k in range(N + 1):
        La[k], dLa[k] = lagrange_matrices_1d(rules[k].points, a)
        Lb[k], dLb[k] = lagrange_matrices_1d(rules[k].points, b)
    for m, (k, i, j) in enumerate(ids):
        w = rules[k].weights
        norm = 1.0 / sqrt(w[i] * w[j])
        pk = jacobi_p(c, 2 * k + 3, 0, N - k)
        dpk = grad_jacobi_p(c, 2 * k + 3, 0, N - k)
        Ck = gammas[k] * _pow_half(c, k) * pk
        Ai = La[k][:, i]
        dAi = dLa[k][:, i]
        Bj = Lb[k][:, j]
        dBj = dLb[k][:, j]
        V[:, m] = norm * Ai * Bj * Ck

        if k > 0:
            Ck_m1 = gammas[k] * _pow_half(c, k - 1) * pk
            Vr[:, m] = norm * dAi * Bj * Ck_m1
            Vs[:, m] = norm * Ai * dBj * Ck_m1
            dCk = gammas[k] * _pow_half(c, k) * dpk - 0.5 * k * Ck_m1
        else:
            Vr[:, m] = 0.0
            Vs[:, m] = 0.0
            dCk = gammas[k] * dpk
        Vt[:, m] = (0.5 * (1 + a) * Vr[:, m] + 0.5 * (1 + b) * Vs[:, m]
                    + norm * Ai * Bj * dCk)
    return Vandermonde(V, Vr, Vs, Vt)
