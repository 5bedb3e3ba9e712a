"""Trace and Markov inequality constants, spectral-radius bounds, local
timestep estimation and multi-rate level assignment.

Computed constants solve generalized symmetric eigenproblems in the
orthonormal reference bases (surface mass against volume mass for the
trace constant; stiffness against mass for the Markov constant), reduced
through the volume mass Cholesky factor.  The SEM variants replace exact
quadrature by Gauss-Lobatto rules on quadrilateral faces, and on the
hexahedron also in the volume, matching the discrete norms the SEM scheme
actually uses.  The hexahedral Markov constant likewise uses the Lobatto
(collocated) norm; its full-quadrature value would be three times the 1D
Legendre constant instead.
"""

from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from . import basis as bas
from .operators import face_rule_2d
from .quadrature import element_rule, gauss_lobatto_1d
from .refelem import (REFERENCE_ELEMENTS, face_geometry_batch,
                      face_quadrature_points, inverse_duffy_map)

__all__ = [
    "TraceConstants",
    "TimestepPlan",
    "analytic_trace_constant",
    "computed_trace_constant",
    "markov_constant",
    "hex_exact_trace",
    "extremal_polynomial_check",
    "local_timestep",
    "local_timesteps",
    "element_trace_constant",
    "spectral_bounds",
    "assign_mrab_levels",
    "max_real_eig",
    "spectral_radius",
]

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)


def analytic_trace_constant(elem_type, N):
    """Closed-form face-based trace constant over the reference surface."""
    if elem_type == "hex":
        return 4.0 * (N + 1) ** 2
    if elem_type == "wedge":
        return (SQRT2 + 3.0) * (N + 1) * (N + 2)
    if elem_type == "pyramid":
        return (SQRT2 + 2.0) * (N + 1) * (N + 3)
    if elem_type == "tet":
        return (SQRT3 + 3.0) * (N + 1) * (N + 3) / 2.0
    raise ValueError(f"unknown element type {elem_type!r}")


def hex_exact_trace(N, mode="full"):
    """Exact tensor-product trace constants in d = 3: 3(N+1)(N+2)/2 for the
    full norm, 3N(N+1)/2 for the Lobatto-quadrature norm (valid N >= 1)."""
    if mode == "full":
        return 3.0 * (N + 1) * (N + 2) / 2.0
    if mode == "SEM":
        if N < 1:
            raise ValueError("the Lobatto trace bound holds for N >= 1")
        return 3.0 * N * (N + 1) / 2.0
    raise ValueError(mode)


def _reference_vdm(elem_type, N, abc):
    if elem_type == "hex":
        V = np.empty((len(abc), (N + 1) ** 3))
        P = [bas.legendre_vandermonde_1d(abc[:, d], N) for d in range(3)]
        m = 0
        for i in range(N + 1):
            for j in range(N + 1):
                for k in range(N + 1):
                    V[:, m] = P[0][:, i] * P[1][:, j] * P[2][:, k]
                    m += 1
        return V
    if elem_type == "tet":
        return bas.tet_orthobasis_eval(N, abc).V
    if elem_type == "wedge":
        return bas.wedge_orthobasis_eval(N, abc).V
    if elem_type == "pyramid":
        return bas.pyramid_seminodal_eval(N, abc).V
    raise ValueError(elem_type)


def _reference_grad_vdm(elem_type, N, abc):
    if elem_type == "hex":
        npts = len(abc)
        V = np.empty((3, npts, (N + 1) ** 3))
        P = [bas.legendre_vandermonde_1d(abc[:, d], N) for d in range(3)]
        dP = [np.column_stack([bas.grad_jacobi_p(abc[:, d], 0, 0, j)
                               for j in range(N + 1)]) for d in range(3)]
        m = 0
        for i in range(N + 1):
            for j in range(N + 1):
                for k in range(N + 1):
                    V[0, :, m] = dP[0][:, i] * P[1][:, j] * P[2][:, k]
                    V[1, :, m] = P[0][:, i] * dP[1][:, j] * P[2][:, k]
                    V[2, :, m] = P[0][:, i] * P[1][:, j] * dP[2][:, k]
                    m += 1
        return V
    ev = {"tet": bas.tet_orthobasis_eval, "wedge": bas.wedge_orthobasis_eval,
          "pyramid": bas.pyramid_seminodal_eval}[elem_type](N, abc)
    return np.stack([ev.Vr, ev.Vs, ev.Vt])


def _surface_mass(elem_type, N, quad_mode):
    """Surface mass over the reference boundary in the orthonormal basis.

    quad_mode 'SEM' puts (N+1)^2 Gauss-Lobatto points on quadrilateral
    faces; triangular faces keep the symmetric rule in both modes.
    """
    ref = REFERENCE_ELEMENTS[elem_type]
    verts = ref.vertices[None]
    Np = bas.basis_dimension(elem_type, N)
    Ms = np.zeros((Np, Np))
    formulation = "GL" if quad_mode == "full" else "SEM"
    for f, (ftype, _) in enumerate(ref.faces):
        pts2d, w2 = face_rule_2d(ftype, N, formulation)
        rst = face_quadrature_points(elem_type, f, pts2d)
        _, Js, _ = face_geometry_batch(elem_type, verts, f, pts2d)
        V = _reference_vdm(elem_type, N, inverse_duffy_map(elem_type, rst))
        Ms += V.T @ ((w2 * Js[0])[:, None] * V)
    return Ms


def _volume_mass(elem_type, N, quad_mode):
    """Reference volume mass; identity except under the hexahedral
    Lobatto-collocated norm."""
    Np = bas.basis_dimension(elem_type, N)
    if not (elem_type == "hex" and quad_mode == "SEM"):
        return np.eye(Np)
    gll = gauss_lobatto_1d(N + 1)
    a, b, c = np.meshgrid(gll.points, gll.points, gll.points, indexing="ij")
    abc = np.column_stack([a.ravel(), b.ravel(), c.ravel()])
    w3 = np.einsum("i,j,k->ijk", gll.weights, gll.weights, gll.weights).ravel()
    V = _reference_vdm("hex", N, abc)
    return V.T @ (w3[:, None] * V)


@lru_cache(maxsize=None)
def computed_trace_constant(elem_type, N, quad_mode="full"):
    """Largest generalized eigenvalue of the surface versus volume mass."""
    if not 1 <= N <= 9:
        raise ValueError("computed constants cover N in 1..9")
    Ms = _surface_mass(elem_type, N, quad_mode)
    M = _volume_mass(elem_type, N, quad_mode)
    return float(la.eigh(Ms, M, eigvals_only=True)[-1])


@lru_cache(maxsize=None)
def markov_constant(elem_type, N):
    """Largest eigenvalue of the reference stiffness against the mass.

    The hexahedron uses the Lobatto-collocated norms on both sides (the
    discrete norms of its SEM scheme; cross-direction factors of the
    stiffness alias under collocation, which the tabulated values reflect);
    the simplex-family types use exact quadrature.
    """
    if not 1 <= N <= 9:
        raise ValueError("computed constants cover N in 1..9")
    if elem_type == "hex":
        gll = gauss_lobatto_1d(N + 1)
        a, b, c = np.meshgrid(gll.points, gll.points, gll.points, indexing="ij")
        abc = np.column_stack([a.ravel(), b.ravel(), c.ravel()])
        w3 = np.einsum("i,j,k->ijk", gll.weights, gll.weights,
                       gll.weights).ravel()
        dV = _reference_grad_vdm("hex", N, abc)
        K = sum(dV[d].T @ (w3[:, None] * dV[d]) for d in range(3))
        return float(la.eigh(K, _volume_mass("hex", N, "SEM"),
                             eigvals_only=True)[-1])
    rule = element_rule(elem_type, N + 1)
    dV = _reference_grad_vdm(elem_type, N, rule.collapsed)
    K = sum(dV[d].T @ (rule.weights[:, None] * dV[d]) for d in range(3))
    return float(la.eigh(K, np.eye(K.shape[0]), eigvals_only=True)[-1])


def extremal_polynomial_check(N, d):
    """Surface-to-volume norm ratio of the tensor extremal polynomial.

    The 1D factor is the degree-N polynomial vanishing at the N interior
    nodes of the (N+2)-point Gauss-Lobatto rule and equal to one at +1 (it
    is one in magnitude at -1 by symmetry); its tensor product saturates
    the trace bound, so the ratio equals d (N+1)(N+2)/2.  Integrals are
    evaluated by exact quadrature, not by the closed form being verified.
    """
    interior = gauss_lobatto_1d(N + 2).points[1:-1]

    def u(x):
        out = np.ones_like(x)
        for r in interior:
            out = out * (x - r)
        return out / np.prod(1.0 - interior)

    from .quadrature import gauss_legendre_1d
    g = gauss_legendre_1d(N + 1)  # exact for the degree-2N integrand
    norm2_1d = float(np.sum(g.weights * u(g.points) ** 2))
    uend2 = float(u(np.array([1.0]))[0] ** 2 + u(np.array([-1.0]))[0] ** 2)
    if d not in (1, 3):
        raise ValueError("d must be 1 or 3")
    return d * uend2 / norm2_1d


# ------------------------------------------------------------------
# Per-element constants, timesteps, spectra bounds
# ------------------------------------------------------------------

def _jacobian_norms(disc, t):
    """L-inf norms of J, 1/J, Js (and Js/J for wedges) approximated by the
    maxima over the discretization's quadrature points."""
    d = disc.data[t]
    Jmax = d.cub_J.max(axis=1)
    Jinv = (1.0 / d.cub_J).max(axis=1)
    ws = d.wJs / _face_weight_vector(disc, t)[None, :]
    Jsmax = ws.max(axis=1)
    JsoverJ = None
    if t == "wedge":
        JsoverJ = (ws * d.invsqrtJ_face**2).max(axis=1)
    return Jmax, Jinv, Jsmax, JsoverJ


def _face_weight_vector(disc, t):
    op = disc.ops[t]
    w = np.empty(op.face_offsets[-1])
    for f, wf in enumerate(op.face_wts):
        w[op.face_offsets[f]:op.face_offsets[f + 1]] = wf
    return w


def material_constant(disc, t):
    """C_{rho,kappa} per element: max(tau_p kappa, tau_u / rho) over the
    element's faces."""
    d = disc.data[t]
    mat = disc.mesh.materials[t]
    tp = d.tau_p.max(axis=1)
    tu = d.tau_u.max(axis=1)
    return np.maximum(tp * mat[:, 1], tu / mat[:, 0])


def local_timesteps(disc, cfl=0.5):
    """Per-element stable timesteps C / (C_rk C_T(N) C_J) for the whole
    mesh, as a dict of per-type arrays."""
    mode = "SEM" if disc.formulation.kind == "SEM" else "full"
    out = {}
    for t in disc.types:
        CT = computed_trace_constant(t, disc.N, mode)
        Jmax, Jinv, Jsmax, JsoJ = _jacobian_norms(disc, t)
        CJ = JsoJ if t == "wedge" else Jsmax * Jinv
        Crk = material_constant(disc, t)
        out[t] = cfl / (Crk * CT * CJ)
    return out


def local_timestep(disc, t, k, cfl=0.5):
    return float(local_timesteps(disc, cfl)[t][k])


def element_trace_constant(disc, t, k):
    """Trace constant of the mapped element K in the scheme's norms:
    largest eigenvalue of the physical surface mass against the physical
    volume mass in the element's coefficient basis."""
    op = disc.ops[t]
    d = disc.data[t]
    Np = op.Np
    # physical surface mass
    Vf = op.Vf
    wJs = d.wJs[k]
    if t == "wedge":
        Vf = Vf * d.invsqrtJ_face[k][:, None]
    Ms = Vf.T @ (wJs[:, None] * Vf)
    # physical volume mass of the scheme
    if t == "hex":
        M = np.diag(d.w3 * d.J[k])
    elif t == "tet":
        M = d.J[k, 0] * op.M_ref
    elif t == "wedge":
        M = np.eye(Np)
    elif t == "pyramid":
        M = np.diag(d.J[k])
    vals = la.eigh(Ms, M, eigvals_only=True)
    return float(vals[-1])


def spectral_bounds(disc, cfl_constant=None):
    """Real and imaginary part bounds of the DG spectrum.

    Returns a dict with the four real-part bound variants (per-element
    computed constants, reference computed constants, analytic constants)
    and the imaginary-part bound.
    """
    mode = "SEM" if disc.formulation.kind == "SEM" else "full"
    re_elem = 0.0
    re_computed = 0.0
    re_analytic = 0.0
    im_bound = 0.0
    for t in disc.types:
        Crk = material_constant(disc, t)
        Jmax, Jinv, Jsmax, JsoJ = _jacobian_norms(disc, t)
        CJ = JsoJ if t == "wedge" else Jsmax * Jinv
        CTc = computed_trace_constant(t, disc.N, mode)
        CTa = analytic_trace_constant(t, disc.N)
        re_computed = max(re_computed, float((Crk * CTc * CJ).max()))
        re_analytic = max(re_analytic, float((Crk * CTa * CJ).max()))
        for k in range(disc.n_elems[t]):
            re_elem = max(re_elem, Crk[k] * element_trace_constant(disc, t, k))
        # imaginary bound: max(kappa, 1/rho) (sqrt(C_M(N,K)) + C_T(N,K))
        mat = disc.mesh.materials[t]
        mk = np.maximum(mat[:, 1], 1.0 / mat[:, 0])
        CM = markov_constant(t, disc.N)
        Crst = np.abs(disc.data[t].G).max(axis=(1, 2, 3))
        CMK = CM * Crst**2 * Jmax * Jinv
        CTK = CTc * CJ
        im_bound = max(im_bound, float((mk * (np.sqrt(CMK) + CTK)).max()))
    return {
        "re_elementwise": re_elem,
        "re_computed": re_computed,
        "re_analytic": re_analytic,
        "im_bound": im_bound,
    }


def max_real_eig(A, M, k=4):
    """Largest algebraic eigenvalue of the symmetric part: an upper bound
    for every Re(lambda) of M^-1 A."""
    As = 0.5 * (A + A.T)
    n = A.shape[0]
    if n <= 1500:
        return float(la.eigh(As.toarray(), M.toarray(), eigvals_only=True)[-1])
    lu = spla.splu(M.tocsc())
    Minv = spla.LinearOperator((n, n), matvec=lu.solve)
    vals = spla.eigsh(As, k=k, M=M, Minv=Minv, which="LA",
                      return_eigenvectors=False)
    return float(vals.max())


def min_real_eig(A, M, k=4):
    As = 0.5 * (A + A.T)
    n = A.shape[0]
    if n <= 1500:
        return float(la.eigh(As.toarray(), M.toarray(), eigvals_only=True)[0])
    lu = spla.splu(M.tocsc())
    Minv = spla.LinearOperator((n, n), matvec=lu.solve)
    vals = spla.eigsh(As, k=k, M=M, Minv=Minv, which="SA",
                      return_eigenvectors=False)
    return float(vals.min())


def spectral_radius(A, M, part="full", k=8):
    """rho(M^-1 B) with B = A, its symmetric or its skew part."""
    if part == "sym":
        return max(abs(max_real_eig(A, M)), abs(min_real_eig(A, M)))
    if part == "skew":
        B = 0.5 * (A - A.T)
    else:
        B = A
    n = A.shape[0]
    if n <= 1500:
        w = la.eig(np.linalg.solve(M.toarray(), B.toarray()), right=False)
        return float(np.abs(w).max())
    lu = spla.splu(M.tocsc())
    op = spla.LinearOperator((n, n), matvec=lambda v: lu.solve(B @ v))
    vals = spla.eigs(op, k=k, which="LM", return_eigenvectors=False)
    return float(np.abs(vals).max())


# ------------------------------------------------------------------
# Multi-rate level assignment
# ------------------------------------------------------------------

class TraceConstants:
    """Bundle of the four constants for one (element type, order)."""

    def __init__(self, elem_type, N):
        self.elem_type = elem_type
        self.N = N
        self.C_T_analytic = analytic_trace_constant(elem_type, N)
        self.C_T_computed = computed_trace_constant(elem_type, N, "full")
        self.C_SEM_computed = computed_trace_constant(elem_type, N, "SEM")
        self.C_M = markov_constant(elem_type, N)


class TimestepPlan:
    """Per-element local timesteps, multi-rate level binning and the level
    schedule.  Level 1 is the coarsest: dt_lev = 2^(n_levels-lev) dt_min."""

    def __init__(self, dt_local, levels, n_levels, cfl, order):
        self.dt_local = dt_local      # dict type -> (K,)
        self.levels = levels          # dict type -> (K,) ints in 1..n_levels
        self.n_levels = n_levels
        self.cfl = cfl
        self.order = order            # list of types, fixing global order
        self.dt_min = min(float(v.min()) for v in dt_local.values())
        self.level_dts = np.array([2.0 ** (n_levels - lev) * self.dt_min
                                   for lev in range(1, n_levels + 1)])

    def levels_of(self, mesh, t):
        return self.levels[t]

    def dt_of(self, t):
        return self.level_dts[self.levels[t] - 1]

    def validate_neighbor_levels(self, mesh):
        for t in self.levels:
            for k, links in enumerate(mesh.face_links[t]):
                for link in links:
                    if link.is_boundary:
                        continue
                    t2, k2, _ = link.neighbor
                    if abs(int(self.levels[t][k]) - int(self.levels[t2][k2])) > 1:
                        raise ValueError(
                            "neighboring elements differ by more than one "
                            "timestep level")

    def check(self):
        for t, lv in self.levels.items():
            assigned = self.level_dts[lv - 1]
            if np.any(assigned > self.dt_local[t] * (1 + 1e-12)):
                raise AssertionError("element assigned a timestep above its "
                                     "local limit")


def _bin_levels(dt_local, dt_min, n_levels):
    """Element gets the coarsest level whose step it can support:
    dt in [dt_lev, dt_{lev-1}) maps to lev, everything above the coarsest
    step to level 1."""
    ratio = np.maximum(dt_local / dt_min, 1.0)
    lev = n_levels - np.floor(np.log2(ratio) + 1e-12).astype(int)
    return np.clip(lev, 1, n_levels)


def assign_mrab_levels(dt_local, n_levels, mesh, cfl=0.5, order=None):
    """Bin elements into power-of-two levels and sweep until neighboring
    levels differ by at most one (moving elements to finer levels only)."""
    if n_levels < 1:
        raise ValueError("need at least one level")
    dt_min = min(float(v.min()) for v in dt_local.values())
    levels = {t: _bin_levels(v, dt_min, n_levels) for t, v in dt_local.items()}
    changed = True
    while changed:
        changed = False
        for t in levels:
            for k, links in enumerate(mesh.face_links[t]):
                for link in links:
                    if link.is_boundary:
                        continue
                    t2, k2, _ = link.neighbor
                    if levels[t2][k2] - levels[t][k] > 1:
                        levels[t][k] = levels[t2][k2] - 1  # coarser -> finer
                        changed = True
    plan = TimestepPlan(dt_local, levels, n_levels, cfl,
                        order or list(dt_local))
    plan.check()
    return plan
