"""Per-element-type operator bundles: differentiation, surface
interpolation, and mass-inverse application.

hex      1D differentiation matrix applied along tensor directions, face
         evaluation by 1D endpoint interpolation (index selection for SEM)
tet      nodal derivative matrices Dr, Ds, Dt and dense reference M^-1
wedge    two-pass cubature operators; triangle x line tensor factors are
         exposed and also pre-expanded to full cubature matrices
pyramid  quadrature-free weak derivative operators assembled from
         cross-level Lagrange evaluations and the tridiagonal c-coupling

Face interpolation matrices evaluate the element basis at the face cubature
points of a formulation (Gauss-Legendre or Gauss-Lobatto points on quads,
a symmetric triangle rule on triangular faces), concatenated over faces.
"""

import numpy as np

from . import basis as bas
from .quadrature import (element_rule, gauss_legendre_1d, gauss_lobatto_1d,
                         symmetric_triangle_rule)
from .refelem import (REFERENCE_ELEMENTS, face_quadrature_points,
                      inverse_duffy_map)

__all__ = [
    "ElementOperators",
    "build_operators",
    "build_hex_operators",
    "build_tet_operators",
    "build_wedge_operators",
    "build_pyramid_operators",
    "face_rule_2d",
    "apply_mass_inverse",
]


def face_rule_2d(face_type, N, formulation):
    """2D cubature on the reference face domain.

    Quadrilateral faces follow the hexahedral nodal basis of the
    formulation: (N+1)^2 Gauss-Legendre points for GL, Gauss-Lobatto for
    SEM.  Triangular faces always use the symmetric triangle rule (exact
    for degree 2N+1), independent of formulation.
    """
    if face_type == "tri":
        r = symmetric_triangle_rule(N)
        return r.points, r.weights
    rule1d = gauss_legendre_1d(N + 1) if formulation == "GL" else gauss_lobatto_1d(N + 1)
    xi, eta = np.meshgrid(rule1d.points, rule1d.points, indexing="ij")
    w = np.outer(rule1d.weights, rule1d.weights).ravel()
    return np.column_stack([xi.ravel(), eta.ravel()]), w


class ElementOperators:
    """Immutable per-type bundle; fields vary with the element type."""

    def __init__(self, elem_type, N, formulation, **fields):
        self.elem_type = elem_type
        self.N = N
        self.formulation = formulation
        self.Np = bas.basis_dimension(elem_type, N)
        for k, v in fields.items():
            setattr(self, k, v)


def _face_data(elem_type, N, formulation, eval_basis):
    """Concatenated face interpolation matrix and per-face rule metadata.

    eval_basis(rst) -> (npts, Np) basis values at reference points.
    Returns Vf (total_fp, Np), face offsets, per-face 2D points/weights and
    the reference coordinates of all face points.
    """
    ref = REFERENCE_ELEMENTS[elem_type]
    mats, offsets, pts2d, wts, rsts = [], [0], [], [], []
    for face, (ftype, _) in enumerate(ref.faces):
        p2, w2 = face_rule_2d(ftype, N, formulation)
        rst = face_quadrature_points(elem_type, face, p2)
        mats.append(eval_basis(rst))
        offsets.append(offsets[-1] + len(w2))
        pts2d.append(p2)
        wts.append(w2)
        rsts.append(rst)
    return (np.vstack(mats), np.array(offsets), pts2d, wts, np.vstack(rsts))


def build_hex_operators(N, formulation):
    """1D nodal operators for the hexahedron.

    D1 differentiates nodal samples of degree-N polynomials exactly.  Vf_end
    holds the endpoint interpolation rows (l_k(-1); the +1 endpoint uses the
    reversed row by the symmetry of both node families).  For SEM the rows
    are Kronecker rows and face evaluation reduces to index selection.
    """
    if N < 1:
        raise ValueError("hex operators need N >= 1")
    flavor = "GL" if formulation == "GL" else "SEM"
    rule = bas.hex_nodes_1d(N, flavor)
    L, dL = bas.lagrange_matrices_1d(rule.points, rule.points)
    D1 = dL
    end, dend = bas.lagrange_matrices_1d(rule.points, np.array([-1.0, 1.0]))
    vdm = lambda rst: bas.hex_nodal_eval(N, flavor, rst)

    def eval_basis(rst):
        return vdm(rst).V

    Vf, offsets, pts2d, wts, face_rst = _face_data("hex", N, formulation, eval_basis)
    return ElementOperators(
        "hex", N, formulation,
        nodes1d=rule.points, weights1d=rule.weights, D1=D1,
        Vf_end=end, Vf=Vf, face_offsets=offsets, face_pts2d=pts2d,
        face_wts=wts, face_rst=face_rst,
        mass_kind="diagonal", basis_eval=vdm)


def build_tet_operators(N):
    """Nodal derivative matrices and face machinery for the tetrahedron."""
    if N < 1:
        raise ValueError("tet operators need N >= 1")
    nodes = bas.tet_nodal_points(N)
    abc = inverse_duffy_map("tet", nodes)
    vdm = bas.tet_orthobasis_eval(N, abc)
    Vinv = np.linalg.inv(vdm.V)
    Dr = vdm.Vr @ Vinv
    Ds = vdm.Vs @ Vinv
    Dt = vdm.Vt @ Vinv
    invM_ref = vdm.V @ vdm.V.T   # inverse of the reference nodal mass
    M_ref = Vinv.T @ Vinv

    def eval_basis(rst):
        return bas.tet_orthobasis_eval(N, inverse_duffy_map("tet", rst)).V @ Vinv

    Vf, offsets, pts2d, wts, face_rst = _face_data("tet", N, "GL", eval_basis)
    # nodal trace structure: nodes lying on each face (face order t-, s-, hyp, r-)
    conds = [np.abs(nodes[:, 2] + 1) < 1e-9,
             np.abs(nodes[:, 1] + 1) < 1e-9,
             np.abs(nodes.sum(axis=1) + 1) < 1e-9,
             np.abs(nodes[:, 0] + 1) < 1e-9]
    face_nodes = [np.flatnonzero(c) for c in conds]
    cub = element_rule("tet", N)
    Vq = bas.tet_orthobasis_eval(N, cub.collapsed).V @ Vinv
    return ElementOperators(
        "tet", N, "GL",
        nodes=nodes, V=vdm.V, Vinv=Vinv, Dr=Dr, Ds=Ds, Dt=Dt,
        invM_ref=invM_ref, M_ref=M_ref, face_nodes=face_nodes,
        Vf=Vf, face_offsets=offsets, face_pts2d=pts2d, face_wts=wts,
        face_rst=face_rst, cub=cub, Vq=Vq,
        mass_kind="reference_scaled", nodal_eval=eval_basis)


def build_wedge_operators(N):
    """Two-pass cubature operators for the low-storage wedge.

    The triangle and 1D tensor factors are the primitive data; the expanded
    full-cubature matrices V, Dr3, Ds3, Dt3 realize the same contractions
    elementwise and are what the batched solver paths consume.
    """
    if N < 1:
        raise ValueError("wedge operators need N >= 1")
    cub = element_rule("wedge", N)
    tri_pts = cub.collapsed[::N + 1][:, [0, 2]]  # unique triangle points
    Vtri, Dtri_r, Dtri_t = bas.wedge_tri_basis_eval(N, tri_pts)
    rule1d = gauss_legendre_1d(N + 1)
    V1, dV1 = np.empty((N + 1, N + 1)), np.empty((N + 1, N + 1))
    for j in range(N + 1):
        V1[:, j] = bas.jacobi_p(rule1d.points, 0, 0, j)
        dV1[:, j] = bas.grad_jacobi_p(rule1d.points, 0, 0, j)
    vdm = bas.wedge_orthobasis_eval(N, cub.collapsed)

    def eval_basis(rst):
        return bas.wedge_orthobasis_eval(N, inverse_duffy_map("wedge", rst)).V

    Vf, offsets, pts2d, wts, face_rst = _face_data("wedge", N, "GL", eval_basis)
    return ElementOperators(
        "wedge", N, "GL",
        cub=cub, V=vdm.V, Dr3=vdm.Vr, Ds3=vdm.Vs, Dt3=vdm.Vt,
        Vtri=Vtri, Dtri_r=Dtri_r, Dtri_t=Dtri_t, V1d=V1, D1d=dV1,
        rule1d=rule1d,
        Vf=Vf, face_offsets=offsets, face_pts2d=pts2d, face_wts=wts,
        face_rst=face_rst,
        mass_kind="reference_identity", basis_eval_fn=eval_basis)


def _pyramid_c_coupling(N):
    """Tridiagonal c-direction coupling matrices.

    Mc[n,k]  = int C_n C_k ((1-c)/2) dc
    Mcc[n,k] = int C_n C_k' ((1-c)/2)^2 dc
    Both vanish for k >= n+2 (orthogonality kills them), which keeps every
    cross-level Lagrange evaluation below inside its exactness range.
    """
    quad = gauss_legendre_1d(N + 3)
    c, w = quad.points, quad.weights
    gam = bas._pyramid_c_factors(N)
    C = np.empty((N + 1, len(c)))
    dC = np.empty_like(C)
    for k in range(N + 1):
        pk = bas.jacobi_p(c, 2 * k + 3, 0, N - k)
        dpk = bas.grad_jacobi_p(c, 2 * k + 3, 0, N - k)
        C[k] = gam[k] * bas._pow_half(c, k) * pk
        if k > 0:
            dC[k] = gam[k] * (bas._pow_half(c, k) * dpk
                              - 0.5 * k * bas._pow_half(c, k - 1) * pk)
        else:
            dC[k] = gam[k] * dpk
    half = 0.5 * (1.0 - c)
    Mc = np.einsum("nq,kq,q->nk", C, C, w * half)
    Mcc = np.einsum("nq,kq,q->nk", C, dC, w * half**2)
    # Jacobi orthogonality makes these exact zeros; enforcing it keeps the
    # cross-level Lagrange evaluations inside their exactness range (k <= n+1)
    n_idx, k_idx = np.indices(Mc.shape)
    Mc[np.abs(n_idx - k_idx) > 1] = 0.0
    Mcc[k_idx > n_idx + 1] = 0.0
    return Mc, Mcc


def build_pyramid_operators(N):
    """Quadrature-free weak derivative operators for the pyramid.

    Dr, Ds, Dt are square Np x Np matrices with (Dr u)_lmn equal to the
    exact integral of phi_lmn du/dr over the reference pyramid.  Rows and
    columns are indexed by the semi-nodal flat order (level k outer).  The
    t operator combines the collapsed chain rule with row-point scalings
    (1+a)/2, (1+b)/2 evaluated at the row level nodes.
    """
    if N < 1:
        raise ValueError("pyramid operators need N >= 1")
    ids = bas.pyramid_mode_ids(N)
    rules = bas.pyramid_level_rules(N)
    Np = len(ids)
    Mc, Mcc = _pyramid_c_coupling(N)
    # cross-level Lagrange values/derivatives: lag[k] at level-n nodes
    val = {}
    dval = {}
    for k in range(N + 1):
        for n in range(N + 1):
            L, dL = bas.lagrange_matrices_1d(rules[k].points, rules[n].points)
            val[(k, n)] = L
            dval[(k, n)] = dL
    Dr = np.zeros((Np, Np))
    Ds = np.zeros((Np, Np))
    Dc = np.zeros((Np, Np))
    row_a = np.empty(Np)
    row_b = np.empty(Np)
    for row, (n, l, m) in enumerate(ids):
        wn = rules[n].weights
        row_a[row] = rules[n].points[l]
        row_b[row] = rules[n].points[m]
        for col, (k, i, j) in enumerate(ids):
            if Mc[n, k] == 0.0 and Mcc[n, k] == 0.0:
                continue
            wk = rules[k].weights
            norm = np.sqrt(wn[l] * wn[m] / (wk[i] * wk[j]))
            ai = val[(k, n)][l, i]
            bj = val[(k, n)][m, j]
            dai = dval[(k, n)][l, i]
            dbj = dval[(k, n)][m, j]
            Dr[row, col] = norm * dai * bj * Mc[n, k]
            Ds[row, col] = norm * ai * dbj * Mc[n, k]
            Dc[row, col] = norm * ai * bj * Mcc[n, k]
    Dt = 0.5 * (1 + row_a)[:, None] * Dr + 0.5 * (1 + row_b)[:, None] * Ds + Dc
    cub = element_rule("pyramid", N)
    vdm = bas.pyramid_seminodal_eval(N, cub.collapsed)

    def eval_basis(rst):
        return bas.pyramid_seminodal_eval(N, inverse_duffy_map("pyramid", rst)).V

    Vf, offsets, pts2d, wts, face_rst = _face_data("pyramid", N, "GL", eval_basis)
    # collapsed (a,b) coordinates of the semi-nodal points, c arbitrary
    level_abc = np.column_stack([row_a, row_b, np.zeros(Np)])
    return ElementOperators(
        "pyramid", N, "GL",
        Dr=Dr, Ds=Ds, Dt=Dt, DrT=Dr.T.copy(), DsT=Ds.T.copy(), DtT=Dt.T.copy(),
        Mc=Mc, mode_ids=ids, level_abc=level_abc,
        cub=cub, Vq=vdm.V,
        Vf=Vf, face_offsets=offsets, face_pts2d=pts2d, face_wts=wts,
        face_rst=face_rst,
        mass_kind="diagonal", basis_eval_fn=eval_basis)


def build_operators(elem_type, N, formulation):
    """Operator bundle for one element type under a formulation.

    Only hexahedra depend on the formulation through their nodal basis;
    the other types change only their quadrilateral-face cubature.
    """
    if elem_type == "hex":
        return build_hex_operators(N, formulation)
    if elem_type == "tet":
        # tets have no quadrilateral faces, the formulation changes nothing
        return build_tet_operators(N)
    if elem_type == "wedge":
        ops = build_wedge_operators(N)
    elif elem_type == "pyramid":
        ops = build_pyramid_operators(N)
    else:
        raise ValueError(f"unknown element type {elem_type!r}")
    if formulation != "GL":
        # rebuild face data with Gauss-Lobatto points on quad faces
        Vf, offsets, pts2d, wts, face_rst = _face_data(elem_type, N,
                                                       formulation,
                                                       ops.basis_eval_fn)
        ops.Vf, ops.face_offsets = Vf, offsets
        ops.face_pts2d, ops.face_wts, ops.face_rst = pts2d, wts, face_rst
        ops.formulation = formulation
    return ops


def apply_mass_inverse(ops, geo_mass, residual):
    """Apply the element mass inverse to per-element residual vectors.

    residual: (..., Np).  geo_mass is the per-element geometric data of the
    representation: diagonal vector (hex, pyramid), constant J (tet), or
    None (wedge, identity by the low-storage construction).
    """
    if ops.mass_kind == "diagonal":
        if np.any(geo_mass == 0):
            raise ValueError("zero mass diagonal entry")
        return residual / geo_mass
    if ops.mass_kind == "reference_scaled":
        return np.einsum("ij,...j->...i", ops.invM_ref, residual) / geo_mass[..., None]
    if ops.mass_kind == "reference_identity":
        return residual
    raise ValueError(ops.mass_kind)
