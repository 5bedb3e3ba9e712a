"""Reference elements, Duffy collapse maps, vertex shape functions and
physical mapping geometry for vertex-mapped hex, wedge, pyramid and tet.

Conventions (all bi-unit):
  hex      [-1,1]^3, 8 vertices, 6 quad faces
  tet      vertices (-1,-1,-1), (1,-1,-1), (-1,1,-1), (-1,-1,1)
  wedge    triangle in (r,t) with vertices (-1,-1), (1,-1), (-1,1),
           extruded along s in [-1,1]
  pyramid  base [-1,1]^2 at t=-1, apex (-1,-1,1) (collapsed corner)

Face vertex orderings are counterclockwise viewed from outside the element,
so the bilinear/affine face tangents give outward normals directly.  Pyramid
vertex functions are rational in (r,s,t); every evaluation here routes
through the collapsed (a,b,c) coordinates where they are polynomial, with the
apex handled as the t -> 1 limit a = b = -1.
"""

import numpy as np

__all__ = [
    "ReferenceElement",
    "GeometricFactors",
    "REFERENCE_ELEMENTS",
    "ELEMENT_TYPES",
    "duffy_map",
    "inverse_duffy_map",
    "vertex_shape_functions",
    "build_geometric_factors",
    "geometric_factors_batch",
    "face_quadrature_points",
    "face_geometry_batch",
    "InvalidElementError",
]

ELEMENT_TYPES = ("hex", "wedge", "pyramid", "tet")


class InvalidElementError(ValueError):
    """Raised when a vertex map is not invertible at a cubature point."""


class ReferenceElement:
    def __init__(self, elem_type, vertices, faces, volume):
        self.elem_type = elem_type
        self.vertices = np.asarray(vertices, dtype=float)
        self.faces = faces  # list of (face_type, vertex index tuple)
        self.reference_volume = volume
        self.reference_surface_area = sum(
            _flat_face_area(self.vertices[list(ix)]) for _, ix in faces
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)


def _flat_face_area(v):
    if len(v) == 3:
        return 0.5 * np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0]))
    # planar quad split into two triangles
    return (0.5 * np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0]))
            + 0.5 * np.linalg.norm(np.cross(v[2] - v[0], v[3] - v[0])))


REFERENCE_ELEMENTS = {
    "hex": ReferenceElement(
        "hex",
        [[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
         [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]],
        [("quad", (0, 4, 7, 3)),   # r = -1
         ("quad", (1, 2, 6, 5)),   # r = +1
         ("quad", (0, 1, 5, 4)),   # s = -1
         ("quad", (2, 3, 7, 6)),   # s = +1
         ("quad", (0, 3, 2, 1)),   # t = -1
         ("quad", (4, 5, 6, 7))],  # t = +1
        8.0,
    ),
    "tet": ReferenceElement(
        "tet",
        [[-1, -1, -1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
        [("tri", (0, 2, 1)),   # t = -1
         ("tri", (0, 1, 3)),   # s = -1
         ("tri", (1, 2, 3)),   # r + s + t = -1
         ("tri", (0, 3, 2))],  # r = -1
        4.0 / 3.0,
    ),
    "wedge": ReferenceElement(
        "wedge",
        [[-1, -1, -1], [1, -1, -1], [-1, -1, 1],
         [-1, 1, -1], [1, 1, -1], [-1, 1, 1]],
        [("tri", (0, 1, 2)),       # s = -1
         ("tri", (3, 5, 4)),       # s = +1
         ("quad", (0, 3, 4, 1)),   # t = -1
         ("quad", (0, 2, 5, 3)),   # r = -1
         ("quad", (1, 4, 5, 2))],  # r + t = 0
        4.0,
    ),
    "pyramid": ReferenceElement(
        "pyramid",
        [[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1], [-1, -1, 1]],
        [("quad", (0, 3, 2, 1)),  # t = -1 base
         ("tri", (0, 1, 4)),      # s = -1
         ("tri", (1, 2, 4)),      # r + t = 0
         ("tri", (2, 3, 4)),      # s + t = 0
         ("tri", (3, 0, 4))],     # r = -1
        8.0 / 3.0,
    ),
}


# ------------------------------------------------------------------
# Duffy collapse maps between the bi-unit cube (a,b,c) and the element
# ------------------------------------------------------------------

def duffy_map(elem_type, abc):
    """Map points of the bi-unit cube onto the reference element.

    Identity for the hex; the standard collapse for tet, wedge and pyramid.
    """
    abc = np.atleast_2d(np.asarray(abc, dtype=float))
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    if elem_type == "hex":
        return abc.copy()
    if elem_type == "tet":
        r = (1 + a) * (1 - b) * (1 - c) / 4.0 - 1.0
        s = (1 + b) * (1 - c) / 2.0 - 1.0
        t = c
    elif elem_type == "wedge":
        r = (1 + a) * (1 - c) / 2.0 - 1.0
        s = b
        t = c
    elif elem_type == "pyramid":
        r = (1 + a) * (1 - c) / 2.0 - 1.0
        s = (1 + b) * (1 - c) / 2.0 - 1.0
        t = c
    else:
        raise ValueError(f"unknown element type {elem_type!r}")
    return np.column_stack([r, s, t])


def inverse_duffy_map(elem_type, rst, tol=1e-13):
    """Collapsed (a,b,c) preimages of reference-element points.

    Collapsed coordinates at the singular sets (tet b,c = 1 lines, wedge and
    pyramid t = 1) are assigned their limiting value -1, which is where every
    basis evaluation here is continuous.
    """
    rst = np.atleast_2d(np.asarray(rst, dtype=float))
    r, s, t = rst[:, 0], rst[:, 1], rst[:, 2]
    if elem_type == "hex":
        return rst.copy()
    if elem_type == "tet":
        den_b = 1.0 - t
        b = np.where(np.abs(den_b) > tol, 2 * (1 + s) / np.where(den_b == 0, 1, den_b) - 1, -1.0)
        den_a = -(s + t)
        a = np.where(np.abs(den_a) > tol, 2 * (1 + r) / np.where(den_a == 0, 1, den_a) - 1, -1.0)
        return np.column_stack([a, b, t])
    if elem_type == "wedge":
        den = 1.0 - t
        a = np.where(np.abs(den) > tol, 2 * (1 + r) / np.where(den == 0, 1, den) - 1, -1.0)
        return np.column_stack([a, s, t])
    if elem_type == "pyramid":
        den = 1.0 - t
        safe = np.where(den == 0, 1, den)
        a = np.where(np.abs(den) > tol, 2 * (1 + r) / safe - 1, -1.0)
        b = np.where(np.abs(den) > tol, 2 * (1 + s) / safe - 1, -1.0)
        return np.column_stack([a, b, t])
    raise ValueError(f"unknown element type {elem_type!r}")


def _duffy_jacobian_det(elem_type, abc):
    """det d(r,s,t)/d(a,b,c) of the collapse map."""
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    if elem_type == "hex":
        return np.ones_like(a)
    if elem_type == "tet":
        return (1 - b) * (1 - c) ** 2 / 8.0
    if elem_type == "wedge":
        return (1 - c) / 2.0
    if elem_type == "pyramid":
        return ((1 - c) / 2.0) ** 2
    raise ValueError(elem_type)


# ------------------------------------------------------------------
# Vertex shape functions (in collapsed coordinates they are polynomial)
# ------------------------------------------------------------------

def _hex_corner_signs():
    return np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)


def _shape_abc(elem_type, abc):
    """Vertex shape functions evaluated at collapsed points, (npts, nv)."""
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    if elem_type == "hex":
        signs = _hex_corner_signs()
        return np.prod(1 + abc[:, None, :] * signs[None, :, :], axis=2) / 8.0
    if elem_type == "tet":
        # barycentric functions composed with the collapse
        lam1 = (1 + a) * (1 - b) * (1 - c) / 8.0
        lam2 = (1 + b) * (1 - c) / 4.0
        lam3 = (1 + c) / 2.0
        lam0 = 1.0 - lam1 - lam2 - lam3
        return np.column_stack([lam0, lam1, lam2, lam3])
    if elem_type == "wedge":
        mu1 = (1 + a) * (1 - c) / 4.0
        mu2 = (1 + c) / 2.0
        mu0 = 1.0 - mu1 - mu2
        sm, sp = (1 - b) / 2.0, (1 + b) / 2.0
        return np.column_stack([mu0 * sm, mu1 * sm, mu2 * sm,
                                mu0 * sp, mu1 * sp, mu2 * sp])
    if elem_type == "pyramid":
        am, ap = (1 - a) / 2.0, (1 + a) / 2.0
        bm, bp = (1 - b) / 2.0, (1 + b) / 2.0
        cm, cp = (1 - c) / 2.0, (1 + c) / 2.0
        return np.column_stack([am * bm * cm, ap * bm * cm, ap * bp * cm,
                                am * bp * cm, cp])
    raise ValueError(elem_type)


def _shape_grad_abc(elem_type, abc):
    """d(shape)/d(a,b,c) at collapsed points, (npts, nv, 3)."""
    n = len(abc)
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    if elem_type == "hex":
        signs = _hex_corner_signs()
        out = np.empty((n, 8, 3))
        fac = (1 + abc[:, None, :] * signs[None, :, :]) / 2.0
        for d in range(3):
            g = signs[None, :, d] / 2.0
            for o in range(3):
                if o != d:
                    g = g * fac[:, :, o]
            out[:, :, d] = g
        return out
    if elem_type == "tet":
        out = np.zeros((n, 4, 3))
        out[:, 1, 0] = (1 - b) * (1 - c) / 8.0
        out[:, 1, 1] = -(1 + a) * (1 - c) / 8.0
        out[:, 1, 2] = -(1 + a) * (1 - b) / 8.0
        out[:, 2, 1] = (1 - c) / 4.0
        out[:, 2, 2] = -(1 + b) / 4.0
        out[:, 3, 2] = 0.5
        out[:, 0, :] = -(out[:, 1, :] + out[:, 2, :] + out[:, 3, :])
        return out
    if elem_type == "wedge":
        out = np.zeros((n, 6, 3))
        mu1 = (1 + a) * (1 - c) / 4.0
        mu2 = (1 + c) / 2.0
        mu0 = 1.0 - mu1 - mu2
        dmu1 = np.stack([(1 - c) / 4.0, np.zeros(n), -(1 + a) / 4.0], axis=1)
        dmu2 = np.stack([np.zeros(n), np.zeros(n), np.full(n, 0.5)], axis=1)
        dmu0 = -(dmu1 + dmu2)
        sm, sp = (1 - b) / 2.0, (1 + b) / 2.0
        for i, (mu, dmu) in enumerate([(mu0, dmu0), (mu1, dmu1), (mu2, dmu2)]):
            out[:, i, :] = dmu * sm[:, None]
            out[:, i, 1] -= mu / 2.0
            out[:, i + 3, :] = dmu * sp[:, None]
            out[:, i + 3, 1] += mu / 2.0
        return out
    if elem_type == "pyramid":
        out = np.zeros((n, 5, 3))
        am, ap = (1 - a) / 2.0, (1 + a) / 2.0
        bm, bp = (1 - b) / 2.0, (1 + b) / 2.0
        cm = (1 - c) / 2.0
        pairs = [(am, bm, -0.5, -0.5), (ap, bm, 0.5, -0.5),
                 (ap, bp, 0.5, 0.5), (am, bp, -0.5, 0.5)]
        for i, (fa, fb, da, db) in enumerate(pairs):
            out[:, i, 0] = da * fb * cm
            out[:, i, 1] = fa * db * cm
            out[:, i, 2] = -fa * fb / 2.0
        out[:, 4, 2] = 0.5
        return out
    raise ValueError(elem_type)


def _abc_jacobian(elem_type, abc):
    """d(r,s,t)/d(a,b,c) of the collapse map, (npts, 3, 3)."""
    n = len(abc)
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    J = np.zeros((n, 3, 3))
    if elem_type == "hex":
        J[:] = np.eye(3)
        return J
    if elem_type == "tet":
        J[:, 0, 0] = (1 - b) * (1 - c) / 4.0
        J[:, 0, 1] = -(1 + a) * (1 - c) / 4.0
        J[:, 0, 2] = -(1 + a) * (1 - b) / 4.0
        J[:, 1, 1] = (1 - c) / 2.0
        J[:, 1, 2] = -(1 + b) / 2.0
        J[:, 2, 2] = 1.0
        return J
    if elem_type == "wedge":
        J[:, 0, 0] = (1 - c) / 2.0
        J[:, 0, 2] = -(1 + a) / 2.0
        J[:, 1, 1] = 1.0
        J[:, 2, 2] = 1.0
        return J
    if elem_type == "pyramid":
        J[:, 0, 0] = (1 - c) / 2.0
        J[:, 0, 2] = -(1 + a) / 2.0
        J[:, 1, 1] = (1 - c) / 2.0
        J[:, 1, 2] = -(1 + b) / 2.0
        J[:, 2, 2] = 1.0
        return J
    raise ValueError(elem_type)


def vertex_shape_functions(elem_type, rst):
    """Vertex shape function values at reference points, (npts, nv).

    Partition of unity with the Kronecker property at vertices.  Pyramid
    points at the apex are evaluated by the collapsed-coordinate limit.
    """
    rst = np.atleast_2d(np.asarray(rst, dtype=float))
    abc = inverse_duffy_map(elem_type, rst)
    return _shape_abc(elem_type, abc)


def shape_gradients_rst(elem_type, abc):
    """Gradients of vertex shape functions with respect to (r,s,t) at
    collapsed points, (npts, nv, 3).

    Hex, tet and wedge vertex functions are polynomial in (r,s,t) and are
    differentiated directly, so collapsed edges (c = 1) are fine.  The
    rational pyramid functions go through the collapsed chain rule and
    require c < 1; pyramid geometry is only ever sampled at such points.
    """
    n = len(abc)
    if elem_type == "hex":
        return _shape_grad_abc("hex", abc)
    if elem_type == "tet":
        g = np.empty((n, 4, 3))
        g[:, 0] = [-0.5, -0.5, -0.5]
        g[:, 1] = [0.5, 0.0, 0.0]
        g[:, 2] = [0.0, 0.5, 0.0]
        g[:, 3] = [0.0, 0.0, 0.5]
        return g
    if elem_type == "wedge":
        rst = duffy_map("wedge", abc)
        s = rst[:, 1]
        mu = np.column_stack([-(rst[:, 0] + rst[:, 2]) / 2.0,
                              (1 + rst[:, 0]) / 2.0,
                              (1 + rst[:, 2]) / 2.0])
        dmu = np.array([[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]])  # d/d(r,t)
        out = np.zeros((n, 6, 3))
        sm, sp = (1 - s) / 2.0, (1 + s) / 2.0
        for i in range(3):
            out[:, i, 0] = dmu[i, 0] * sm
            out[:, i, 2] = dmu[i, 1] * sm
            out[:, i, 1] = -mu[:, i] / 2.0
            out[:, i + 3, 0] = dmu[i, 0] * sp
            out[:, i + 3, 2] = dmu[i, 1] * sp
            out[:, i + 3, 1] = mu[:, i] / 2.0
        return out
    if elem_type == "pyramid":
        g_abc = _shape_grad_abc("pyramid", abc)
        dd = _abc_jacobian("pyramid", abc)      # d(rst)/d(abc)
        dd_inv = np.linalg.inv(dd)              # d(abc)/d(rst)
        return np.einsum("pva,par->pvr", g_abc, dd_inv)
    raise ValueError(elem_type)


def _shape_hessians_rst(elem_type, abc):
    """Second derivatives d2(shape)/d(rst)d(rst), used for grad J.

    Only implemented for element types whose shape functions are polynomial
    in (r,s,t); the wedge is the only consumer (LSC basis needs grad J).
    """
    if elem_type not in ("hex", "tet", "wedge"):
        raise NotImplementedError(elem_type)
    rst = duffy_map(elem_type, abc)
    n = len(rst)
    r, s, t = rst[:, 0], rst[:, 1], rst[:, 2]
    if elem_type == "tet":
        return np.zeros((n, 4, 3, 3))
    if elem_type == "wedge":
        # shape = mu_i(r,t) * (1 -/+ s)/2 with mu linear: only mixed
        # (r,s) and (t,s) second derivatives survive.
        out = np.zeros((n, 6, 3, 3))
        dmu = np.array([[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]])  # d(mu_i)/d(r,t)
        for i in range(3):
            for (d, md) in ((0, dmu[i, 0]), (2, dmu[i, 1])):
                out[:, i, d, 1] = -md / 2.0
                out[:, i, 1, d] = -md / 2.0
                out[:, i + 3, d, 1] = md / 2.0
                out[:, i + 3, 1, d] = md / 2.0
        return out
    # hex: shape = prod (1 + x_d v_d)/2, second derivative picks two factors
    signs = _hex_corner_signs()
    out = np.zeros((n, 8, 3, 3))
    fac = (1 + rst[:, None, :] * signs[None, :, :]) / 2.0
    for d1 in range(3):
        for d2 in range(3):
            if d1 == d2:
                continue
            g = signs[None, :, d1] * signs[None, :, d2] / 4.0
            for o in range(3):
                if o != d1 and o != d2:
                    g = g * fac[:, :, o]
            out[:, :, d1, d2] = g
    return out


# ------------------------------------------------------------------
# Physical geometry
# ------------------------------------------------------------------

class GeometricFactors:
    """Per-element mapping data at volume and face cubature points.

    J and rst_xyz are sampled at the volume points; Js and outward unit
    normals at the face points (one block per face).  gradJ holds the
    physical gradient of J at volume points and is populated for wedges
    only.  For wedges, J is additionally sampled at face points (J_face)
    for the low-storage basis scaling.
    """

    def __init__(self, elem_type, x, J, rst_xyz, Js, normals, x_face,
                 gradJ=None, J_face=None):
        self.elem_type = elem_type
        self.x = x
        self.J = J
        self.rst_xyz = rst_xyz
        self.Js = Js
        self.normals = normals
        self.x_face = x_face
        self.gradJ = gradJ
        self.J_face = J_face


def _map_jacobian_batch(elem_type, verts, abc):
    """F = dx/d(rst) for a batch of elements, (K, npts, 3, 3)."""
    grads = shape_gradients_rst(elem_type, abc)  # (npts, nv, 3)
    return np.einsum("kvx,pvr->kpxr", verts, grads)


def geometric_factors_batch(elem_type, verts, abc, label="element"):
    """Volume mapping data for a batch of vertex-mapped elements.

    verts: (K, nv, 3) physical vertex coordinates
    abc:   (npts, 3) collapsed evaluation points (interior)
    Returns x (K,npts,3), J (K,npts), rst_xyz (K,npts,3,3), and for wedges
    gradJ (K,npts,3).
    """
    verts = np.asarray(verts, dtype=float)
    shape = _shape_abc(elem_type, abc)
    x = np.einsum("kvx,pv->kpx", verts, shape)
    F = _map_jacobian_batch(elem_type, verts, abc)
    J = np.linalg.det(F)
    if np.any(J <= 0):
        bad = np.argwhere(J <= 0)
        k = int(bad[0, 0])
        raise InvalidElementError(
            f"nonpositive Jacobian in {elem_type} {label} {k} "
            f"(min J = {J.min():.3e})")
    G = np.linalg.inv(F)  # rows: d(rst)/d(xyz)... G[k,p,r,x] = d r / d x
    gradJ = None
    if elem_type == "wedge":
        # Jacobi's formula: dJ/dr_c = J * tr(F^-1 dF/dr_c), with dF/dr_c
        # assembled from the shape function Hessians (exact, no differencing).
        hess = _shape_hessians_rst(elem_type, abc)  # (npts, nv, 3, 3)
        dF = np.einsum("kvx,pvrc->kpxrc", verts, hess)
        dJ_rst = J[..., None] * np.einsum("kprx,kpxrc->kpc", G, dF)
        gradJ = np.einsum("kpc,kpcx->kpx", dJ_rst, G)
    return x, J, G, gradJ


# face-type reference parametrizations: bi-unit triangle (xi, eta) with
# vertices (-1,-1), (1,-1), (-1,1); bi-unit square (xi, eta)

def _face_shape2d(face_type, pts):
    xi, eta = pts[:, 0], pts[:, 1]
    if face_type == "tri":
        return np.column_stack([-(xi + eta) / 2.0, (1 + xi) / 2.0, (1 + eta) / 2.0])
    return np.column_stack([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                            (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]) / 4.0


def _face_shape2d_grad(face_type, pts):
    xi, eta = pts[:, 0], pts[:, 1]
    n = len(pts)
    if face_type == "tri":
        g = np.zeros((n, 3, 2))
        g[:, 0] = [-0.5, -0.5]
        g[:, 1] = [0.5, 0.0]
        g[:, 2] = [0.0, 0.5]
        return g
    g = np.empty((n, 4, 2))
    g[:, 0, 0] = -(1 - eta) / 4.0
    g[:, 0, 1] = -(1 - xi) / 4.0
    g[:, 1, 0] = (1 - eta) / 4.0
    g[:, 1, 1] = -(1 + xi) / 4.0
    g[:, 2, 0] = (1 + eta) / 4.0
    g[:, 2, 1] = (1 + xi) / 4.0
    g[:, 3, 0] = -(1 + eta) / 4.0
    g[:, 3, 1] = (1 - xi) / 4.0
    return g


def face_quadrature_points(elem_type, face, pts2d):
    """Reference (r,s,t) coordinates of 2D face-rule points on a face.

    All reference faces are planar with parallelogram quads, so interpolating
    the reference vertex coordinates with the 2D face shape functions is
    exact.
    """
    ref = REFERENCE_ELEMENTS[elem_type]
    face_type, ix = ref.faces[face]
    shape = _face_shape2d(face_type, pts2d)
    return shape @ ref.vertices[list(ix)]


def face_geometry_batch(elem_type, verts, face, pts2d):
    """Surface Jacobian, outward unit normals and positions at face points.

    verts: (K, nv, 3).  Returns x (K,nq,3), Js (K,nq), normals (K,nq,3).
    Face vertex order is CCW from outside, so xi x eta tangents point
    outward.
    """
    ref = REFERENCE_ELEMENTS[elem_type]
    face_type, ix = ref.faces[face]
    fverts = np.asarray(verts, dtype=float)[:, list(ix), :]  # (K, nfv, 3)
    shape = _face_shape2d(face_type, pts2d)
    grad = _face_shape2d_grad(face_type, pts2d)
    x = np.einsum("kvx,pv->kpx", fverts, shape)
    t1 = np.einsum("kvx,pv->kpx", fverts, grad[:, :, 0])
    t2 = np.einsum("kvx,pv->kpx", fverts, grad[:, :, 1])
    nvec = np.cross(t1, t2)
    Js = np.linalg.norm(nvec, axis=2)
    normals = nvec / Js[..., None]
    return x, Js, normals


def build_geometric_factors(elem_type, verts, volume_abc, face_rules):
    """Single-element bundle of mapping data.

    face_rules: list (one per face) of 2D rule point arrays on the reference
    face domains.  Raises InvalidElementError on nonpositive J.
    """
    verts = np.asarray(verts, dtype=float)[None]
    x, J, G, gradJ = geometric_factors_batch(elem_type, verts, volume_abc)
    Js, normals, x_face, J_face = [], [], [], []
    for face, pts2d in enumerate(face_rules):
        xf, js, nrm = face_geometry_batch(elem_type, verts, face, pts2d)
        Js.append(js[0])
        normals.append(nrm[0])
        x_face.append(xf[0])
        if elem_type == "wedge":
            rst_f = face_quadrature_points(elem_type, face, pts2d)
            abc_f = inverse_duffy_map(elem_type, rst_f)
            Ff = _map_jacobian_batch(elem_type, verts, abc_f)
            J_face.append(np.linalg.det(Ff)[0])
    return GeometricFactors(
        elem_type, x[0], J[0], G[0], Js, normals, x_face,
        gradJ=None if gradJ is None else gradJ[0],
        J_face=J_face if elem_type == "wedge" else None)
