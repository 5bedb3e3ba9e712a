"""Semi-discrete DG right-hand side for the first-order acoustic system on
hybrid meshes, under the SEM or GL formulation.

The element-type forms follow the stable-basis table: tetrahedra and
hexahedra use the strong form under both formulations, wedges always use
the skew form (their low-storage rational basis is never exactly
integrable), and pyramids use the strong form under GL but the skew form
under SEM quadrature.

State layout: dict elem_type -> array (K, 4, Np) with fields ordered
(p, u1, u2, u3).  A-action and mass are kept separate so the generalized
eigenproblem A v = lambda M v can be assembled; compute_rhs applies
M^-1 A with the material scalings folded in.
"""

import numpy as np
import scipy.sparse as sp

from . import basis as bas
from . import operators as ops_mod
from .quadrature import element_rule
from .refelem import (REFERENCE_ELEMENTS, face_geometry_batch,
                      geometric_factors_batch, inverse_duffy_map)

__all__ = [
    "Formulation",
    "TABLE_FORMS",
    "flux_penalties",
    "Discretization",
    "discrete_energy",
    "zero_state",
]

TABLE_FORMS = {
    "SEM": {"tet": "strong", "pyramid": "skew", "wedge": "skew", "hex": "strong"},
    "GL": {"tet": "strong", "pyramid": "strong", "wedge": "skew", "hex": "strong"},
}

FIELDS = 4  # p, u1, u2, u3


class Formulation:
    """Energy-stable formulation: SEM or GL hexahedral nodal basis, with
    the per-element-type variational form fixed by the stability table.
    No other combination is constructible here; the testing hooks on
    Discretization bypass this deliberately."""

    def __init__(self, kind):
        if kind not in TABLE_FORMS:
            raise ValueError(f"formulation must be 'SEM' or 'GL', got {kind!r}")
        self.kind = kind
        self.forms = dict(TABLE_FORMS[kind])

    def form(self, elem_type):
        return self.forms[elem_type]

    def __repr__(self):
        return f"Formulation({self.kind!r})"


def flux_penalties(rho_m, c_m, rho_p, c_p):
    """Upwind penalty pair (tau_p, tau_u) from the two sides' impedances.

    tau_p = 1/avg(rho c), tau_u = avg(rho c); their product is always 1.
    """
    if min(rho_m, c_m, rho_p, c_p) <= 0:
        raise ValueError("material parameters must be positive")
    avg = 0.5 * (rho_m * c_m + rho_p * c_p)
    return 1.0 / avg, avg


def zero_state(disc):
    return {t: np.zeros((disc.n_elems[t], FIELDS, disc.ops[t].Np))
            for t in disc.types}


class _TypeData:
    """Batched geometric and coupling data for one element type."""

    __slots__ = ("verts", "J", "G", "gJfac", "J_row", "wJs", "normals",
                 "x_face", "invsqrtJ_face", "tau_p", "tau_u", "x_nodes",
                 "w3", "cub_w", "cub_x", "cub_J", "cub_sqrtJ", "over_w",
                 "over_V", "over_x", "over_J", "over_sqrtJ", "rhoc", "diam")

    def __init__(self):
        self.w3 = None


class Discretization:
    """Precomputed operators, geometry and face coupling for one mesh,
    polynomial order and formulation.

    forms_override replaces the per-type variational form (testing and
    verification only); penalty_scale multiplies both flux penalties
    (0 gives the central-flux variant).
    """

    def __init__(self, mesh, N, formulation, forms_override=None,
                 penalty_scale=1.0, forcing=None):
        if isinstance(formulation, str):
            formulation = Formulation(formulation)
        self.mesh = mesh
        self.N = N
        self.formulation = formulation
        self.forms = dict(formulation.forms)
        if forms_override:
            self.forms.update(forms_override)
        self.penalty_scale = penalty_scale
        self.forcing = forcing
        self.types = mesh.elem_types
        self.ops = {t: ops_mod.build_operators(t, N, formulation.kind)
                    for t in self.types}
        self.n_elems = {t: len(mesh.blocks[t]) for t in self.types}
        self.data = {}
        for t in self.types:
            self._build_type_data(t)
        self._build_gather()
        self._build_dof_layout()

    # ------------------------------------------------------------------
    # setup
    # ------------------------------------------------------------------

    def _volume_points(self, t):
        """Collapsed points where volume geometric factors live."""
        op = self.ops[t]
        if t == "hex":
            n1 = op.nodes1d
            i, j, k = np.meshgrid(n1, n1, n1, indexing="ij")
            return np.column_stack([i.ravel(), j.ravel(), k.ravel()])
        if t == "tet":
            return np.array([[-0.5, -0.5, -0.5]])
        if t == "wedge":
            return op.cub.collapsed
        if t == "pyramid":
            return op.level_abc
        raise ValueError(t)

    def _build_type_data(self, t):
        op = self.ops[t]
        d = _TypeData()
        verts = self.mesh.element_vertices(t)
        d.verts = verts
        d.diam = np.linalg.norm(
            verts.max(axis=1) - verts.min(axis=1), axis=1)
        pts = self._volume_points(t)
        x, J, G, gradJ = geometric_factors_batch(t, verts, pts, label=t)
        d.J, d.G = J, G
        d.gJfac = None
        if t == "wedge":
            d.gJfac = -gradJ / (2.0 * J[..., None])
        d.J_row = J if t == "pyramid" else None
        d.x_nodes = x if t == "hex" else None
        if t == "hex":
            d.w3 = np.einsum("i,j,k->ijk", op.weights1d, op.weights1d,
                             op.weights1d).ravel()

        # face data, concatenated over faces
        K = self.n_elems[t]
        total = op.face_offsets[-1]
        d.wJs = np.empty((K, total))
        d.normals = np.empty((K, total, 3))
        d.x_face = np.empty((K, total, 3))
        for f, (p2, w2) in enumerate(zip(op.face_pts2d, op.face_wts)):
            sl = slice(op.face_offsets[f], op.face_offsets[f + 1])
            xf, Js, nrm = face_geometry_batch(t, verts, f, p2)
            d.x_face[:, sl] = xf
            d.wJs[:, sl] = w2[None, :] * Js
            d.normals[:, sl] = nrm
        if t == "wedge":
            abc_f = inverse_duffy_map(t, op.face_rst)
            _, Jf, _, _ = geometric_factors_batch(t, verts, abc_f, label=t)
            d.invsqrtJ_face = 1.0 / np.sqrt(Jf)
        else:
            d.invsqrtJ_face = None

        # cubature data for projection, error norms and forcing
        cub = element_rule(t, self.N)
        d.cub_w = cub.weights
        cx, cJ, _, _ = geometric_factors_batch(t, verts, cub.collapsed, label=t)
        d.cub_x, d.cub_J = cx, cJ
        d.cub_sqrtJ = np.sqrt(cJ) if t == "wedge" else None
        over = element_rule(t, self.N + 2)
        d.over_w = over.weights
        d.over_V = self._basis_values(t, over.collapsed)
        ox, oJ, _, _ = geometric_factors_batch(t, verts, over.collapsed, label=t)
        d.over_x, d.over_J = ox, oJ
        d.over_sqrtJ = np.sqrt(oJ) if t == "wedge" else None

        mat = self.mesh.materials[t]
        d.rhoc = mat[:, 0] * np.sqrt(mat[:, 1] / mat[:, 0])
        self.data[t] = d

    def _basis_values(self, t, abc):
        """Coefficient basis values at collapsed points (nq, Np)."""
        op = self.ops[t]
        N = self.N
        if t == "hex":
            from .basis import hex_nodal_eval
            from .refelem import duffy_map
            flavor = "GL" if self.formulation.kind == "GL" else "SEM"
            return hex_nodal_eval(N, flavor, duffy_map("hex", abc)).V
        if t == "tet":
            return bas.tet_orthobasis_eval(N, abc).V @ op.Vinv
        if t == "wedge":
            return bas.wedge_orthobasis_eval(N, abc).V
        if t == "pyramid":
            return bas.pyramid_seminodal_eval(N, abc).V
        raise ValueError(t)

    def _cub_values(self, t):
        if not hasattr(self.ops[t], "_cubV"):
            self.ops[t]._cubV = self._basis_values(
                t, element_rule(t, self.N).collapsed)
        return self.ops[t]._cubV

    def _build_gather(self):
        """Global face-point gather: for point q of my face, the flat index
        of the neighbor's coincident face point (own index on boundary).

        The permutation is located geometrically with tolerance
        1e-10 * element diameter; both sides carry the same symmetric rule
        on a shared face so the point sets coincide.
        """
        bases = {}
        off = 0
        for t in self.types:
            bases[t] = off
            off += self.n_elems[t] * self.ops[t].face_offsets[-1]
        self.trace_size = off
        gather = np.arange(off)
        bnd = np.zeros(off, dtype=bool)
        tau_p = np.empty(off)
        tau_u = np.empty(off)

        def flat(t, k, sl):
            tot = self.ops[t].face_offsets[-1]
            return bases[t] + k * tot + np.arange(sl.start, sl.stop)

        for t in self.types:
            op = self.ops[t]
            d = self.data[t]
            links = self.mesh.face_links[t]
            for k in range(self.n_elems[t]):
                for f in range(len(REFERENCE_ELEMENTS[t].faces)):
                    sl = slice(op.face_offsets[f], op.face_offsets[f + 1])
                    me = flat(t, k, sl)
                    link = links[k][f]
                    if link.is_boundary:
                        bnd[me] = True
                        tp, tu = flux_penalties(
                            self.mesh.materials[t][k, 0], _soundspeed(self.mesh, t, k),
                            self.mesh.materials[t][k, 0], _soundspeed(self.mesh, t, k))
                        tau_p[me], tau_u[me] = tp, tu
                        continue
                    t2, k2, f2 = link.neighbor
                    op2 = self.ops[t2]
                    sl2 = slice(op2.face_offsets[f2], op2.face_offsets[f2 + 1])
                    X = d.x_face[k, sl]
                    Y = self.data[t2].x_face[k2, sl2]
                    if len(X) != len(Y):
                        raise ValueError(
                            f"face point count mismatch {t}/{t2} ({len(X)} vs {len(Y)})")
                    d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
                    perm = np.argmin(d2, axis=1)
                    tol = 1e-10 * max(d.diam[k], self.data[t2].diam[k2])
                    if np.sqrt(d2[np.arange(len(X)), perm]).max() > tol:
                        raise ValueError(
                            f"face cubature points do not coincide between "
                            f"{t}[{k}] face {f} and {t2}[{k2}] face {f2}")
                    me_all = flat(t, k, sl)
                    gather[me_all] = flat(t2, k2, sl2)[perm]
                    tp, tu = flux_penalties(
                        self.mesh.materials[t][k, 0], _soundspeed(self.mesh, t, k),
                        self.mesh.materials[t2][k2, 0], _soundspeed(self.mesh, t2, k2))
                    tau_p[me_all], tau_u[me_all] = tp, tu
        self.trace_bases = bases
        self.gather_idx = gather
        self.bnd_mask = bnd
        for t in self.types:
            d = self.data[t]
            tot = self.ops[t].face_offsets[-1]
            sl = slice(bases[t], bases[t] + self.n_elems[t] * tot)
            d.tau_p = tau_p[sl].reshape(self.n_elems[t], tot)
            d.tau_u = tau_u[sl].reshape(self.n_elems[t], tot)

    def _build_dof_layout(self):
        self.dof_base = {}
        off = 0
        for t in self.types:
            self.dof_base[t] = off
            off += self.n_elems[t] * FIELDS * self.ops[t].Np
        self.n_dof = off

    # ------------------------------------------------------------------
    # traces and fluxes
    # ------------------------------------------------------------------

    def compute_traces(self, state):
        """Own-side traces at all face cubature points, flattened per field.

        Returns (4, trace_size).  Wedge traces carry the 1/sqrt(J) physical
        scaling of the low-storage basis.
        """
        out = np.empty((FIELDS, self.trace_size))
        for t in self.types:
            op = self.ops[t]
            d = self.data[t]
            tr = state[t] @ op.Vf.T  # (K, 4, total_fp)
            if t == "wedge":
                tr = tr * d.invsqrtJ_face[:, None, :]
            tot = op.face_offsets[-1]
            base = self.trace_bases[t]
            out[:, base:base + self.n_elems[t] * tot] = (
                tr.transpose(1, 0, 2).reshape(FIELDS, -1))
        return out

    def _exterior_traces(self, traces):
        """Neighbor traces at my face points; mirror ghost on the boundary
        (p+ = -p-, u+ = u-) enforces the free-surface condition p = 0."""
        ext = traces[:, self.gather_idx]
        ext[0, self.bnd_mask] = -traces[0, self.bnd_mask]
        ext[1:, self.bnd_mask] = traces[1:, self.bnd_mask]
        return ext

    def _surface_residual(self, t, traces, ext):
        """Integrated surface flux contributions for all fields, (K,4,Np)."""
        op = self.ops[t]
        d = self.data[t]
        K = self.n_elems[t]
        tot = op.face_offsets[-1]
        base = self.trace_bases[t]
        sl = slice(base, base + K * tot)
        own = traces[:, sl].reshape(FIELDS, K, tot).transpose(1, 0, 2)
        oth = ext[:, sl].reshape(FIELDS, K, tot).transpose(1, 0, 2)
        n = d.normals
        dp = oth[:, 0] - own[:, 0]
        un_own = np.einsum("kqd,kdq->kq", n, own[:, 1:])
        un_oth = np.einsum("kqd,kdq->kq", n, oth[:, 1:])
        dun = un_oth - un_own
        tau_p = self.penalty_scale * d.tau_p
        tau_u = self.penalty_scale * d.tau_u
        if self.forms[t] == "skew":
            flux_p = 0.5 * tau_p * dp - 0.5 * (un_oth + un_own)
        else:
            flux_p = 0.5 * (tau_p * dp - dun)
        flux_un = 0.5 * (tau_u * dun - dp)
        flux = np.empty((K, FIELDS, tot))
        flux[:, 0] = flux_p
        flux[:, 1:] = n.transpose(0, 2, 1) * flux_un[:, None, :]
        flux = flux * d.wJs[:, None, :]
        if t == "wedge":
            flux = flux * d.invsqrtJ_face[:, None, :]
        return flux @ op.Vf

    # ------------------------------------------------------------------
    # volume terms
    # ------------------------------------------------------------------

    def _volume_residual(self, t, state_t):
        if t == "hex":
            return self._volume_hex(state_t)
        if t == "tet":
            return self._volume_tet(state_t)
        if t == "wedge":
            return self._volume_wedge(state_t)
        if t == "pyramid":
            return self._volume_pyramid(state_t)
        raise ValueError(t)

    def _volume_hex(self, state_t):
        """Tensor volume pass shared by the SEM and GL nodal bases: 1D
        differentiation along each direction, then the metric contraction."""
        op = self.ops["hex"]
        d = self.data["hex"]
        K = state_t.shape[0]
        n1 = self.N + 1
        u = state_t.reshape(K, FIELDS, n1, n1, n1)
        D = op.D1
        dur = np.einsum("il,kflmn->kfimn", D, u).reshape(K, FIELDS, -1)
        dus = np.einsum("jl,kfiln->kfijn", D, u).reshape(K, FIELDS, -1)
        dut = np.einsum("ml,kfijl->kfijm", D, u).reshape(K, FIELDS, -1)
        dref = np.stack([dur, dus, dut], axis=2)  # (K, F, 3, Np)
        G = d.G  # (K, Np, 3, 3): G[k,q,c,x] = d r_c / d x
        R = np.zeros_like(state_t)
        wJ = d.w3[None, :] * d.J
        gradp = np.einsum("kqcx,kcq->kxq", G, dref[:, 0])
        R[:, 1:] = -wJ[:, None, :] * gradp
        if self.forms["hex"] == "strong":
            divu = np.einsum("kqcx,kxcq->kq", G, dref[:, 1:])
            R[:, 0] = -wJ * divu
        else:
            # skew pressure volume term: + int u . grad phi
            u_pre = np.einsum("kqcx,kxq,kq->kcq", G, state_t[:, 1:], wJ)
            u5 = u_pre.reshape(K, 3, n1, n1, n1)
            R[:, 0] = (np.einsum("li,klmn->kimn", D, u5[:, 0]).reshape(K, -1)
                       + np.einsum("lj,kilm->kijm", D, u5[:, 1]).reshape(K, -1)
                       + np.einsum("lm,kijl->kijm", D, u5[:, 2]).reshape(K, -1))
        return R

    def _volume_tet(self, state_t):
        op = self.ops["tet"]
        d = self.data["tet"]
        G = d.G[:, 0]          # (K, 3, 3) constant per planar tet
        J = d.J[:, 0]          # (K,)
        Mref = op.M_ref
        dref = np.stack([state_t @ op.Dr.T, state_t @ op.Ds.T,
                         state_t @ op.Dt.T], axis=2)  # (K,F,3,Np)
        R = np.zeros_like(state_t)
        if self.forms["tet"] == "strong":
            divu = np.einsum("kcx,kxcq->kq", G, dref[:, 1:])
            R[:, 0] = -J[:, None] * (divu @ Mref.T)
        else:
            # + int u . grad phi = J sum_c G_cd (D_c^T Mref u_d)
            tmp = np.einsum("kcx,kxq->kcq", G, state_t[:, 1:] @ Mref.T)
            R[:, 0] = J[:, None] * (np.einsum("ij,kj->ki", op.Dr.T, tmp[:, 0])
                                    + np.einsum("ij,kj->ki", op.Ds.T, tmp[:, 1])
                                    + np.einsum("ij,kj->ki", op.Dt.T, tmp[:, 2]))
        gradp = np.einsum("kcx,kcq->kxq", G, dref[:, 0])
        R[:, 1:] = -J[:, None, None] * (gradp @ Mref.T)
        return R

    def _volume_wedge(self, state_t):
        """Two-pass skew evaluation: the trial pass forms solution values,
        physical derivatives and premultiplied products at cubature points;
        the test pass contracts them against test-function factors."""
        op = self.ops["wedge"]
        d = self.data["wedge"]
        w = op.cub.weights
        U = state_t @ op.V.T                       # values at cubature
        Dc = np.stack([state_t @ op.Dr3.T, state_t @ op.Ds3.T,
                       state_t @ op.Dt3.T], axis=2)  # (K,F,3,nq)
        G = d.G                                     # (K,nq,3,3)
        # physical derivative of p including the -p/(2J) grad J correction
        gradp = (np.einsum("kqcx,kcq->kxq", G, Dc[:, 0])
                 + d.gJfac.transpose(0, 2, 1) * U[:, 0][:, None, :])
        R = np.zeros_like(state_t)
        R[:, 1:] = -(gradp * w[None, None, :]) @ op.V
        # pressure: + int u . grad(phi~) via premultiplied trial values
        upre = np.einsum("kqcx,kxq->kcq", G, U[:, 1:]) * w[None, None, :]
        uj = np.einsum("kqx,kxq->kq", d.gJfac, U[:, 1:]) * w[None, :]
        R[:, 0] = (upre[:, 0] @ op.Dr3 + upre[:, 1] @ op.Ds3
                   + upre[:, 2] @ op.Dt3 + uj @ op.V)
        return R

    def _volume_pyramid(self, state_t):
        op = self.ops["pyramid"]
        d = self.data["pyramid"]
        G = d.G          # (K, Np, 3, 3) at the semi-nodal row points
        J = d.J          # (K, Np)
        Dc = np.stack([state_t @ op.Dr.T, state_t @ op.Ds.T,
                       state_t @ op.Dt.T], axis=2)  # (K,F,3,Np)
        R = np.zeros_like(state_t)
        gradp = np.einsum("kqcx,kcq->kxq", G, Dc[:, 0])
        R[:, 1:] = -J[:, None, :] * gradp
        if self.forms["pyramid"] == "strong":
            divu = np.einsum("kqcx,kxcq->kq", G, Dc[:, 1:])
            R[:, 0] = -J * divu
        else:
            upre = np.einsum("kqcx,kxq->kcq", G, state_t[:, 1:]) * J[:, None, :]
            R[:, 0] = (upre[:, 0] @ op.Dr + upre[:, 1] @ op.Ds
                       + upre[:, 2] @ op.Dt)
        return R

    # ------------------------------------------------------------------
    # A action, mass inverse, RHS
    # ------------------------------------------------------------------

    def apply_A(self, state):
        """Integrated residuals R = A U (no mass inverse, no materials)."""
        traces = self.compute_traces(state)
        ext = self._exterior_traces(traces)
        out = {}
        for t in self.types:
            out[t] = (self._volume_residual(t, state[t])
                      + self._surface_residual(t, traces, ext))
        return out

    def apply_mass_inverse(self, t, residual_t):
        op = self.ops[t]
        d = self.data[t]
        if t == "hex":
            return residual_t / (d.w3[None, None, :] * d.J[:, None, :])
        if t == "tet":
            return (residual_t @ op.invM_ref.T) / d.J[:, 0][:, None, None]
        if t == "wedge":
            return residual_t
        if t == "pyramid":
            return residual_t / d.J[:, None, :]
        raise ValueError(t)

    def compute_rhs(self, state, time=0.0):
        """d(state)/dtau = diag(kappa, 1/rho) M_geo^-1 (A state + forcing)."""
        res = self.apply_A(state)
        out = {}
        for t in self.types:
            R = res[t]
            if self.forcing is not None:
                R = R.copy()
                R[:, 0] += self._forcing_residual(t, time)
            dm = self.apply_mass_inverse(t, R)
            mat = self.mesh.materials[t]
            dm[:, 0] *= mat[:, 1][:, None]
            dm[:, 1:] *= (1.0 / mat[:, 0])[:, None, None]
            out[t] = dm
        return out

    def _forcing_residual(self, t, time):
        d = self.data[t]
        f = self.forcing(d.cub_x, time)  # (K, nq)
        w = d.cub_w
        V = self._cub_values(t)
        if t == "wedge":
            return (f * d.cub_sqrtJ * w[None, :]) @ V
        return (f * d.cub_J * w[None, :]) @ V

    # ------------------------------------------------------------------
    # projection, energy, error
    # ------------------------------------------------------------------

    def project(self, fields_fn, time=0.0):
        """L2-project callable fields onto the discrete space.

        fields_fn(x, t) returns (..., 4) values of (p, u1, u2, u3) at
        physical points x (..., 3).
        """
        state = {}
        for t in self.types:
            d = self.data[t]
            if t == "hex":
                # the diagonal (collocated) mass makes projection in the
                # scheme's inner product plain interpolation at the nodes
                nv = np.asarray(fields_fn(d.x_nodes, time))
                state[t] = np.moveaxis(nv, -1, 1)
                continue
            vals = np.moveaxis(np.asarray(fields_fn(d.cub_x, time)), -1, 1)
            w = d.cub_w
            V = self._cub_values(t)
            if t == "tet":
                # the constant J cancels from both sides of the projection
                op = self.ops[t]
                state[t] = ((vals * w[None, None, :]) @ V) @ op.invM_ref
            elif t == "wedge":
                state[t] = (vals * (w[None, :] * d.cub_sqrtJ)[:, None, :]) @ V
            elif t == "pyramid":
                raw = (vals * (w[None, :] * d.cub_J)[:, None, :]) @ V
                state[t] = raw / d.J[:, None, :]
        return state

    def eval_at(self, t, state_t, which="over"):
        """Field values at the over-integration points, (K, 4, nq)."""
        d = self.data[t]
        vals = state_t @ d.over_V.T
        if t == "wedge":
            vals = vals / d.over_sqrtJ[:, None, :]
        return vals

    def l2_error(self, state, exact_fn, time=0.0):
        """Elementwise-integrated L2 errors against an exact solution,
        using quadrature over-integrated by two orders."""
        total = {"p": 0.0, "u": 0.0}
        for t in self.types:
            d = self.data[t]
            num = self.eval_at(t, state[t])
            ex = np.moveaxis(np.asarray(exact_fn(d.over_x, time)), -1, 1)
            diff2 = (num - ex) ** 2
            wJ = d.over_w[None, :] * d.over_J
            total["p"] += float(np.sum(diff2[:, 0] * wJ))
            total["u"] += float(np.sum(diff2[:, 1:] * wJ[:, None, :]))
        out = {k: np.sqrt(v) for k, v in total.items()}
        out["total"] = np.sqrt(total["p"] + total["u"])
        return out

    # ------------------------------------------------------------------
    # dense assembly for spectra studies
    # ------------------------------------------------------------------

    def state_to_vector(self, state):
        return np.concatenate([state[t].ravel() for t in self.types])

    def vector_to_state(self, vec):
        state = {}
        for t in self.types:
            base = self.dof_base[t]
            n = self.n_elems[t] * FIELDS * self.ops[t].Np
            state[t] = vec[base:base + n].reshape(
                self.n_elems[t], FIELDS, self.ops[t].Np)
        return state

    def assemble_global(self, dof_budget=20000):
        """Assemble A (columns of apply_A on unit vectors) and the block
        mass M with material weights, both sparse.

        A v = lambda M v is the generalized eigenproblem of the
        semi-discretization."""
        if self.n_dof > dof_budget:
            raise ValueError(
                f"{self.n_dof} degrees of freedom exceed the budget {dof_budget}")
        cols = []
        rows = []
        vals = []
        e = zero_state(self)
        for t in self.types:
            K, Np = self.n_elems[t], self.ops[t].Np
            for k in range(K):
                for f in range(FIELDS):
                    for m in range(Np):
                        e[t][k, f, m] = 1.0
                        res = self.apply_A(e)
                        col = np.concatenate([res[s].ravel() for s in self.types])
                        e[t][k, f, m] = 0.0
                        nz = np.flatnonzero(col)
                        rows.append(nz)
                        vals.append(col[nz])
                        cols.append(np.full(len(nz),
                                            self.dof_base[t]
                                            + (k * FIELDS + f) * Np + m))
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_dof, self.n_dof))
        return A, self.assemble_mass()

    def assemble_mass(self):
        """Sparse block mass with the 1/kappa (pressure) and rho (velocity)
        material weights."""
        blocks = []
        for t in self.types:
            op = self.ops[t]
            d = self.data[t]
            mat = self.mesh.materials[t]
            K, Np = self.n_elems[t], op.Np
            for k in range(K):
                wk = [1.0 / mat[k, 1], mat[k, 0], mat[k, 0], mat[k, 0]]
                if t == "hex":
                    dg = d.w3 * d.J[k]
                    for f in range(FIELDS):
                        blocks.append(sp.diags(wk[f] * dg))
                elif t == "tet":
                    for f in range(FIELDS):
                        blocks.append(sp.csc_matrix(wk[f] * d.J[k, 0] * op.M_ref))
                elif t == "wedge":
                    for f in range(FIELDS):
                        blocks.append(sp.identity(Np) * wk[f])
                elif t == "pyramid":
                    for f in range(FIELDS):
                        blocks.append(sp.diags(wk[f] * d.J[k]))
        return sp.block_diag(blocks, format="csc")


def _soundspeed(mesh, t, k):
    rho, kappa = mesh.materials[t][k]
    return np.sqrt(kappa / rho)


def discrete_energy(state, disc):
    """U^T M U with material weights: the discrete acoustic energy."""
    total = 0.0
    for t in disc.types:
        op = disc.ops[t]
        d = disc.data[t]
        mat = disc.mesh.materials[t]
        s = state[t]
        if t == "hex":
            q = d.w3[None, None, :] * d.J[:, None, :] * s**2
            en = q.sum(axis=2)
        elif t == "tet":
            en = np.einsum("kfi,ij,kfj->kf", s, op.M_ref, s) * d.J[:, 0][:, None]
        elif t == "wedge":
            en = (s**2).sum(axis=2)
        elif t == "pyramid":
            en = (d.J[:, None, :] * s**2).sum(axis=2)
        total += float(np.sum(en[:, 0] / mat[:, 1]))
        total += float(np.sum(en[:, 1:] * mat[:, 0][:, None]))
    return total
