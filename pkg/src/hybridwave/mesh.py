"""Hybrid mesh model, structured generators, GMSH v2.2 reader and face
connectivity.

Elements are stored grouped by type so solver kernels can batch over
contiguous arrays.  Faces are matched by their sorted vertex id sets; the
orientation code stored per interior face is the index of the vertex
permutation carrying my face tuple onto the neighbor's (cubature-point
level permutations are recomputed per formulation from geometry by the
discretization, since quad faces carry different point sets under GL and
SEM quadrature).
"""

import numpy as np

from .refelem import ELEMENT_TYPES, REFERENCE_ELEMENTS

__all__ = [
    "HybridMesh",
    "FaceLink",
    "build_connectivity",
    "uniform_cube_mesh",
    "structured_hybrid_mesh",
    "read_gmsh",
    "GmshParseError",
    "orientation_permutations",
    "apply_orientation",
    "invert_orientation",
]

BOUNDARY = -1

N_VERTS = {"hex": 8, "wedge": 6, "pyramid": 5, "tet": 4}


def orientation_permutations(n):
    """Vertex permutations of a face with n corners that can appear as
    orientation codes: all 6 triangle relabelings, or the 8 dihedral maps
    of the quad."""
    if n == 3:
        return [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (2, 1, 0), (1, 0, 2)]
    return [(0, 1, 2, 3), (1, 2, 3, 0), (2, 3, 0, 1), (3, 0, 1, 2),
            (0, 3, 2, 1), (3, 2, 1, 0), (2, 1, 0, 3), (1, 0, 3, 2)]


def apply_orientation(code, verts):
    perm = orientation_permutations(len(verts))[code]
    return tuple(verts[p] for p in perm)


def invert_orientation(code, n):
    perms = orientation_permutations(n)
    perm = perms[code]
    inv = tuple(perm.index(i) for i in range(n))
    return perms.index(inv)


class FaceLink:
    """Connectivity record of one element face.

    neighbor is (elem_type, element index, face index) or None for boundary
    faces; orientation is the code of the vertex permutation from my face
    tuple to the neighbor's.
    """

    __slots__ = ("neighbor", "orientation")

    def __init__(self, neighbor=None, orientation=0):
        self.neighbor = neighbor
        self.orientation = orientation

    @property
    def is_boundary(self):
        return self.neighbor is None


class HybridMesh:
    """Vertices, typed element blocks, per-element materials and face links.

    blocks[elem_type] is a (K, nv) int array of vertex ids; materials
    [elem_type] is (K, 2) with columns (rho, kappa).  face_links[elem_type]
    [k][f] is a FaceLink.
    """

    def __init__(self, vertices, blocks, materials=None, physical=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.blocks = {t: np.asarray(v, dtype=int).reshape(-1, N_VERTS[t])
                       for t, v in blocks.items() if len(v)}
        if materials is None:
            materials = {t: np.ones((len(v), 2)) for t, v in self.blocks.items()}
        self.materials = materials
        self.physical = physical or {}
        self.face_links = build_connectivity(self)

    @property
    def elem_types(self):
        return [t for t in ELEMENT_TYPES if t in self.blocks]

    @property
    def n_elements(self):
        return sum(len(v) for v in self.blocks.values())

    def element_vertices(self, elem_type):
        return self.vertices[self.blocks[elem_type]]

    def set_materials(self, table):
        """Assign (rho, kappa) per physical group id; elements without a
        tagged group keep the defaults."""
        for t in self.blocks:
            groups = self.physical.get(t)
            if groups is None:
                continue
            for k, g in enumerate(groups):
                if g in table:
                    self.materials[t][k] = table[g]


class NonconformingMeshError(ValueError):
    pass


def build_connectivity(mesh):
    """Match element faces by sorted vertex ids.

    Each interior face must be shared by exactly two elements and by faces
    of the same shape; the stored orientation code maps my face-vertex
    traversal onto the neighbor's.
    """
    registry = {}
    for t in mesh.elem_types:
        ref = REFERENCE_ELEMENTS[t]
        for k, conn in enumerate(mesh.blocks[t]):
            for f, (ftype, ix) in enumerate(ref.faces):
                fverts = tuple(int(conn[i]) for i in ix)
                key = tuple(sorted(fverts))
                registry.setdefault(key, []).append((t, k, f, fverts))
    links = {t: [[FaceLink() for _ in REFERENCE_ELEMENTS[t].faces]
                 for _ in range(len(mesh.blocks[t]))] for t in mesh.elem_types}
    for key, owners in registry.items():
        if len(owners) > 2:
            raise NonconformingMeshError(
                f"face {key} shared by {len(owners)} elements")
        if len(owners) == 1:
            continue
        (ta, ka, fa, va), (tb, kb, fb, vb) = owners
        if len(va) != len(vb):
            raise NonconformingMeshError(
                f"face {key} links a {len(va)}-gon to a {len(vb)}-gon")
        perms = orientation_permutations(len(va))
        code_ab = code_ba = None
        for ci, perm in enumerate(perms):
            if tuple(va[p] for p in perm) == vb:
                code_ab = ci
            if tuple(vb[p] for p in perm) == va:
                code_ba = ci
        if code_ab is None or code_ba is None:
            raise NonconformingMeshError(
                f"faces {va} and {vb} are not related by a dihedral map")
        links[ta][ka][fa] = FaceLink((tb, kb, fb), code_ab)
        links[tb][kb][fb] = FaceLink((ta, ka, fa), code_ba)
    return links


# ------------------------------------------------------------------
# Structured generators on the unit cube
# ------------------------------------------------------------------

class _VertexPool:
    def __init__(self):
        self.coords = []
        self.index = {}

    def add(self, xyz):
        key = tuple(round(c, 12) for c in xyz)
        if key not in self.index:
            self.index[key] = len(self.coords)
            self.coords.append(xyz)
        return self.index[key]

    def array(self):
        return np.array(self.coords, dtype=float)


def _grid_layers(nx, ny, zs):
    """Vertex pool preloaded with the tensor grid nx x ny x len(zs)."""
    pool = _VertexPool()
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    for z in zs:
        for y in ys:
            for x in xs:
                pool.add((float(x), float(y), float(z)))
    return pool, xs, ys


def _cell_corners(pool, xs, ys, zs, i, j, k):
    """Vertex ids of cell (i,j,k) in hex order."""
    x0, x1 = xs[i], xs[i + 1]
    y0, y1 = ys[j], ys[j + 1]
    z0, z1 = zs[k], zs[k + 1]
    return [pool.add((x0, y0, z0)), pool.add((x1, y0, z0)),
            pool.add((x1, y1, z0)), pool.add((x0, y1, z0)),
            pool.add((x0, y0, z1)), pool.add((x1, y0, z1)),
            pool.add((x1, y1, z1)), pool.add((x0, y1, z1))]


def _wedge_pair(c):
    """Split hex corners into 2 wedges along the y = z diagonal plane.

    Triangular faces lie on the x = const cell faces so wedge columns along
    x stay conforming.  Vertex orders give positive Jacobians.
    """
    a = [c[0], c[7], c[3], c[1], c[6], c[2]]  # region z <= y
    b = [c[0], c[4], c[7], c[1], c[5], c[6]]  # region z >= y
    return a, b


def _kuhn_tets(c, corners_xyz):
    """Six positively oriented Kuhn tetrahedra of a hex cell."""
    import itertools
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3)]
        for d in perm:
            step = path[-1].copy()
            step[d] = 1
            path.append(step)
        ids = []
        for p in path:
            corner = int(p[0]) + 2 * int(p[1]) + 4 * int(p[2])
            ids.append(corner)
        # corner encoding: (x, y, z) bits -> hex vertex index
        remap = {0: 0, 1: 1, 3: 2, 2: 3, 4: 4, 5: 5, 7: 6, 6: 7}
        tet = [c[remap[i]] for i in ids]
        v = corners_xyz[[remap[i] for i in ids]]
        if np.linalg.det(np.column_stack([v[1] - v[0], v[2] - v[0],
                                          v[3] - v[0]])) < 0:
            tet[2], tet[3] = tet[3], tet[2]
        tets.append(tet)
    return tets


def _oriented_tet(conn, pool):
    v = np.array([pool.coords[q] for q in conn])
    if np.linalg.det(np.column_stack([v[1] - v[0], v[2] - v[0],
                                      v[3] - v[0]])) < 0:
        conn = [conn[0], conn[1], conn[3], conn[2]]
    return conn


def _cell_pyramids(pool, corners, corners_xyz, split_top=False):
    """Six pyramids with apex at the cell center; optionally the top
    pyramid is split into two tets along the base main diagonal so the
    cell exposes triangles upward."""
    center = tuple(corners_xyz.mean(axis=0))
    apex = pool.add(center)
    hexref = REFERENCE_ELEMENTS["hex"]
    pyrs, tets = [], []
    for f, (_, ix) in enumerate(hexref.faces):
        base = [corners[i] for i in ix]       # CCW from outside the cell
        base_in = base[::-1]                  # CCW seen from the apex
        if split_top and f == 5:              # t = +1 face
            # split along the base main diagonal to match the Kuhn
            # tetrahedra stacked above
            a, b, c_, d = base_in
            tets.append(_oriented_tet([a, b, d, apex], pool))
            tets.append(_oriented_tet([b, c_, d, apex], pool))
        else:
            pyrs.append(base_in + [apex])
    return pyrs, tets


def uniform_cube_mesh(elem_type, n):
    """Uniform mesh of the unit cube: n^3 hexes, 2n^3 wedges, 6n^3 pyramids
    (cell centers added) or 6n^3 Kuhn tetrahedra."""
    if n < 1:
        raise ValueError("need at least one cell per axis")
    zs = np.linspace(0.0, 1.0, n + 1)
    pool, xs, ys = _grid_layers(n, n, zs)
    blocks = {t: [] for t in ELEMENT_TYPES}
    for k in range(n):
        for j in range(n):
            for i in range(n):
                c = _cell_corners(pool, xs, ys, zs, i, j, k)
                cx = np.array([pool.coords[q] for q in c])
                if elem_type == "hex":
                    blocks["hex"].append(c)
                elif elem_type == "wedge":
                    a, b = _wedge_pair(c)
                    blocks["wedge"] += [a, b]
                elif elem_type == "pyramid":
                    pyrs, _ = _cell_pyramids(pool, c, cx)
                    blocks["pyramid"] += pyrs
                elif elem_type == "tet":
                    blocks["tet"] += _kuhn_tets(c, cx)
                else:
                    raise ValueError(f"unknown element type {elem_type!r}")
    return HybridMesh(pool.array(), {t: v for t, v in blocks.items() if v})


def hybrid_band_layout(n):
    """Layer counts (hex, wedge, pyramid, tet) of the structured hybrid
    cube; the pyramid transition is always one layer thick."""
    nz = max(n, 4)
    t_l = max(1, nz // 2 - 1)
    w_l = max(1, (nz - t_l - 1) // 2)
    h_l = nz - t_l - 1 - w_l
    return h_l, w_l, 1, t_l


def structured_hybrid_mesh(n):
    """Unit-cube mesh with a hex slab, a wedge slab, one pyramid transition
    layer (whose top pyramids split into tets) and a Kuhn tet region.

    All four element types are present for every n >= 2; n < 4 uses four
    z-layers of height 1/4 so the bands fit.
    """
    if n < 2:
        raise ValueError("hybrid cube needs n >= 2")
    h_l, w_l, p_l, t_l = hybrid_band_layout(n)
    nz = h_l + w_l + p_l + t_l
    zs = np.linspace(0.0, 1.0, nz + 1)
    pool, xs, ys = _grid_layers(n, n, zs)
    blocks = {t: [] for t in ELEMENT_TYPES}
    for k in range(nz):
        for j in range(n):
            for i in range(n):
                c = _cell_corners(pool, xs, ys, zs, i, j, k)
                cx = np.array([pool.coords[q] for q in c])
                if k < h_l:
                    blocks["hex"].append(c)
                elif k < h_l + w_l:
                    a, b = _wedge_pair(c)
                    blocks["wedge"] += [a, b]
                elif k < h_l + w_l + 1:
                    pyrs, tets = _cell_pyramids(pool, c, cx, split_top=True)
                    blocks["pyramid"] += pyrs
                    blocks["tet"] += tets
                else:
                    blocks["tet"] += _kuhn_tets(c, cx)
    return HybridMesh(pool.array(), {t: v for t, v in blocks.items() if v})


# ------------------------------------------------------------------
# GMSH v2.2 ASCII reader
# ------------------------------------------------------------------

class GmshParseError(ValueError):
    pass


GMSH_TYPES = {4: ("tet", 4), 5: ("hex", 8), 6: ("wedge", 6), 7: ("pyramid", 5)}

# gmsh prism axis is our s direction; swapping the second and third
# triangle corners keeps the Jacobian positive under our (r,t)-triangle
# vertex order
_WEDGE_GMSH_TO_LOCAL = (0, 2, 1, 3, 5, 4)


def read_gmsh(path):
    """Read a GMSH v2.2 ASCII mesh with linear volume elements.

    Recognizes element codes 4, 5, 6, 7 (tet, hex, prism, pyramid); lower
    dimensional elements are skipped.  The first tag of each element is
    retained as its physical group.  Raises GmshParseError with a line
    number on malformed input.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def fail(msg, ln=None):
        raise GmshParseError(f"{path}:{(ln if ln is not None else pos) + 1}: {msg}")

    def expect(tag):
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines) or lines[pos].strip() != tag:
            fail(f"expected {tag}")
        pos += 1

    expect("$MeshFormat")
    parts = lines[pos].split()
    if not parts or not parts[0].startswith("2.2"):
        fail("only msh format 2.2 is supported")
    pos += 1
    expect("$EndMeshFormat")

    expect("$Nodes")
    try:
        n_nodes = int(lines[pos])
    except (ValueError, IndexError):
        fail("bad node count")
    pos += 1
    coords = np.zeros((n_nodes, 3))
    ids = {}
    for i in range(n_nodes):
        if pos >= len(lines):
            fail("truncated $Nodes section")
        parts = lines[pos].split()
        if len(parts) < 4:
            fail("bad node line")
        ids[int(parts[0])] = i
        coords[i] = [float(v) for v in parts[1:4]]
        pos += 1
    expect("$EndNodes")

    expect("$Elements")
    try:
        n_elems = int(lines[pos])
    except (ValueError, IndexError):
        fail("bad element count")
    pos += 1
    blocks = {t: [] for t in ELEMENT_TYPES}
    physical = {t: [] for t in ELEMENT_TYPES}
    for i in range(n_elems):
        if pos >= len(lines) or lines[pos].strip().startswith("$"):
            fail("truncated $Elements section")
        parts = lines[pos].split()
        if len(parts) < 3:
            fail("bad element line")
        code = int(parts[1])
        ntags = int(parts[2])
        node_ids = parts[3 + ntags:]
        if code in GMSH_TYPES:
            t, nv = GMSH_TYPES[code]
            if len(node_ids) != nv:
                fail(f"{t} element needs {nv} nodes, got {len(node_ids)}")
            try:
                conn = [ids[int(v)] for v in node_ids]
            except KeyError as e:
                fail(f"unknown node id {e}")
            if t == "wedge":
                conn = [conn[p] for p in _WEDGE_GMSH_TO_LOCAL]
            blocks[t].append(conn)
            physical[t].append(int(parts[3]) if ntags > 0 else 0)
        elif code not in (1, 2, 3, 15):
            fail(f"unsupported element code {code}")
        pos += 1
    expect("$EndElements")
    return HybridMesh(coords, {t: v for t, v in blocks.items() if v},
                      physical={t: np.array(v) for t, v in physical.items() if v})


# ------------------------------------------------------------------
# Mesh checks used by the test suite
# ------------------------------------------------------------------

def mesh_volume(mesh, N=2):
    """Sum of integral J over all elements via element quadrature."""
    from .quadrature import element_rule
    from .refelem import geometric_factors_batch
    total = 0.0
    for t in mesh.elem_types:
        rule = element_rule(t, N)
        _, J, _, _ = geometric_factors_batch(t, mesh.element_vertices(t),
                                             rule.collapsed)
        total += float(np.sum(J @ rule.weights))
    return total
