"""Meshes for 1D grids and 2D unstructured triangle/quad grids.

Connectivity is stored in flat numpy arrays so downstream assembly can run
fully vectorized.  Faces are oriented: the unit normal points out of the
``left`` element; ``right < 0`` marks a boundary face.  Periodic boundaries
are resolved at construction time into interior-like faces carrying a
coordinate offset for the right element's frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_TRIANGLE_ANGLE_DEG = 20.0


class MeshError(Exception):
    """Raised for inconsistent connectivity or invalid generator input."""


class TriangulationError(MeshError):
    """Raised when a triangulation cannot meet the quality bound."""


@dataclass
class Mesh:
    """Conforming mesh of intervals (1D) or triangles/quads (2D).

    ``elem_verts`` is -1 padded to the widest element; ``elem_neighbors``
    mirrors ``elem_faces`` slot-for-slot with -1 where the face is a
    (non-periodic) boundary.  ``neighbor_offset[e, i]`` translates physical
    coordinates into the frame of neighbor ``i`` (nonzero only across
    periodic wraps).
    """

    dim: int
    vertices: np.ndarray
    elem_verts: np.ndarray
    elem_nv: np.ndarray
    measures: np.ndarray
    centroids: np.ndarray
    face_verts: np.ndarray
    face_left: np.ndarray
    face_right: np.ndarray
    face_normal: np.ndarray
    face_midpoint: np.ndarray
    face_measure: np.ndarray
    face_offset: np.ndarray
    elem_faces: np.ndarray
    elem_neighbors: np.ndarray
    neighbor_offset: np.ndarray
    face_tag: np.ndarray
    tag_names: list[str]
    quad_parity: np.ndarray | None = None

    @property
    def n_elements(self) -> int:
        return len(self.measures)

    @property
    def n_faces(self) -> int:
        return len(self.face_left)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.nonzero(self.face_right < 0)[0]

    def element_kind(self, e: int) -> str:
        if self.dim == 1:
            return "interval"
        return "tri" if self.elem_nv[e] == 3 else "quad"

    def element_vertices(self, e: int) -> np.ndarray:
        return self.vertices[self.elem_verts[e, : self.elem_nv[e]]]

    def perimeters(self) -> np.ndarray:
        per = np.zeros(self.n_elements)
        np.add.at(per, self.face_left, self.face_measure)
        interior = self.face_right >= 0
        np.add.at(per, self.face_right[interior], self.face_measure[interior])
        return per

    def length_scales(self) -> np.ndarray:
        """CFL length scale: cell width in 1D, measure over half-perimeter in 2D."""
        if self.dim == 1:
            return self.measures.copy()
        return self.measures / (0.5 * self.perimeters())

    def tag_id(self, name: str) -> int:
        return self.tag_names.index(name)

    def locate(self, point) -> int:
        """Element whose centroid is nearest to ``point`` (convex cells only)."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        d2 = np.sum((self.centroids - p[None, :]) ** 2, axis=1)
        return int(np.argmin(d2))


@dataclass
class IndicatorStencil:
    """Two-ring smoothness stencil of one element.

    One substencil per face neighbor: the neighbor itself plus the
    neighbor's other face neighbors (the target excluded).  Substencils
    whose primary neighbor lies outside a non-periodic boundary are
    dropped.
    """

    element: int
    substencils: list[list[int]]
    dropped: list[bool]

    @property
    def surviving(self) -> list[list[int]]:
        return [s for s, d in zip(self.substencils, self.dropped) if not d]


@dataclass
class PackedStencils:
    """Vectorized view of the indicator stencils (-1 padded).

    ``pair_off``/``nbr_off`` carry the periodic coordinate shifts needed to
    express a neighbor centroid in the target cell's frame.  ``pair_inv``
    holds the inverted 2x2 centroid-offset systems of the slope candidates
    (2D); pairs with collinear centroids are marked unusable."""

    members: np.ndarray      # (n_e, max_sub, max_mem)
    sub_valid: np.ndarray    # (n_e, max_sub) bool
    pair_nbrs: np.ndarray    # (n_e, max_pairs, 2) cyclic neighbor pairs, -1 padded
    pair_off: np.ndarray     # (n_e, max_pairs, 2, dim)
    neighbors: np.ndarray    # (n_e, max_nf)
    nbr_off: np.ndarray      # (n_e, max_nf, dim)
    pair_inv: np.ndarray | None = None   # (n_e, max_pairs, 2, 2)
    pair_good: np.ndarray | None = None  # (n_e, max_pairs) bool


# ---------------------------------------------------------------------------
# construction helpers


def _build_connectivity(dim, vertices, elem_verts, elem_nv, boundary_tags,
                        periodic_pairs=None, quad_parity=None):
    """Derive faces, neighbors and geometry from element-vertex lists.

    ``boundary_tags`` maps a frozenset of face vertex ids to a tag name.
    ``periodic_pairs`` is a list of (face_key_a, face_key_b, offset_a_to_b)
    produced by the generators; the two boundary faces are merged into one
    interior face.
    """
    vertices = np.asarray(vertices, dtype=float)
    elem_verts = np.asarray(elem_verts, dtype=np.int64)
    elem_nv = np.asarray(elem_nv, dtype=np.int64)
    n_e = len(elem_nv)

    measures = np.zeros(n_e)
    centroids = np.zeros((n_e, dim))
    if dim == 1:
        x0 = vertices[elem_verts[:, 0], 0]
        x1 = vertices[elem_verts[:, 1], 0]
        measures = x1 - x0
        centroids[:, 0] = 0.5 * (x0 + x1)
    else:
        for e in range(n_e):
            pts = vertices[elem_verts[e, : elem_nv[e]]]
            # shoelace about the first vertex: no large-coordinate cancellation
            q = pts - pts[0]
            x, y = q[:, 0], q[:, 1]
            xs, ys = np.roll(x, -1), np.roll(y, -1)
            cross = x * ys - xs * y
            area = 0.5 * np.sum(cross)
            if area <= 0:
                raise MeshError(f"element {e} is degenerate or not counter-clockwise")
            measures[e] = area
            centroids[e, 0] = pts[0, 0] + np.sum((x + xs) * cross) / (6 * area)
            centroids[e, 1] = pts[0, 1] + np.sum((y + ys) * cross) / (6 * area)
    if np.any(measures <= 0):
        bad = int(np.argmin(measures))
        raise MeshError(f"element {bad} has non-positive measure")

    # enumerate faces; key = ordered vertex tuple
    face_map: dict[tuple, int] = {}
    f_verts, f_left, f_right = [], [], []
    max_nf = 2 if dim == 1 else int(elem_nv.max())
    elem_faces = -np.ones((n_e, max_nf), dtype=np.int64)
    for e in range(n_e):
        nv = elem_nv[e]
        vs = elem_verts[e, :nv]
        if dim == 1:
            local = [(vs[0],), (vs[1],)]
        else:
            local = [(vs[i], vs[(i + 1) % nv]) for i in range(nv)]
        for i, key_raw in enumerate(local):
            key = tuple(sorted(key_raw))
            if key in face_map:
                fid = face_map[key]
                if f_right[fid] >= 0:
                    raise MeshError(f"face {key} shared by more than two elements")
                f_right[fid] = e
            else:
                fid = len(f_verts)
                face_map[key] = fid
                f_verts.append(key_raw)
                f_left.append(e)
                f_right.append(-1)
            elem_faces[e, i] = fid

    f_left = np.asarray(f_left, dtype=np.int64)
    f_right = np.asarray(f_right, dtype=np.int64)
    n_f = len(f_left)
    face_verts = -np.ones((n_f, 1 if dim == 1 else 2), dtype=np.int64)
    for f, vv in enumerate(f_verts):
        face_verts[f, : len(vv)] = vv

    # geometry: midpoint, measure, outward normal from the left element
    face_midpoint = np.zeros((n_f, dim))
    face_measure = np.ones(n_f)
    face_normal = np.zeros((n_f, dim))
    if dim == 1:
        face_midpoint[:, 0] = vertices[face_verts[:, 0], 0]
        sign = np.where(face_midpoint[:, 0] > centroids[f_left, 0], 1.0, -1.0)
        face_normal[:, 0] = sign
    else:
        a = vertices[face_verts[:, 0]]
        b = vertices[face_verts[:, 1]]
        face_midpoint = 0.5 * (a + b)
        t = b - a
        face_measure = np.hypot(t[:, 0], t[:, 1])
        if np.any(face_measure <= 0):
            raise MeshError("zero-length face")
        n = np.stack([t[:, 1], -t[:, 0]], axis=1) / face_measure[:, None]
        flip = np.einsum("fd,fd->f", n, face_midpoint - centroids[f_left]) < 0
        n[flip] *= -1
        face_normal = n

    face_offset = np.zeros((n_f, dim))
    face_tag = -np.ones(n_f, dtype=np.int64)
    tag_names: list[str] = []

    def _tag_index(name):
        if name not in tag_names:
            tag_names.append(name)
        return tag_names.index(name)

    # merge periodic partner faces before tagging the rest
    drop = np.zeros(n_f, dtype=bool)
    if periodic_pairs:
        for key_a, key_b, offset in periodic_pairs:
            fa = face_map[tuple(sorted(key_a))]
            fb = face_map[tuple(sorted(key_b))]
            if f_right[fa] >= 0 or f_right[fb] >= 0:
                raise MeshError("periodic tag on an interior face")
            # keep face a; its right element is fb's left, living offset away
            f_right[fa] = f_left[fb]
            face_offset[fa] = offset
            drop[fb] = True
            for slot in range(max_nf):
                if elem_faces[f_left[fb], slot] == fb:
                    elem_faces[f_left[fb], slot] = fa

    if boundary_tags is not None:
        for key, name in boundary_tags.items():
            fid = face_map.get(tuple(sorted(key)))
            if fid is None:
                raise MeshError(f"boundary face {key} not found in any element")
            if not drop[fid]:
                if f_right[fid] >= 0:
                    raise MeshError(f"boundary tag on interior face {key}")
                face_tag[fid] = _tag_index(name)

    untagged = (f_right < 0) & (face_tag < 0) & ~drop
    if np.any(untagged):
        raise MeshError(f"{int(untagged.sum())} boundary faces carry no tag")

    if np.any(drop):
        keep = np.nonzero(~drop)[0]
        remap = -np.ones(n_f, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        face_verts = face_verts[keep]
        f_left, f_right = f_left[keep], f_right[keep]
        face_midpoint, face_measure = face_midpoint[keep], face_measure[keep]
        face_normal, face_offset = face_normal[keep], face_offset[keep]
        face_tag = face_tag[keep]
        elem_faces = remap[elem_faces]

    # neighbor table aligned with elem_faces slots
    n_f = len(f_left)
    elem_neighbors = -np.ones_like(elem_faces)
    neighbor_offset = np.zeros(elem_faces.shape + (dim,))
    for e in range(n_e):
        for i in range(max_nf):
            fid = elem_faces[e, i]
            if fid < 0:
                continue
            if f_left[fid] == e:
                elem_neighbors[e, i] = f_right[fid]
                neighbor_offset[e, i] = face_offset[fid]
            else:
                elem_neighbors[e, i] = f_left[fid]
                neighbor_offset[e, i] = -face_offset[fid]

    return Mesh(
        dim=dim, vertices=vertices, elem_verts=elem_verts, elem_nv=elem_nv,
        measures=measures, centroids=centroids, face_verts=face_verts,
        face_left=f_left, face_right=f_right, face_normal=face_normal,
        face_midpoint=face_midpoint, face_measure=face_measure,
        face_offset=face_offset, elem_faces=elem_faces,
        elem_neighbors=elem_neighbors, neighbor_offset=neighbor_offset,
        face_tag=face_tag, tag_names=tag_names, quad_parity=quad_parity,
    )


def check_mesh(mesh: Mesh, rtol: float = 1e-12) -> None:
    """Assert the structural invariants; raises MeshError on violation."""
    if np.any(mesh.measures <= 0):
        raise MeshError("non-positive element measure")
    scale = float(np.max(mesh.face_measure))
    # interior-face reciprocity via the neighbor table
    left_ok = mesh.face_left >= 0
    if not np.all(left_ok):
        raise MeshError("face without a left element")
    for f in range(mesh.n_faces):
        e, r = mesh.face_left[f], mesh.face_right[f]
        if f not in mesh.elem_faces[e]:
            raise MeshError(f"face {f} missing from left element {e}")
        if r >= 0 and f not in mesh.elem_faces[r]:
            raise MeshError(f"face {f} missing from right element {r}")
    # normal closure per element
    closure = np.zeros((mesh.n_elements, mesh.dim))
    w = mesh.face_normal * mesh.face_measure[:, None]
    np.add.at(closure, mesh.face_left, w)
    interior = mesh.face_right >= 0
    np.add.at(closure, mesh.face_right[interior], -w[interior])
    if np.max(np.abs(closure)) > rtol * max(scale, 1.0):
        raise MeshError("outward normals do not close")
    counts = np.sum(mesh.elem_faces >= 0, axis=1)
    expect = np.full(mesh.n_elements, 2) if mesh.dim == 1 else mesh.elem_nv
    if not np.array_equal(counts, expect):
        raise MeshError("face count does not match element kind")


# ---------------------------------------------------------------------------
# indicator stencils


def build_indicator_stencils(mesh: Mesh) -> list[IndicatorStencil]:
    """Two-ring substencils used by the multi-resolution indicator.

    For each face neighbor ``K_l`` of the target the substencil collects
    ``K_l`` plus ``K_l``'s other face neighbors, excluding the target
    itself.  Neighbors missing across non-periodic boundaries are omitted;
    a substencil whose primary neighbor is missing is dropped.
    """
    out = []
    nbrs = mesh.elem_neighbors
    for e in range(mesh.n_elements):
        subs, dropped = [], []
        for l in range(nbrs.shape[1]):
            if mesh.elem_faces[e, l] < 0:
                continue
            kl = nbrs[e, l]
            if kl < 0:
                subs.append([])
                dropped.append(True)
                continue
            members = [int(kl)]
            for m in nbrs[kl]:
                if m >= 0 and m != e:
                    members.append(int(m))
            subs.append(members)
            dropped.append(False)
        if not any(not d for d in dropped):
            raise MeshError(f"element {e} has no surviving indicator substencil")
        out.append(IndicatorStencil(element=e, substencils=subs, dropped=dropped))
    return out


def pack_stencils(mesh: Mesh, stencils: list[IndicatorStencil]) -> PackedStencils:
    max_sub = max(len(s.substencils) for s in stencils)
    max_mem = max((len(m) for s in stencils for m in s.substencils), default=1)
    max_mem = max(max_mem, 1)
    members = -np.ones((mesh.n_elements, max_sub, max_mem), dtype=np.int64)
    valid = np.zeros((mesh.n_elements, max_sub), dtype=bool)
    for s in stencils:
        for i, (mem, drop) in enumerate(zip(s.substencils, s.dropped)):
            if drop:
                continue
            valid[s.element, i] = True
            members[s.element, i, : len(mem)] = mem

    # cyclic face-neighbor pairs for the linear reconstruction
    nbrs = mesh.elem_neighbors
    nf = nbrs.shape[1]
    pairs = -np.ones((mesh.n_elements, nf, 2), dtype=np.int64)
    pair_off = np.zeros((mesh.n_elements, nf, 2, mesh.dim))
    for e in range(mesh.n_elements):
        k = int(np.sum(mesh.elem_faces[e] >= 0))
        cyc = [((nbrs[e, i], i), (nbrs[e, (i + 1) % k], (i + 1) % k))
               for i in range(k)]
        cand = [(a, b) for a, b in cyc if a[0] >= 0 and b[0] >= 0]
        if not cand:
            present = [(n, i) for i, n in enumerate(nbrs[e]) if n >= 0]
            cand = [(present[i], present[i + 1]) for i in range(len(present) - 1)]
        for i, ((a, sa), (b, sb)) in enumerate(cand[:nf]):
            pairs[e, i] = (a, b)
            pair_off[e, i, 0] = mesh.neighbor_offset[e, sa]
            pair_off[e, i, 1] = mesh.neighbor_offset[e, sb]
    pair_inv = pair_good = None
    if mesh.dim == 2:
        safe = np.maximum(pairs, 0)
        dc = mesh.centroids[safe] - pair_off \
            - mesh.centroids[:, None, None, :]          # (n_e, P, 2, 2)
        det = dc[..., 0, 0] * dc[..., 1, 1] - dc[..., 0, 1] * dc[..., 1, 0]
        scale2 = np.einsum("npkd,npkd->np", dc, dc) + 1e-300
        pair_good = np.all(pairs >= 0, axis=2) & (np.abs(det) > 1e-12 * scale2)
        detn = np.where(pair_good, det, 1.0)
        pair_inv = np.empty_like(dc)
        pair_inv[..., 0, 0] = dc[..., 1, 1] / detn
        pair_inv[..., 0, 1] = -dc[..., 0, 1] / detn
        pair_inv[..., 1, 0] = -dc[..., 1, 0] / detn
        pair_inv[..., 1, 1] = dc[..., 0, 0] / detn
    return PackedStencils(members=members, sub_valid=valid, pair_nbrs=pairs,
                          pair_off=pair_off, neighbors=nbrs,
                          nbr_off=mesh.neighbor_offset,
                          pair_inv=pair_inv, pair_good=pair_good)


# ---------------------------------------------------------------------------
# generators


def interval_mesh(n: int, a: float, b: float, periodic: bool = True,
                  tags=("left", "right")) -> Mesh:
    """Uniform 1D grid of ``n`` cells on [a, b]."""
    if n < 1 or b <= a:
        raise MeshError("need n >= 1 and b > a")
    verts = np.linspace(a, b, n + 1)[:, None]
    elems = np.stack([np.arange(n), np.arange(n) + 1], axis=1)
    periodic_pairs = None
    btags = {}
    if periodic:
        periodic_pairs = [((n,), (0,), np.array([a - b]))]
    else:
        btags = {(0,): tags[0], (n,): tags[1]}
    return _build_connectivity(1, verts, elems, np.full(n, 2), btags,
                               periodic_pairs)


@dataclass
class Block:
    """Transfinite quad patch: vertical grading between two x-profiles.

    ``bottom``/``top`` map x to y; piecewise-linear profiles get their
    breakpoints forced onto the x grid so kinks land on mesh nodes.
    """

    x0: float
    x1: float
    bottom: object   # float or callable x -> y
    top: object
    nx: int
    ny: int
    breakpoints: tuple = ()

    def profile(self, which, x):
        f = self.bottom if which == "bottom" else self.top
        if callable(f):
            return np.asarray(f(np.asarray(x, dtype=float)), dtype=float)
        return np.full_like(np.asarray(x, dtype=float), float(f))

    def x_nodes(self):
        xs = np.linspace(self.x0, self.x1, self.nx + 1)
        for b in self.breakpoints:
            if self.x0 < b < self.x1:
                i = int(round((b - self.x0) / (self.x1 - self.x0) * self.nx))
                if not np.isclose(xs[i], b, rtol=0, atol=1e-9 * (self.x1 - self.x0)):
                    raise MeshError(
                        f"breakpoint {b} does not land on the x grid of block "
                        f"[{self.x0},{self.x1}] with nx={self.nx}")
                xs[i] = b
        return xs


def _block_nodes(block: Block):
    xs = block.x_nodes()
    yb = block.profile("bottom", xs)
    yt = block.profile("top", xs)
    if np.any(yt - yb <= 0):
        raise MeshError("block has non-positive height")
    eta = np.linspace(0.0, 1.0, block.ny + 1)
    X = np.repeat(xs[None, :], block.ny + 1, axis=0)
    Y = yb[None, :] + eta[:, None] * (yt - yb)[None, :]
    return X, Y


def _assemble_blocks(blocks, snap=1e-9):
    """Merge block node grids into a single vertex/quad list."""
    scale = max(max(abs(b.x0), abs(b.x1)) for b in blocks) + 1.0
    tol = snap * scale
    verts: list[np.ndarray] = []
    index: dict[tuple, int] = {}

    def vid(x, y):
        key = (round(x / tol), round(y / tol))
        if key not in index:
            index[key] = len(verts)
            verts.append(np.array([x, y]))
        return index[key]

    quads, parity = [], []
    for b in blocks:
        X, Y = _block_nodes(b)
        ids = np.empty((b.ny + 1, b.nx + 1), dtype=np.int64)
        for j in range(b.ny + 1):
            for i in range(b.nx + 1):
                ids[j, i] = vid(X[j, i], Y[j, i])
        for j in range(b.ny):
            for i in range(b.nx):
                quads.append([ids[j, i], ids[j, i + 1], ids[j + 1, i + 1], ids[j + 1, i]])
                parity.append((i + j) % 2)
    return np.array(verts), np.array(quads, dtype=np.int64), np.array(parity)


def _default_rect_tagger(xlo, xhi, ylo, yhi, tol):
    def tagger(mid, normal):
        if abs(mid[0] - xlo) < tol and normal[0] < -0.5:
            return "left"
        if abs(mid[0] - xhi) < tol and normal[0] > 0.5:
            return "right"
        if abs(mid[1] - ylo) < tol:
            return "bottom"
        if abs(mid[1] - yhi) < tol:
            return "top"
        return "wall"
    return tagger


def _tag_boundaries(verts, elems, nv, tagger):
    """Tag every boundary face of an element soup via a midpoint/normal rule."""
    count: dict[tuple, int] = {}
    raw: dict[tuple, tuple] = {}
    for e in range(len(elems)):
        k = nv[e]
        vs = elems[e, :k]
        for i in range(k):
            key_raw = (vs[i], vs[(i + 1) % k])
            key = tuple(sorted(key_raw))
            count[key] = count.get(key, 0) + 1
            raw[key] = key_raw
    tags = {}
    for key, c in count.items():
        if c == 1:
            a, b = raw[key]
            mid = 0.5 * (verts[a] + verts[b])
            t = verts[b] - verts[a]
            n = np.array([t[1], -t[0]])
            n /= np.hypot(*n)
            name = tagger(mid, n)
            if name is None:
                raise MeshError(f"untagged boundary face near {mid}")
            tags[key] = name
        elif c > 2:
            raise MeshError("face shared by more than two elements (non-conforming)")
    return tags


def generate_structured_quads(nx: int, ny: int, domain, tagger=None,
                              periodic=(False, False)) -> Mesh:
    """Structured quad mesh of a rectangle or a list of transfinite blocks.

    ``domain`` is either ``(x0, x1, y0, y1)`` or a list of :class:`Block`;
    multi-block layouts must share interface nodes exactly.
    """
    if isinstance(domain, (tuple, list)) and len(domain) == 4 and np.isscalar(domain[0]):
        x0, x1, y0, y1 = map(float, domain)
        blocks = [Block(x0, x1, y0, y1, nx, ny)]
    else:
        blocks = list(domain)
    for b in blocks:
        if b.nx < 1 or b.ny < 1:
            raise MeshError("block needs nx, ny >= 1")
    verts, quads, parity = _assemble_blocks(blocks)
    nv = np.full(len(quads), 4)
    xlo, xhi = verts[:, 0].min(), verts[:, 0].max()
    ylo, yhi = verts[:, 1].min(), verts[:, 1].max()
    tol = 1e-9 * max(xhi - xlo, yhi - ylo)
    if tagger is None:
        tagger = _default_rect_tagger(xlo, xhi, ylo, yhi, tol)
    tags = _tag_boundaries(verts, quads, nv, tagger)
    pairs = _periodic_pairs(verts, tags, periodic, xlo, xhi, ylo, yhi, tol)
    btags = {k: v for k, v in tags.items() if k not in {p for a, b, _ in pairs for p in
             (tuple(sorted(a)), tuple(sorted(b)))}}
    mesh = _build_connectivity(2, verts, quads, nv, btags, pairs, quad_parity=parity)
    check_mesh(mesh)
    return mesh


def _periodic_pairs(verts, tags, periodic, xlo, xhi, ylo, yhi, tol):
    """Match congruent boundary faces across opposite sides of the bounding box."""
    pairs = []
    axes = []
    if periodic[0]:
        axes.append((0, xlo, xhi, np.array([xlo - xhi, 0.0])))
    if len(periodic) > 1 and periodic[1]:
        axes.append((1, ylo, yhi, np.array([0.0, ylo - yhi])))
    for ax, lo, hi, offset in axes:
        lo_faces = {}
        hi_faces = {}
        for key in tags:
            a, b = key
            pa, pb = verts[a], verts[b]
            if abs(pa[ax] - lo) < tol and abs(pb[ax] - lo) < tol:
                mid = tuple(np.round((pa + pb) / 2 / tol).astype(np.int64))
                lo_faces[mid] = key
            elif abs(pa[ax] - hi) < tol and abs(pb[ax] - hi) < tol:
                mid = 0.5 * (pa + pb) + offset
                hi_faces[tuple(np.round(mid / tol).astype(np.int64))] = key
        if set(lo_faces) != set(hi_faces):
            raise MeshError("periodic boundary faces are not congruent")
        for mid, key_hi in hi_faces.items():
            pairs.append((key_hi, lo_faces[mid], offset))
    return pairs


def generate_quasi_uniform_triangles(boundary_edge_length: float, domain,
                                     tagger=None, periodic=(False, False)) -> Mesh:
    """Quasi-uniform conforming triangulation with min angle >= 20 degrees.

    The domain (rectangle tuple or block list) is meshed with structured
    quads at the target spacing and each quad is split along its better
    diagonal (checkerboard on ties).  Raises TriangulationError if the
    quality bound cannot be met.
    """
    h = float(boundary_edge_length)
    if h <= 0:
        raise MeshError("edge length must be positive")
    if isinstance(domain, (tuple, list)) and len(domain) == 4 and np.isscalar(domain[0]):
        x0, x1, y0, y1 = map(float, domain)
        _check_polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
        nx = max(1, int(round((x1 - x0) / h)))
        ny = max(1, int(round((y1 - y0) / h)))
        blocks = [Block(x0, x1, y0, y1, nx, ny)]
    else:
        blocks = list(domain)
    verts, quads, parity = _assemble_blocks(blocks)

    tris = []
    worst = 90.0
    d02 = [(0, 1, 2), (0, 2, 3)]
    d13 = [(0, 1, 3), (1, 2, 3)]
    for q, par in zip(quads, parity):
        pts = verts[q]
        qa = min(_tri_min_angle(pts[list(t)]) for t in d02)
        qb = min(_tri_min_angle(pts[list(t)]) for t in d13)
        # tie-break by checkerboard parity to avoid a directional bias
        if abs(qa - qb) < 1e-9:
            split, quality = (d02 if par == 0 else d13), qa
        elif qa > qb:
            split, quality = d02, qa
        else:
            split, quality = d13, qb
        worst = min(worst, quality)
        for t in split:
            tris.append([q[t[0]], q[t[1]], q[t[2]]])
    if worst < MIN_TRIANGLE_ANGLE_DEG - 1e-9:
        raise TriangulationError(
            f"minimum triangle angle {worst:.2f} deg below "
            f"{MIN_TRIANGLE_ANGLE_DEG} deg; refine or re-block the domain")

    tris = np.array(tris, dtype=np.int64)
    nv = np.full(len(tris), 3)
    xlo, xhi = verts[:, 0].min(), verts[:, 0].max()
    ylo, yhi = verts[:, 1].min(), verts[:, 1].max()
    tol = 1e-9 * max(xhi - xlo, yhi - ylo)
    if tagger is None:
        tagger = _default_rect_tagger(xlo, xhi, ylo, yhi, tol)
    tags = _tag_boundaries(verts, tris, nv, tagger)
    pairs = _periodic_pairs(verts, tags, periodic, xlo, xhi, ylo, yhi, tol)
    btags = {k: v for k, v in tags.items() if k not in {p for a, b, _ in pairs for p in
             (tuple(sorted(a)), tuple(sorted(b)))}}
    mesh = _build_connectivity(2, verts, tris, nv, btags, pairs)
    check_mesh(mesh)
    return mesh


def _tri_min_angle(p):
    ang = []
    for i in range(3):
        u = p[(i + 1) % 3] - p[i]
        v = p[(i + 2) % 3] - p[i]
        nu, nv_ = np.hypot(*u), np.hypot(*v)
        if nu == 0 or nv_ == 0:
            return 0.0
        c = np.dot(u, v) / (nu * nv_)
        ang.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
    return min(ang)


def _check_polygon(pts):
    pts = [np.asarray(p, dtype=float) for p in pts]
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            if np.allclose(p, q, atol=1e-14):
                raise MeshError(f"degenerate polygon: repeated vertex {tuple(p)}")


# ---------------------------------------------------------------------------
# ASCII mesh io
#
# header: `dim n_vertices n_elements`; vertex lines `x [y]`; element lines
# `n_verts v0 v1 [v2 [v3]]` counter-clockwise; boundary lines
# `face_vertex_a face_vertex_b tag_name` (both vertices equal in 1D).
# `#` starts a comment.


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"{mesh.dim} {len(mesh.vertices)} {mesh.n_elements}"]
    for v in mesh.vertices:
        lines.append(" ".join(f"{c:.17g}" for c in v))
    for e in range(mesh.n_elements):
        nv = mesh.elem_nv[e]
        lines.append(f"{nv} " + " ".join(str(int(v)) for v in mesh.elem_verts[e, :nv]))
    for f in mesh.boundary_faces:
        vv = mesh.face_verts[f]
        a = int(vv[0])
        b = int(vv[1]) if len(vv) > 1 and vv[1] >= 0 else a
        name = mesh.tag_names[mesh.face_tag[f]] if mesh.face_tag[f] >= 0 else "wall"
        lines.append(f"{a} {b} {name}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Parse the ASCII mesh format; errors carry the offending line number."""
    rows = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            body = raw.split("#", 1)[0].strip()
            if body:
                rows.append((ln, body.split()))
    if not rows:
        raise MeshError(f"{path}: empty mesh file")

    def fail(ln, msg):
        raise MeshError(f"{path}:{ln}: {msg}")

    ln0, head = rows[0]
    if len(head) != 3:
        fail(ln0, "header must be `dim n_vertices n_elements`")
    try:
        dim, n_v, n_e = (int(x) for x in head)
    except ValueError:
        fail(ln0, "non-integer header")
    if dim not in (1, 2):
        fail(ln0, f"unsupported dimension {dim}")
    if len(rows) < 1 + n_v + n_e:
        fail(ln0, "file shorter than header promises")

    verts = np.zeros((n_v, dim))
    for i in range(n_v):
        ln, tok = rows[1 + i]
        if len(tok) != dim:
            fail(ln, f"expected {dim} coordinates")
        try:
            verts[i] = [float(t) for t in tok]
        except ValueError:
            fail(ln, "bad coordinate")

    max_nv = 2 if dim == 1 else 4
    elems = -np.ones((n_e, max_nv), dtype=np.int64)
    nv_arr = np.zeros(n_e, dtype=np.int64)
    for i in range(n_e):
        ln, tok = rows[1 + n_v + i]
        try:
            k = int(tok[0])
            vs = [int(t) for t in tok[1:]]
        except ValueError:
            fail(ln, "bad element line")
        if len(vs) != k or (dim == 1 and k != 2) or (dim == 2 and k not in (3, 4)):
            fail(ln, f"element with {k} vertices is invalid in {dim}D")
        if any(v < 0 or v >= n_v for v in vs):
            fail(ln, f"element references a missing vertex (element {i})")
        nv_arr[i] = k
        elems[i, :k] = vs
    elems = elems[:, : int(nv_arr.max())]

    btags = {}
    for ln, tok in rows[1 + n_v + n_e:]:
        if len(tok) != 3:
            fail(ln, "boundary line must be `va vb tag`")
        try:
            a, b = int(tok[0]), int(tok[1])
        except ValueError:
            fail(ln, "bad boundary vertex id")
        if a < 0 or a >= n_v or b < 0 or b >= n_v:
            fail(ln, "boundary line references a missing vertex")
        key = (a,) if dim == 1 else (a, b)
        btags[key] = tok[2]

    try:
        mesh = _build_connectivity(dim, verts, elems, nv_arr, btags)
        check_mesh(mesh)
    except MeshError as err:
        raise MeshError(f"{path}: {err}") from err
    return mesh
