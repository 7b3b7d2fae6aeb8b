"""Conforming 2D simplicial meshes with local bisection refinement.

The mesh is a triangulation of an axis-aligned rectangle, optionally cut by
a horizontal slit whose vertices are duplicated so that nodal fields may
jump across the two crack faces.  Refinement is newest-vertex bisection with
conformity closure; coarsening merges complete sibling pairs back into their
parent.  Meshes are immutable after construction: :func:`adapt` returns a new
generation and records enough provenance for nodal transfer between
generations.

Triangle storage convention: the vertex at local position 0 is the "peak"
(newest vertex) and the refinement edge is the opposite edge, i.e. the one
between local vertices 1 and 2.  Bisecting ``(v0, v1, v2)`` at the midpoint
``m`` of ``(v1, v2)`` produces the children ``(m, v0, v1)`` and
``(m, v2, v0)``, both counterclockwise, with ``m`` as their new peak.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "BoundaryLabel",
    "Mesh",
    "MeshGeometry",
    "AdaptSummary",
    "build_initial_mesh",
    "adapt",
    "geometry",
]


class BoundaryLabel(str, Enum):
    """Labels for boundary edges of the slit rectangle."""

    BOTTOM = "bottom"
    RIGHT = "right"
    TOP = "top"
    LEFT_UPPER = "left_upper"
    LEFT_LOWER = "left_lower"
    SLIT = "slit"


def _ekey(a, b):
    return (a, b) if a < b else (b, a)


@dataclass
class AdaptSummary:
    """Bookkeeping for one adapt call; nothing here is fatal."""

    requested_refine: int = 0
    refined: int = 0
    skipped_capped: int = 0
    requested_coarsen: int = 0
    coarsened_pairs: int = 0
    skipped_coarsen: int = 0


class Mesh:
    """Immutable conforming triangulation with a refinement forest.

    Parameters
    ----------
    vertices : (nv, 2) float array
        Vertex coordinates.  Slit vertices appear twice (same coordinates,
        distinct ids) so the two crack faces are topologically separate.
    triangles : (nt, 3) int array
        Counterclockwise vertex ids, peak first (see module docstring).
    levels : (nt,) int array
        Number of bisections separating each triangle from the initial mesh.
    boundary_labels : dict
        Maps sorted vertex-id pairs of boundary edges to :class:`BoundaryLabel`.
    generation : int
        Monotone id, incremented by every adapt call.
    max_levels : int
        Cap on ``levels``; refinement beyond it is silently skipped.
    """

    def __init__(self, vertices, triangles, levels, boundary_labels,
                 generation=0, max_levels=4, parents=None,
                 source_generation=-1, vertex_prov=None, adapt_summary=None,
                 pair_tags=None, tag_counter=0, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.levels = np.ascontiguousarray(levels, dtype=np.int64)
        self.boundary_labels = dict(boundary_labels)
        self.generation = int(generation)
        self.max_levels = int(max_levels)
        self.parents = (np.full(len(self.triangles), -1, dtype=np.int64)
                        if parents is None else np.asarray(parents, dtype=np.int64))
        # two triangles born of the same bisection share a pair tag; -1 when
        # the sibling relation is unknown (initial triangles, merged parents)
        self.pair_tags = (np.full(len(self.triangles), -1, dtype=np.int64)
                          if pair_tags is None
                          else np.asarray(pair_tags, dtype=np.int64))
        self.tag_counter = int(tag_counter)
        self.source_generation = int(source_generation)
        # Per-vertex provenance relative to the source generation:
        # (old_id, -1) for surviving vertices, (a, b) for edge midpoints where
        # a, b are ids in *this* mesh (always smaller than the midpoint's id).
        self.vertex_prov = vertex_prov
        self.adapt_summary = adapt_summary
        self._build_edges()
        self._cache = {}
        if validate:
            self._validate()

    # ------------------------------------------------------------------
    # Derived connectivity
    # ------------------------------------------------------------------

    def _build_edges(self):
        t = self.triangles
        # local edge i is opposite local vertex i
        pairs = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        pairs = np.sort(pairs.reshape(-1, 2), axis=1)
        self.edges, inv = np.unique(pairs, axis=0, return_inverse=True)
        self.tri_edges = inv.reshape(-1, 3)
        ne = len(self.edges)
        counts = np.bincount(inv, minlength=ne)
        if counts.max(initial=0) > 2:
            raise ValueError("non-manifold edge: more than 2 incident triangles")
        self.edge_tris = np.full((ne, 2), -1, dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        tri_of_slot = order // 3
        starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
        self.edge_tris[:, 0] = tri_of_slot[starts]
        shared = counts == 2
        self.edge_tris[shared, 1] = tri_of_slot[starts[shared] + 1]
        self.boundary_edge_mask = counts == 1

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def refinement_edges(self):
        """Edge index of each triangle's refinement edge (opposite the peak)."""
        return self.tri_edges[:, 0]

    def boundary_vertices(self, *labels):
        """Sorted vertex ids incident to boundary edges with any given label."""
        want = {BoundaryLabel(l) for l in labels}
        ids = set()
        for (a, b), lab in self.boundary_labels.items():
            if lab in want:
                ids.add(a)
                ids.add(b)
        return np.array(sorted(ids), dtype=np.int64)

    def signed_areas(self):
        v = self.vertices
        t = self.triangles
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def _validate(self):
        if self.triangles.size and self.triangles.max() >= self.n_vertices:
            raise ValueError("triangle references missing vertex")
        areas = self.signed_areas()
        bad = np.where(areas <= 0)[0]
        if bad.size:
            raise ValueError(f"triangle {bad[0]} has non-positive area {areas[bad[0]]:g}")
        # conformity: labels must cover exactly the boundary edges
        labelled = {tuple(e) for e in map(tuple, self.edges[self.boundary_edge_mask])}
        keys = set(self.boundary_labels)
        if labelled != keys:
            missing = labelled - keys
            extra = keys - labelled
            raise ValueError(f"boundary label mismatch: missing={sorted(missing)[:4]} "
                             f"extra={sorted(extra)[:4]}")
        if (self.levels > self.max_levels).any():
            raise ValueError("refinement level exceeds cap")


@dataclass
class MeshGeometry:
    """Per-triangle geometric data (diameters, areas, normals)."""

    h: np.ndarray              # longest edge length per triangle
    area: np.ndarray
    edge_lengths: np.ndarray   # (nt, 3), local edge i opposite vertex i
    normals: np.ndarray        # (nt, 3, 2), unit outward normal per local edge
    shape_ratio: np.ndarray    # diameter over inscribed-circle diameter


def geometry(mesh):
    """Compute per-triangle diameter, area, edge lengths and outward normals.

    Raises
    ------
    ValueError
        If a triangle is degenerate (non-positive area), naming it.
    """
    v = mesh.vertices
    t = mesh.triangles
    x = v[t]                                  # (nt, 3, 2)
    area = mesh.signed_areas()
    bad = np.where(area <= 0)[0]
    if bad.size:
        raise ValueError(f"degenerate triangle {bad[0]}")
    # edge i runs opposite local vertex i
    tang = x[:, [2, 0, 1], :] - x[:, [1, 2, 0], :]     # (nt, 3, 2)
    lengths = np.linalg.norm(tang, axis=2)
    h = lengths.max(axis=1)
    # rotate tangent by -90 degrees; for CCW triangles this points outward
    normals = np.stack([tang[:, :, 1], -tang[:, :, 0]], axis=2)
    normals /= lengths[:, :, None]
    inradius = area / (0.5 * lengths.sum(axis=1))
    return MeshGeometry(h=h, area=area, edge_lengths=lengths, normals=normals,
                        shape_ratio=h / (2.0 * inradius))


# ----------------------------------------------------------------------
# Initial mesh
# ----------------------------------------------------------------------

def build_initial_mesh(domain, slit, n0, max_levels=4):
    """Triangulate ``[0, Lx] x [0, Ly]`` on an ``n0 x n0`` grid of split quads.

    Each grid cell is cut by one diagonal (direction alternating with cell
    parity), so the refinement edge of every initial triangle is its
    hypotenuse and uniform refinement exactly doubles the triangle count.

    Parameters
    ----------
    domain : tuple (Lx, Ly)
        Rectangle extents; the origin is (0, 0).
    slit : tuple (x_start, x_end, y) or None
        Horizontal crack segment.  It must lie on an interior gridline with
        endpoints on grid vertices.  Grid vertices on the slit are duplicated
        (except an interior tip) so the two faces are disconnected.
    n0 : int
        Subdivisions per axis; ``n0 >= 1`` without a slit, ``n0 >= 2`` with.
    """
    lx, ly = float(domain[0]), float(domain[1])
    n0 = int(n0)
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    if slit is not None and n0 < 2:
        raise ValueError("a slit requires n0 >= 2 (interior gridline needed)")
    dx, dy = lx / n0, ly / n0

    def vid(i, j):
        return j * (n0 + 1) + i

    # linspace pins the endpoints exactly, so boundary tests below are exact
    xs = np.linspace(0.0, lx, n0 + 1)
    ys = np.linspace(0.0, ly, n0 + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    tris = []
    for j in range(n0):
        for i in range(n0):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris.append((ll, lr, ur))
                tris.append((ll, ur, ul))
            else:
                tris.append((lr, ur, ul))
                tris.append((lr, ul, ll))
    tris = np.array(tris, dtype=np.int64)

    slit_y = None
    if slit is not None:
        sx0, sx1, sy = map(float, slit)
        if not (sx0 < sx1):
            raise ValueError("slit must have positive length")
        jy = sy / dy
        if abs(jy - round(jy)) > 1e-12 * n0 or not (0 < round(jy) < n0):
            raise ValueError(f"slit height {sy} is not on an interior gridline")
        for xe in (sx0, sx1):
            ix = xe / dx
            if abs(ix - round(ix)) > 1e-12 * n0 or not (0 <= round(ix) <= n0):
                raise ValueError(f"slit endpoint x={xe} is not a grid vertex")
        jy = int(round(jy))
        i0, i1 = int(round(sx0 / dx)), int(round(sx1 / dx))
        slit_y = ys[jy]

        # duplicate grid vertices on the slit, excluding interior tips
        dup_is = list(range(i0, i1 + 1))
        if sx0 > 0.0:                      # interior left endpoint is a tip
            dup_is.remove(i0)
        if sx1 < lx:                       # interior right endpoint is a tip
            dup_is.remove(i1)
        verts_list = [verts]
        upper_of = {}
        for i in dup_is:
            old = vid(i, jy)
            upper_of[old] = len(verts) + len(upper_of)
            verts_list.append(verts[old:old + 1])
        verts = np.vstack(verts_list)

        # triangles above the slit line use the upper copies
        cy = verts[tris].mean(axis=1)[:, 1]
        above = cy > slit_y
        for old, new in upper_of.items():
            hit = above & (tris == old).any(axis=1)
            rows = np.where(hit)[0]
            for r in rows:
                tris[r][tris[r] == old] = new

    # peak = vertex opposite the longest edge (ties by first occurrence)
    tris = _orient_peak_longest_edge(verts, tris)

    levels = np.zeros(len(tris), dtype=np.int64)
    mesh = Mesh(verts, tris, levels, {}, generation=0, max_levels=max_levels,
                validate=False)
    labels = _label_boundary(mesh, lx, ly, slit_y)
    return Mesh(verts, tris, levels, labels, generation=0,
                max_levels=max_levels)


def _orient_peak_longest_edge(verts, tris):
    out = np.array(tris, dtype=np.int64)
    x = verts[out]
    # edge i opposite vertex i
    lens = np.linalg.norm(x[:, [2, 0, 1], :] - x[:, [1, 2, 0], :], axis=2)
    peak = lens.argmax(axis=1)
    for k in (1, 2):
        rows = peak == k
        out[rows] = np.roll(out[rows], -k, axis=1)
    return out


def _label_boundary(mesh, lx, ly, slit_y):
    v = mesh.vertices
    labels = {}
    for a, b in mesh.edges[mesh.boundary_edge_mask]:
        pa, pb = v[a], v[b]
        mid = 0.5 * (pa + pb)
        if pa[1] == 0.0 and pb[1] == 0.0:
            lab = BoundaryLabel.BOTTOM
        elif pa[1] == ly and pb[1] == ly:
            lab = BoundaryLabel.TOP
        elif pa[0] == lx and pb[0] == lx:
            lab = BoundaryLabel.RIGHT
        elif pa[0] == 0.0 and pb[0] == 0.0:
            if slit_y is None or mid[1] > slit_y:
                lab = BoundaryLabel.LEFT_UPPER
            else:
                lab = BoundaryLabel.LEFT_LOWER
        elif slit_y is not None and pa[1] == slit_y and pb[1] == slit_y:
            lab = BoundaryLabel.SLIT
        else:
            raise ValueError(f"cannot label boundary edge {(a, b)} at {mid}")
        labels[_ekey(int(a), int(b))] = lab
    return labels


# ----------------------------------------------------------------------
# Adaptation
# ----------------------------------------------------------------------

def adapt(mesh, refine_ids, coarsen_ids=()):
    """Coarsen sibling pairs, then bisect marked triangles with closure.

    Triangles at the level cap are skipped (reported in the summary, never
    fatal), as are coarsening requests that do not form complete sibling
    pairs or whose removal would leave a hanging node.  The result is a new
    conforming :class:`Mesh` one generation later, carrying the vertex
    provenance needed by nodal transfer.
    """
    refine_ids = np.unique(np.asarray(list(refine_ids), dtype=np.int64)) \
        if len(list(refine_ids)) else np.empty(0, dtype=np.int64)
    coarsen_ids = np.unique(np.asarray(list(coarsen_ids), dtype=np.int64)) \
        if len(list(coarsen_ids)) else np.empty(0, dtype=np.int64)
    nt = mesh.n_triangles
    for ids, what in ((refine_ids, "refine"), (coarsen_ids, "coarsen")):
        if ids.size and (ids.min() < 0 or ids.max() >= nt):
            raise ValueError(f"{what} set contains invalid triangle ids")
    if np.intersect1d(refine_ids, coarsen_ids).size:
        raise ValueError("refine and coarsen sets must be disjoint")

    summary = AdaptSummary(requested_refine=len(refine_ids),
                           requested_coarsen=len(coarsen_ids))

    marked = _closure(mesh, refine_ids, summary)

    inter = _coarsen(mesh, coarsen_ids, marked, summary)
    (verts, tris, levels, parents, tags, labels, prov, marked_keys) = inter

    out = _refine(verts, tris, levels, parents, tags, labels, prov,
                  marked_keys, mesh.tag_counter)
    verts, tris, levels, parents, tags, counter, labels, prov = out

    return Mesh(verts, tris, levels, labels,
                generation=mesh.generation + 1, max_levels=mesh.max_levels,
                parents=parents, source_generation=mesh.generation,
                vertex_prov=np.asarray(prov, dtype=np.int64).reshape(-1, 2),
                pair_tags=tags, tag_counter=counter,
                adapt_summary=summary)


def _closure(mesh, refine_ids, summary):
    """Edge-marking fixpoint: compatible-chain closure with level veto.

    An edge may only be marked if every incident triangle can legally split
    it: capped triangles forbid all their edges, triangles one bisection
    below the cap forbid their non-refinement edges (a second bisection
    would overshoot), and a triangle whose refinement edge is forbidden
    cannot bisect at all, which cascades to its own edges.
    """
    T = mesh.tri_edges
    lev = mesh.levels
    cap = mesh.max_levels
    marked = np.zeros(mesh.n_edges, dtype=bool)
    forbidden = np.zeros(mesh.n_edges, dtype=bool)

    forbidden[T[lev >= cap].ravel()] = True
    at_rim = lev == cap - 1
    if at_rim.any():
        forbidden[T[at_rim][:, 1:].ravel()] = True

    want = T[refine_ids, 0]
    marked[want[~forbidden[want]]] = True

    while True:
        changed = False
        m3 = marked[T]
        blocked = m3.any(axis=1) & forbidden[T[:, 0]]
        if blocked.any():
            bad = T[blocked].ravel()
            if marked[bad].any() or (~forbidden[bad]).any():
                changed = True
            forbidden[bad] = True
            marked[bad] = False
            m3 = marked[T]
        need = m3.any(axis=1) & ~m3[:, 0]
        add = T[need, 0]
        add = add[~forbidden[add]]
        if add.size:
            changed = True
            marked[add] = True
        if not changed:
            break

    done = marked[T[refine_ids, 0]] if refine_ids.size else np.empty(0, bool)
    summary.skipped_capped = int((~done).sum())
    summary.refined = int(marked[T[:, 0]].sum())
    return marked


def _vertex_incidence(triangles, nv):
    flat = triangles.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=nv)
    starts = np.concatenate(([0], np.cumsum(counts)))
    return order // 3, starts


def _coarsen(mesh, coarsen_ids, marked, summary):
    """Merge eligible sibling pairs; returns intermediate mesh pieces."""
    v = mesh.vertices
    t = mesh.triangles
    lev = mesh.levels
    nt, nv = mesh.n_triangles, mesh.n_vertices

    elig = np.zeros(nt, dtype=bool)
    elig[coarsen_ids] = True
    elig &= lev >= 1
    elig &= ~marked[mesh.tri_edges].any(axis=1)

    merges = []           # (left_tri, right_tri) -> parent (a, b, c)
    drop_tri = np.zeros(nt, dtype=bool)
    drop_vert = np.zeros(nv, dtype=bool)

    if elig.any():
        tags = mesh.pair_tags
        inc_tris, starts = _vertex_incidence(t, nv)
        peaks = np.unique(t[elig, 0])

        def try_pair(i, j, claimed, pairs):
            """Validate (i as right child, j as left child) around peak m."""
            if j is None or j == i or j in claimed:
                return False
            v0, v1, v2 = t[i, 2], t[j, 2], t[i, 1]
            if lev[i] != lev[j]:
                return False
            m = t[i, 0]
            midpoint = 0.5 * (v[v1] + v[v2])
            if not np.allclose(v[m], midpoint, rtol=0.0,
                               atol=1e-12 * (1.0 + np.abs(midpoint).max())):
                return False
            d1 = v[v1] - v[v0]
            d2 = v[v2] - v[v0]
            if d1[0] * d2[1] - d1[1] * d2[0] <= 0.0:
                return False
            claimed.update((int(i), int(j)))
            pairs.append((int(i), int(j), (int(v0), int(v1), int(v2))))
            return True

        for m in peaks:
            inc = np.sort(inc_tris[starts[m]:starts[m + 1]])
            # every triangle touching m must be an eligible child with peak m
            if not (elig[inc].all() and (t[inc, 0] == m).all()):
                continue
            by_second = {t[i, 1]: i for i in inc}
            by_tag = {}
            for i in inc:
                if tags[i] >= 0:
                    by_tag.setdefault(tags[i], []).append(i)
            pairs = []
            claimed = set()
            # first pass: exact siblings recorded at bisection time
            for tag, members in sorted(by_tag.items()):
                if len(members) == 2:
                    i, j = members
                    if not try_pair(i, j, claimed, pairs):
                        try_pair(j, i, claimed, pairs)
            # second pass: structural matching for untagged leftovers
            for i in inc:
                if i in claimed:
                    continue
                try_pair(i, by_second.get(t[i, 2]), claimed, pairs)
            if len(claimed) == len(inc):
                for i, j, parent in pairs:
                    merges.append((i, j, parent, int(lev[i]) - 1))
                    drop_tri[i] = drop_tri[j] = True
                drop_vert[m] = True

    summary.coarsened_pairs = len(merges)
    summary.skipped_coarsen = int(elig.sum() - 2 * len(merges))

    labels = dict(mesh.boundary_labels)
    for i, j, (v0, v1, v2), _ in merges:
        m = int(t[i, 0])
        k1, k2 = _ekey(m, v1), _ekey(m, v2)
        if k1 in labels or k2 in labels:
            lab1 = labels.pop(k1, None)
            lab2 = labels.pop(k2, None)
            if lab1 != lab2 or lab1 is None:
                raise ValueError("inconsistent labels on sibling boundary edges")
            labels[_ekey(v1, v2)] = lab1

    keep_vert = ~drop_vert
    old2new = np.cumsum(keep_vert) - 1
    verts = v[keep_vert]

    keep_rows = np.where(~drop_tri)[0]
    tris = [old2new[t[keep_rows]]]
    levels = [lev[keep_rows]]
    parents = [keep_rows]
    tags = [mesh.pair_tags[keep_rows]]
    if merges:
        ptris = np.array([mg[2] for mg in merges], dtype=np.int64)
        tris.append(old2new[ptris])
        levels.append(np.array([mg[3] for mg in merges], dtype=np.int64))
        parents.append(np.array([mg[0] for mg in merges], dtype=np.int64))
        tags.append(np.full(len(merges), -1, dtype=np.int64))
    tris = np.vstack(tris)
    levels = np.concatenate(levels)
    parents = np.concatenate(parents)
    tags = np.concatenate(tags)

    labels = {_ekey(int(old2new[a]), int(old2new[b])): lab
              for (a, b), lab in labels.items()}
    old_ids = np.where(keep_vert)[0]
    prov = [(int(o), -1) for o in old_ids]

    marked_keys = set()
    for e in np.where(marked)[0]:
        a, b = mesh.edges[e]
        marked_keys.add(_ekey(int(old2new[a]), int(old2new[b])))
    return verts, tris, levels, parents, tags, labels, prov, marked_keys


def _refine(verts, tris, levels, parents, tags, labels, prov, marked_keys,
            tag_counter):
    """Bisect every triangle whose refinement edge is marked."""
    vlist = [verts]
    n_base = len(verts)
    extra = []
    midcache = {}

    def midpoint(a, b):
        # marked edges live on the pre-refinement mesh, so a, b < n_base
        k = _ekey(a, b)
        mid = midcache.get(k)
        if mid is not None:
            return mid
        mid = n_base + len(extra)
        extra.append(0.5 * (vlist[0][a] + vlist[0][b]))
        prov.append((a, b))
        midcache[k] = mid
        lab = labels.pop(k, None)
        if lab is not None:
            labels[_ekey(a, mid)] = lab
            labels[_ekey(mid, b)] = lab
        return mid

    ref_marked = np.fromiter(
        (_ekey(int(a), int(b)) in marked_keys for _, a, b in tris),
        dtype=bool, count=len(tris)) if marked_keys else np.zeros(len(tris), bool)

    keep = np.where(~ref_marked)[0]
    out_tris = [tris[keep]]
    out_levels = [levels[keep]]
    out_parents = [parents[keep]]
    out_tags = [tags[keep]]

    add_t, add_l, add_p, add_g = [], [], [], []
    counter = tag_counter
    for idx in np.where(ref_marked)[0]:
        v0, v1, v2 = map(int, tris[idx])
        lv = int(levels[idx])
        src = int(parents[idx])
        m = midpoint(v1, v2)
        tag = counter
        counter += 1
        for child in ((m, v0, v1), (m, v2, v0)):
            ca, cb = child[1], child[2]
            if _ekey(ca, cb) in marked_keys:
                m2 = midpoint(ca, cb)
                add_t.append((m2, child[0], ca))
                add_t.append((m2, cb, child[0]))
                add_l.extend((lv + 2, lv + 2))
                add_p.extend((src, src))
                add_g.extend((counter, counter))
                counter += 1
            else:
                add_t.append(child)
                add_l.append(lv + 1)
                add_p.append(src)
                add_g.append(tag)

    if add_t:
        out_tris.append(np.array(add_t, dtype=np.int64))
        out_levels.append(np.array(add_l, dtype=np.int64))
        out_parents.append(np.array(add_p, dtype=np.int64))
        out_tags.append(np.array(add_g, dtype=np.int64))
    if extra:
        vlist.append(np.array(extra))
    return (np.vstack(vlist), np.vstack(out_tris), np.concatenate(out_levels),
            np.concatenate(out_parents), np.concatenate(out_tags), counter,
            labels, prov)
