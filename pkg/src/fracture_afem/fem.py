"""P1 Lagrange scalar finite elements: assembly, constraints, transfer.

All quadratures here are exact for the integrands they meet: element mass
matrices are the analytic P1 mass, stiffness uses the element average of a
nodal coefficient (exact, since P1 gradients are element constants and the
integral of a linear coefficient is its mean times the area).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FeFunction",
    "DirichletSet",
    "element_data",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_load",
    "apply_dirichlet",
    "transfer",
    "element_gradients",
]


@dataclass
class FeFunction:
    """Nodal values of a continuous piecewise-linear field on one mesh
    generation."""

    values: np.ndarray
    generation: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.isfinite(self.values).all():
            raise ValueError("FeFunction values must be finite")

    @classmethod
    def zeros(cls, mesh):
        return cls(np.zeros(mesh.n_vertices), mesh.generation)

    @classmethod
    def constant(cls, mesh, value):
        return cls(np.full(mesh.n_vertices, float(value)), mesh.generation)

    @classmethod
    def from_callable(cls, mesh, fn):
        x = mesh.vertices
        return cls(np.asarray([fn(p[0], p[1]) for p in x], dtype=np.float64),
                   mesh.generation)

    def check_bound(self, mesh):
        if self.generation != mesh.generation:
            raise ValueError(
                f"FeFunction bound to generation {self.generation}, "
                f"mesh is generation {mesh.generation}")
        if len(self.values) != mesh.n_vertices:
            raise ValueError("FeFunction length does not match vertex count")


@dataclass
class DirichletSet:
    """Constrained dofs and their prescribed values."""

    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.dofs) != len(self.values):
            raise ValueError("dof/value length mismatch")
        uniq, first = np.unique(self.dofs, return_index=True)
        if len(uniq) != len(self.dofs):
            # tolerate exact repeats, reject conflicts
            order = np.argsort(self.dofs, kind="stable")
            d, v = self.dofs[order], self.values[order]
            same = d[1:] == d[:-1]
            if (same & (v[1:] != v[:-1])).any():
                raise ValueError("conflicting values for a repeated dof")
            self.dofs, self.values = uniq, v[np.searchsorted(d, uniq)]


# ----------------------------------------------------------------------
# Element caches
# ----------------------------------------------------------------------

_MASS_PATTERN = np.array([[2.0, 1.0, 1.0],
                          [1.0, 2.0, 1.0],
                          [1.0, 1.0, 2.0]]) / 12.0


def element_data(mesh):
    """Per-element areas and shape-function gradients, cached on the mesh."""
    cached = mesh._cache.get("elem")
    if cached is not None:
        return cached
    x = mesh.vertices[mesh.triangles]           # (nt, 3, 2)
    b = x[:, [1, 2, 0], 1] - x[:, [2, 0, 1], 1]
    c = x[:, [2, 0, 1], 0] - x[:, [1, 2, 0], 0]
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    # rows of grads are the constant gradients of the three hat functions
    grads = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.triangles, (1, 3)).reshape(-1)
    cached = {"area": area, "grads": grads, "rows": rows, "cols": cols}
    mesh._cache["elem"] = cached
    return cached


def _scatter(mesh, local):
    ed = element_data(mesh)
    n = mesh.n_vertices
    A = sp.coo_matrix((local.reshape(-1), (ed["rows"], ed["cols"])),
                      shape=(n, n))
    return A.tocsr()


def assemble_mass(mesh, density=1.0):
    """Consistent mass matrix M_ij = density * integral(xi_i xi_j)."""
    density = np.asarray(density, dtype=np.float64)
    if np.any(density <= 0):
        raise ValueError("density must be positive")
    ed = element_data(mesh)
    w = density * ed["area"]
    local = w[:, None, None] * _MASS_PATTERN[None, :, :]
    return _scatter(mesh, local)


def weighted_mass(mesh, per_element):
    """Mass matrix with a nonnegative element-constant weight."""
    w = np.asarray(per_element, dtype=np.float64)
    ed = element_data(mesh)
    local = (w * ed["area"])[:, None, None] * _MASS_PATTERN[None, :, :]
    return _scatter(mesh, local)


def assemble_stiffness(mesh, coeff):
    """Stiffness A_ij = sum_tau c_tau integral(grad xi_i . grad xi_j).

    ``coeff`` may be a scalar, a per-element array, or a nodal
    :class:`FeFunction` (averaged per element, which integrates a linear
    coefficient exactly against the constant P1 gradients).
    """
    ed = element_data(mesh)
    if isinstance(coeff, FeFunction):
        coeff.check_bound(mesh)
        c = coeff.values[mesh.triangles].mean(axis=1)
    else:
        c = np.asarray(coeff, dtype=np.float64)
        if c.ndim == 0:
            c = np.full(mesh.n_triangles, float(c))
    if (c < 0).any():
        raise ValueError("stiffness coefficient must be nonnegative")
    G = ed["grads"]
    local = np.einsum('nik,njk->nij', G, G) * (c * ed["area"])[:, None, None]
    return _scatter(mesh, local)


def assemble_load(mesh, f):
    """Load vector b_i = integral(f_h xi_i) for a nodal f."""
    f.check_bound(mesh)
    return assemble_mass(mesh, 1.0) @ f.values


def apply_dirichlet(A, b, ds):
    """Symmetric elimination of constrained dofs.

    Returns a new pair ``(A', b')`` with constrained rows and columns zeroed,
    unit diagonal on constrained dofs, and the right-hand side adjusted so
    that the free block solves the original problem with the prescribed
    values substituted.
    """
    n = b.shape[0]
    if len(ds.dofs) == 0:
        return A.copy(), b.copy()
    if ds.dofs.min() < 0 or ds.dofs.max() >= n:
        raise ValueError("Dirichlet dof out of range")
    g = np.zeros(n)
    g[ds.dofs] = ds.values
    free = np.ones(n)
    free[ds.dofs] = 0.0
    b2 = free * (b - A @ g)
    b2[ds.dofs] = ds.values
    P = sp.diags(free)
    pin = np.zeros(n)
    pin[ds.dofs] = 1.0
    A2 = (P @ A @ P + sp.diags(pin)).tocsr()
    return A2, b2


def transfer(src, src_mesh, dst_mesh):
    """Carry nodal values to the next mesh generation.

    Surviving vertices keep their values; each bisection midpoint takes the
    average of its edge endpoints, which reproduces the P1 field exactly
    under refinement.
    """
    src.check_bound(src_mesh)
    if dst_mesh.source_generation != src_mesh.generation or \
            dst_mesh.vertex_prov is None:
        raise ValueError("destination mesh was not adapted from source mesh")
    prov = dst_mesh.vertex_prov
    vals = np.empty(dst_mesh.n_vertices)
    keep = prov[:, 1] < 0
    vals[keep] = src.values[prov[keep, 0]]
    mids = ~keep
    vals[mids] = 0.5 * (vals[prov[mids, 0]] + vals[prov[mids, 1]])
    return FeFunction(vals, dst_mesh.generation)


def transfer_pinned(pinned_mask, src_mesh, dst_mesh):
    """Propagate a boolean pinned-dof mask: a midpoint is pinned only if
    both its parent endpoints are."""
    if dst_mesh.source_generation != src_mesh.generation or \
            dst_mesh.vertex_prov is None:
        raise ValueError("destination mesh was not adapted from source mesh")
    prov = dst_mesh.vertex_prov
    out = np.zeros(dst_mesh.n_vertices, dtype=bool)
    keep = prov[:, 1] < 0
    out[keep] = pinned_mask[prov[keep, 0]]
    mids = ~keep
    out[mids] = out[prov[mids, 0]] & out[prov[mids, 1]]
    return out


def element_gradients(u, mesh):
    """Constant gradient of a P1 field on each triangle, shape (nt, 2)."""
    u.check_bound(mesh)
    ed = element_data(mesh)
    return np.einsum('nik,ni->nk', ed["grads"], u.values[mesh.triangles])
