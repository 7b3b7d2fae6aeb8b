"""Damage-field minimization with bound clamping and crack-set pinning.

The critical-point condition of the regularized energy is linear in the
damage field: find v with

    rho_pf (grad v, grad phi) + (mu (1 - kappa) |grad u|^2 v, phi)
        = nu_pf (1, phi)

for all test functions phi vanishing on the crack set.  One SPD solve,
followed by the threshold rules (values below Xi_v drop to 0, values above
1 clip to 1), realizes the algorithm's inner minimization step.

With an empty crack set and a vanishing reaction term the system is a pure
Neumann problem with an incompatible source, i.e. singular; in that regime
the unconstrained solution lies above 1 everywhere, so the clamped outcome
is identically 1 and is returned directly without a solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import (FeFunction, DirichletSet, assemble_stiffness, assemble_mass,
                  weighted_mass, apply_dirichlet, element_gradients,
                  transfer_pinned)
from .linsolve import solve_spd

__all__ = [
    "CrackSet",
    "solve_phasefield",
    "clamp_and_threshold",
    "update_crack_set",
    "phasefield_system",
]

# If the largest element reaction coefficient is below this fraction of the
# source weight nu_pf, the unconstrained minimizer exceeds 1/SHORTCUT_FACTOR
# everywhere and clamping returns exactly 1; solving the (near-singular)
# system is pointless then.
SHORTCUT_FACTOR = 0.5


@dataclass
class CrackSet:
    """Vertex dofs permanently pinned to v = 0."""

    ids: np.ndarray
    generation: int
    xi_cr: float

    def __post_init__(self):
        self.ids = np.unique(np.asarray(self.ids, dtype=np.int64))

    @classmethod
    def empty(cls, mesh, xi_cr=1e-2):
        return cls(np.empty(0, dtype=np.int64), mesh.generation, xi_cr)

    def mask(self, n):
        m = np.zeros(n, dtype=bool)
        m[self.ids] = True
        return m

    def transfer(self, src_mesh, dst_mesh):
        pinned = transfer_pinned(self.mask(src_mesh.n_vertices),
                                 src_mesh, dst_mesh)
        return CrackSet(np.where(pinned)[0], dst_mesh.generation, self.xi_cr)


def phasefield_system(u, params, mesh):
    """Assemble (A, b) of the damage equation for the current displacement."""
    gu = element_gradients(u, mesh)
    reaction = params.mu * (1.0 - params.kappa) * (gu ** 2).sum(axis=1)
    A = params.rho_pf * assemble_stiffness(mesh, 1.0) \
        + weighted_mass(mesh, reaction)
    ones = np.ones(mesh.n_vertices)
    b = params.nu_pf * (assemble_mass(mesh, 1.0) @ ones)
    return A, b, reaction


def solve_phasefield(u, params, crack, mesh, x0=None, tol=1e-12,
                     max_iter=None, return_report=False):
    """Solve the damage critical-point system with crack dofs pinned to 0.

    Returns the raw (unclamped) solution; pair with
    :func:`clamp_and_threshold`.  With ``return_report=True`` also returns a
    dict with the solver report, the stationarity residual relative to the
    right-hand side norm, and whether the intact shortcut fired.
    """
    u.check_bound(mesh)
    if crack.generation != mesh.generation:
        raise ValueError("crack set bound to a different generation")

    A, b, reaction = phasefield_system(u, params, mesh)

    if crack.ids.size == 0 and reaction.max(initial=0.0) \
            <= SHORTCUT_FACTOR * params.nu_pf:
        v = FeFunction.constant(mesh, 1.0)
        if return_report:
            return v, {"report": None, "stationarity": None, "shortcut": True}
        return v

    ds = DirichletSet(crack.ids, np.zeros(len(crack.ids)))
    Ac, bc = apply_dirichlet(A, b, ds)
    x = x0.values if isinstance(x0, FeFunction) else x0
    if x is not None:
        x = x.copy()
        x[crack.ids] = 0.0
    sol, report = solve_spd(Ac, bc, tol=tol, max_iter=max_iter, x0=x,
                            context="phase-field solve")
    if not report.converged:
        raise RuntimeError(
            f"phase-field solve failed to converge "
            f"(residual {report.relative_residual:.3e})")
    v = FeFunction(sol, mesh.generation)
    if return_report:
        resid = bc - Ac @ sol
        free = np.ones(mesh.n_vertices, dtype=bool)
        free[crack.ids] = False
        stat = np.abs(resid[free]).max(initial=0.0) / np.linalg.norm(bc)
        return v, {"report": report, "stationarity": stat, "shortcut": False}
    return v


def clamp_and_threshold(v, xi_v):
    """Algorithm threshold rules: below xi_v snap to 0, above 1 clip to 1."""
    vals = v.values.copy()
    vals[vals < xi_v] = 0.0
    vals[vals > 1.0] = 1.0
    return FeFunction(vals, v.generation)


def update_crack_set(v, mesh, xi_cr, old):
    """Pin both endpoints of every edge whose endpoint values are both at or
    below ``xi_cr`` (P1: the edge-wise condition reduces to the endpoints).
    The union with the old set makes growth monotone."""
    v.check_bound(mesh)
    if old.generation != mesh.generation:
        raise ValueError("crack set bound to a different generation")
    e = mesh.edges
    low = v.values[e] <= xi_cr
    hit = low.all(axis=1)
    ids = np.union1d(old.ids, np.unique(e[hit]))
    return CrackSet(ids, mesh.generation, xi_cr)
