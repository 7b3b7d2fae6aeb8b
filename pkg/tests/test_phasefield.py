"""Damage solve, clamping, and crack-set bookkeeping."""

import numpy as np
import pytest

from fracture_afem.dynamics import MaterialParams
from fracture_afem.fem import FeFunction, element_gradients
from fracture_afem.mesh import adapt, build_initial_mesh
from fracture_afem.phasefield import (CrackSet, clamp_and_threshold,
                                      phasefield_system, solve_phasefield,
                                      update_crack_set)

MP = MaterialParams(mu=1.0, varrho=1.0, eta=0.5, kappa=1e-10, epsilon=0.2)


# ----------------------------------------------------------------------
# Oracle: dense direct solve of the same variational system, assembled
# independently entry by entry.
# ----------------------------------------------------------------------

def dense_phasefield_oracle(mesh, u_vals, params, pinned):
    n = mesh.n_vertices
    A = np.zeros((n, n))
    b = np.zeros(n)
    mass_loc = np.array([[2.0, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        J = np.array([p[1] - p[0], p[2] - p[0]])
        area = 0.5 * abs(np.linalg.det(J))
        # hat gradients by solving against edge differences
        G = np.zeros((3, 2))
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            rhs = np.array([e[1] - e[0], e[2] - e[0]])
            G[i] = np.linalg.solve(J, rhs)
        gu = np.linalg.solve(J, np.array([u_vals[tri[1]] - u_vals[tri[0]],
                                          u_vals[tri[2]] - u_vals[tri[0]]]))
        react = params.mu * (1.0 - params.kappa) * (gu @ gu)
        for i in range(3):
            b[tri[i]] += params.nu_pf * area / 3.0
            for j in range(3):
                A[tri[i], tri[j]] += params.rho_pf * area * (G[i] @ G[j]) \
                    + react * area * mass_loc[i, j]
    for d in pinned:
        A[d, :] = 0.0
        A[:, d] = 0.0
        A[d, d] = 1.0
        b[d] = 0.0
    return np.linalg.solve(A, b)


# ----------------------------------------------------------------------
# solve_phasefield
# ----------------------------------------------------------------------

def test_flat_displacement_gives_intact_field():
    mesh = build_initial_mesh((1.0, 1.0), None, 2)
    v, rep = solve_phasefield(FeFunction.zeros(mesh), MP,
                              CrackSet.empty(mesh), mesh, return_report=True)
    assert rep["shortcut"]
    assert np.allclose(v.values, 1.0)


def test_single_strained_element_matches_dense_oracle():
    mesh = build_initial_mesh((1.0, 1.0), None, 1)
    # gradient on one triangle only: nonzero value at the off-diagonal vertex
    u = FeFunction.zeros(mesh)
    corner = np.where((mesh.vertices == [1.0, 0.0]).all(axis=1))[0][0]
    u.values[corner] = 1.0
    gu = element_gradients(u, mesh)
    mags = (gu ** 2).sum(axis=1)
    assert (mags > 1.0).sum() == 1 and np.isclose(mags.min(), 0.0)
    v = solve_phasefield(u, MP, CrackSet.empty(mesh), mesh)
    ref = dense_phasefield_oracle(mesh, u.values, MP, [])
    assert np.allclose(v.values, ref, rtol=1e-9, atol=1e-11)


def test_oracle_agreement_with_crack_and_rough_field():
    mesh = adapt(build_initial_mesh((1.0, 1.0), None, 3), [0, 4, 8])
    rng = np.random.default_rng(9)
    u = FeFunction(2.0 * rng.standard_normal(mesh.n_vertices),
                   mesh.generation)
    crack = CrackSet(np.array([0, 1]), mesh.generation, 1e-2)
    v = solve_phasefield(u, MP, crack, mesh)
    ref = dense_phasefield_oracle(mesh, u.values, MP, [0, 1])
    assert np.allclose(v.values, ref, rtol=1e-8, atol=1e-10)
    assert v.values[0] == 0.0 and v.values[1] == 0.0


def test_balanced_gradient_yields_exactly_one():
    mesh = build_initial_mesh((1.0, 1.0), None, 3)
    slope = np.sqrt(MP.nu_pf / (MP.mu * (1.0 - MP.kappa)))
    u = FeFunction.from_callable(mesh, lambda x, y: slope * x)
    v = solve_phasefield(u, MP, CrackSet.empty(mesh), mesh)
    assert np.allclose(v.values, 1.0, atol=1e-9)


def test_solver_failure_propagates():
    mesh = build_initial_mesh((1.0, 1.0), None, 4)
    u = FeFunction.from_callable(mesh, lambda x, y: 3.0 * x * (1 - x) * y)
    with pytest.raises(RuntimeError, match="phase-field"):
        solve_phasefield(u, MP, CrackSet.empty(mesh), mesh, max_iter=1)


def test_stationarity_residual_small():
    mesh = build_initial_mesh((1.0, 1.0), None, 4)
    u = FeFunction.from_callable(mesh, lambda x, y: 3.0 * x * (1 - x) * y)
    v, rep = solve_phasefield(u, MP, CrackSet.empty(mesh), mesh,
                              return_report=True)
    assert not rep["shortcut"]
    assert rep["stationarity"] <= 1e-12


def test_shortcut_matches_solve_plus_clamp():
    # moderate reaction, still below the source weight: solving and clamping
    # must agree with the shortcut output
    mesh = build_initial_mesh((1.0, 1.0), None, 3)
    target = 0.4 * MP.nu_pf / (MP.mu * (1.0 - MP.kappa))
    u = FeFunction.from_callable(mesh, lambda x, y: np.sqrt(target) * x)
    A, b, reaction = phasefield_system(u, MP, mesh)
    assert reaction.max() <= 0.5 * MP.nu_pf
    import scipy.sparse.linalg as sla
    raw = sla.spsolve(A.tocsc(), b)
    clamped = np.clip(raw, None, 1.0)
    assert np.allclose(clamped, 1.0)
    v = solve_phasefield(u, MP, CrackSet.empty(mesh), mesh)
    assert np.allclose(v.values, 1.0)


def test_energy_decrease_within_sweep():
    # the solved v minimizes the quadratic energy over the constrained set
    mesh = build_initial_mesh((1.0, 1.0), None, 3)
    u = FeFunction.from_callable(mesh, lambda x, y: 4.0 * x * y)
    A, b, _ = phasefield_system(u, MP, mesh)

    def quad_energy(w):
        return 0.5 * (w @ (A @ w)) - b @ w

    v = solve_phasefield(u, MP, CrackSet.empty(mesh), mesh)
    rng = np.random.default_rng(10)
    for _ in range(5):
        other = v.values + 0.1 * rng.standard_normal(mesh.n_vertices)
        assert quad_energy(v.values) <= quad_energy(other) + 1e-12


# ----------------------------------------------------------------------
# clamp_and_threshold
# ----------------------------------------------------------------------

def test_clamp_rule_values():
    mesh = build_initial_mesh((1.0, 1.0), None, 1)
    v = FeFunction(np.array([-0.1, 0.005, 0.5, 1.2]), mesh.generation)
    out = clamp_and_threshold(v, 0.01)
    assert np.array_equal(out.values, [0.0, 0.0, 0.5, 1.0])


def test_clamp_identity_inside_band():
    mesh = build_initial_mesh((1.0, 1.0), None, 2)
    rng = np.random.default_rng(11)
    vals = rng.uniform(0.01, 1.0, mesh.n_vertices)
    out = clamp_and_threshold(FeFunction(vals, mesh.generation), 0.01)
    assert np.array_equal(out.values, vals)


def test_clamp_output_in_unit_interval():
    mesh = build_initial_mesh((1.0, 1.0), None, 2)
    rng = np.random.default_rng(12)
    vals = rng.uniform(-2, 3, mesh.n_vertices)
    out = clamp_and_threshold(FeFunction(vals, mesh.generation), 0.01)
    assert out.values.min() >= 0.0 and out.values.max() <= 1.0


# ----------------------------------------------------------------------
# crack set
# ----------------------------------------------------------------------

def test_crack_unchanged_for_intact_field():
    mesh = build_initial_mesh((1.0, 1.0), None, 2)
    old = CrackSet(np.array([3]), mesh.generation, 1e-2)
    new = update_crack_set(FeFunction.constant(mesh, 1.0), mesh, 1e-2, old)
    assert np.array_equal(new.ids, old.ids)


def test_crack_edge_rule_both_endpoints():
    mesh = build_initial_mesh((1.0, 1.0), None, 1)
    a, b = mesh.edges[0]
    v = FeFunction.constant(mesh, 1.0)
    v.values[a] = 0.0
    v.values[b] = 0.009
    new = update_crack_set(v, mesh, 0.01, CrackSet.empty(mesh))
    assert set(new.ids) == {a, b}


def test_crack_single_low_endpoint_not_pinned():
    mesh = build_initial_mesh((1.0, 1.0), None, 1)
    a, b = mesh.edges[0]
    v = FeFunction.constant(mesh, 1.0)
    v.values[a] = 0.0
    v.values[b] = 0.5
    new = update_crack_set(v, mesh, 0.01, CrackSet.empty(mesh))
    assert new.ids.size == 0


def test_crack_monotone_growth_and_transfer():
    mesh = build_initial_mesh((1.0, 1.0), None, 2)
    v = FeFunction.constant(mesh, 1.0)
    a, b = mesh.edges[0]
    v.values[[a, b]] = 0.0
    c1 = update_crack_set(v, mesh, 0.01, CrackSet.empty(mesh))
    v2 = FeFunction.constant(mesh, 1.0)     # field healed, set must not shrink
    c2 = update_crack_set(v2, mesh, 0.01, c1)
    assert set(c1.ids) <= set(c2.ids)
    fine = adapt(mesh, range(mesh.n_triangles))
    cf = c2.transfer(mesh, fine)
    # surviving dofs keep their pinned status
    keep = fine.vertex_prov[:, 1] < 0
    old_of_new = fine.vertex_prov[keep, 0]
    pinned_old = np.isin(old_of_new, c2.ids)
    new_ids = np.where(keep)[0][pinned_old]
    assert set(new_ids) <= set(cf.ids)
    # a midpoint is pinned only if both its parents were
    mids = np.where(~keep)[0]
    for m in mids:
        pa, pb = fine.vertex_prov[m]
        assert ((m in cf.ids)
                == ((pa in cf.ids) and (pb in cf.ids)))
