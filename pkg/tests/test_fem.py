"""FE assembly, Dirichlet elimination and ring selection operators."""

import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from airgapfe.errors import ConfigurationError, InternalError
from airgapfe.fem import (FeSubdomain, Material, MaterialTable,
                          apply_dirichlet, assemble_load, assemble_mass,
                          assemble_stiffness, build_subdomain,
                          dirichlet_from_set, prolongate, restrict)
from airgapfe.mesh import InterfaceRing, Mesh, extract_ring, generate_annulus


def unit_triangle(tag=0):
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                np.array([[0, 1, 2]]), np.array([tag]))


def unit_square():
    """Two-triangle unit square, both CCW."""
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh(nodes, tris, np.zeros(2))


MAT1 = MaterialTable({0: Material(nu=1.0, sigma=1.0, jz=0.0)})


# -- stiffness ---------------------------------------------------------------

def test_stiffness_unit_triangle():
    K = assemble_stiffness(unit_triangle(), MAT1).toarray()
    expect = 0.5 * np.array([[2.0, -1.0, -1.0],
                             [-1.0, 1.0, 0.0],
                             [-1.0, 0.0, 1.0]])
    assert np.allclose(K, expect, atol=1e-14)


def test_stiffness_annihilates_constants():
    mesh = generate_annulus(1.0, 2.0, 16, 3)
    K = assemble_stiffness(mesh, MAT1)
    assert np.max(np.abs(K @ np.ones(mesh.num_nodes))) <= 1e-12


def test_stiffness_square_hand_assembly():
    K = assemble_stiffness(unit_square(), MAT1).toarray()
    # hand assembly of the two element matrices
    def elem(p):
        b = np.array([p[1, 1] - p[2, 1], p[2, 1] - p[0, 1], p[0, 1] - p[1, 1]])
        c = np.array([p[2, 0] - p[1, 0], p[0, 0] - p[2, 0], p[1, 0] - p[0, 0]])
        e1, e2 = p[1] - p[0], p[2] - p[0]
        a = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        return (np.outer(b, b) + np.outer(c, c)) / (4.0 * a)
    mesh = unit_square()
    expect = np.zeros((4, 4))
    for tri in mesh.triangles:
        ke = elem(mesh.nodes[tri])
        for i in range(3):
            for j in range(3):
                expect[tri[i], tri[j]] += ke[i, j]
    assert np.allclose(K, expect, atol=1e-14)


def test_stiffness_missing_material():
    with pytest.raises(ConfigurationError, match="region tag"):
        assemble_stiffness(unit_triangle(tag=9), MAT1)


def test_assembly_deterministic():
    mesh = generate_annulus(1.0, 2.0, 16, 2)
    k1 = assemble_stiffness(mesh, MAT1)
    k2 = assemble_stiffness(mesh, MAT1)
    assert np.array_equal(k1.data, k2.data)
    assert np.array_equal(k1.indices, k2.indices)


# -- mass --------------------------------------------------------------------

def test_mass_unit_triangle():
    M = assemble_mass(unit_triangle(), MAT1).toarray()
    expect = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0],
                       [1.0, 1.0, 2.0]]) / 24.0
    assert np.allclose(M, expect, atol=1e-15)


def test_mass_zero_conductivity():
    mats = MaterialTable({0: Material(nu=1.0, sigma=0.0)})
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    assert assemble_mass(mesh, mats).nnz == 0


def test_mass_total_equals_area():
    mesh = generate_annulus(1.0, 2.0, 32, 4)
    M = assemble_mass(mesh, MAT1)
    assert M.sum() == pytest.approx(mesh.triangle_areas().sum(), rel=1e-10)


# -- load --------------------------------------------------------------------

def test_load_thirds_rule():
    mats = MaterialTable({0: Material(nu=1.0, jz=3.0)})
    f = assemble_load(unit_triangle(), mats)
    assert np.allclose(f, [0.5, 0.5, 0.5], atol=1e-15)


def test_load_zero_current():
    mats = MaterialTable({0: Material(nu=1.0)})
    assert np.all(assemble_load(generate_annulus(1, 2, 8, 1), mats) == 0.0)


def test_load_total_current():
    mats = MaterialTable({0: Material(nu=1.0, jz=2.5)})
    mesh = generate_annulus(1.0, 2.0, 16, 2)
    f = assemble_load(mesh, mats)
    assert f.sum() == pytest.approx(2.5 * mesh.triangle_areas().sum(),
                                    rel=1e-12)


# -- Dirichlet ---------------------------------------------------------------

def test_dirichlet_all_nodes():
    mesh = unit_square()
    K = assemble_stiffness(mesh, MAT1)
    A, b = apply_dirichlet(K, np.zeros(4), {i: 2.5 for i in range(4)})
    u = spla.spsolve(A.tocsc(), b)
    assert np.allclose(u, 2.5, atol=1e-14)


def test_dirichlet_empty_is_identity_op():
    mesh = unit_square()
    K = assemble_stiffness(mesh, MAT1)
    rhs = np.arange(4.0)
    A, b = apply_dirichlet(K, rhs, {})
    assert np.allclose(A.toarray(), K.toarray())
    assert np.array_equal(b, rhs)


def test_dirichlet_conflicting_values():
    K = assemble_stiffness(unit_square(), MAT1)
    with pytest.raises(ConfigurationError, match="conflicting"):
        # two keys naming the same node with different values
        apply_dirichlet(K, np.zeros(4), {0: 1.0, "0": 2.0})


def test_dirichlet_strip_linear_interpolation():
    """Square with u=0 on the left edge and u=1 on the right edge: the FE
    solution of Laplace is the exact linear profile u = x."""
    mesh = unit_square()
    K = assemble_stiffness(mesh, MAT1)
    cons = {0: 0.0, 3: 0.0, 1: 1.0, 2: 1.0}
    A, b = apply_dirichlet(K, np.zeros(4), cons)
    u = spla.spsolve(A.tocsc(), b)
    assert np.allclose(u, mesh.nodes[:, 0], atol=1e-13)


def test_patch_test_linear_field():
    """Exact linear field a x + b y with matching Dirichlet data on the whole
    boundary is reproduced to 1e-12 (Galerkin exactness for linears)."""
    mesh = generate_annulus(1.0, 2.0, 16, 3)
    exact = 0.7 * mesh.nodes[:, 0] - 1.3 * mesh.nodes[:, 1]
    K = assemble_stiffness(mesh, MAT1)
    cons = {int(i): float(exact[i])
            for i in np.concatenate([mesh.node_sets["inner"],
                                     mesh.node_sets["outer"]])}
    A, b = apply_dirichlet(K, np.zeros(mesh.num_nodes), cons)
    u = spla.spsolve(A.tocsc(), b)
    assert np.max(np.abs(u - exact)) <= 1e-12


def test_spd_after_constraints():
    mesh = generate_annulus(1.0, 2.0, 8, 2)
    K = assemble_stiffness(mesh, MAT1)
    cons = dirichlet_from_set(mesh, "inner", 0.0)
    A, _ = apply_dirichlet(K, np.zeros(mesh.num_nodes), cons)
    eigs = np.linalg.eigvalsh(A.toarray())
    assert eigs.min() > 0.0


# -- restrict / prolongate ---------------------------------------------------

def test_restrict_prolongate_identity():
    mesh = generate_annulus(1.0, 2.0, 8, 2)
    ring = extract_ring(mesh, "outer", 2.0)
    g = np.arange(8.0)
    assert np.array_equal(restrict(prolongate(g, ring, mesh.num_nodes), ring),
                          g)


def test_restrict_one_hot():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    ring = extract_ring(mesh, "outer", 2.0)
    u = np.zeros(mesh.num_nodes)
    u[ring.node_indices[3]] = 1.0
    r = restrict(u, ring)
    assert r[3] == 1.0 and np.sum(np.abs(r)) == 1.0
    # one-hot at a non-ring node restricts to zero
    u2 = np.zeros(mesh.num_nodes)
    u2[mesh.node_sets["inner"][0]] = 1.0
    assert np.all(restrict(u2, ring) == 0.0)


def test_prolongate_length_check():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    ring = extract_ring(mesh, "outer", 2.0)
    with pytest.raises(InternalError):
        prolongate(np.ones(7), ring, mesh.num_nodes)


# -- subdomain ---------------------------------------------------------------

def test_ring_constraint_rejected():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    ring = extract_ring(mesh, "outer", 2.0)
    cons = {int(ring.node_indices[0]): 0.0}
    with pytest.raises(ConfigurationError, match="interface-ring"):
        build_subdomain(mesh, MAT1, ring, cons)


def test_dirichlet_from_set_callable():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    cons = dirichlet_from_set(mesh, "outer", lambda x, y: x + 2 * y)
    for node, val in cons.items():
        x, y = mesh.nodes[node]
        assert val == pytest.approx(x + 2 * y)


def test_material_validation():
    with pytest.raises(ConfigurationError):
        Material(nu=-1.0)
    with pytest.raises(ConfigurationError):
        Material(nu=1.0, sigma=-0.5)
