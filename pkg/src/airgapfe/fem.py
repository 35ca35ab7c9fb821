"""Linear-triangle FE assembly for the magnetic vector potential.

Per subdomain: curl-curl stiffness weighted by reluctivity, consistent mass
weighted by conductivity, nodal loads from the applied current density, and
symmetric Dirichlet elimination. Selection between subdomain vectors and
interface-ring vectors lives here as restrict/prolongate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InternalError
from .mesh import InterfaceRing, Mesh


@dataclass(frozen=True)
class Material:
    """Region material data: reluctivity nu (m/H), conductivity sigma (S/m),
    applied current density jz (A/m^2)."""

    nu: float
    sigma: float = 0.0
    jz: float = 0.0

    def __post_init__(self):
        if self.nu <= 0.0:
            raise ConfigurationError(f"reluctivity must be positive, got {self.nu}")
        if self.sigma < 0.0:
            raise ConfigurationError(f"conductivity must be >= 0, got {self.sigma}")


class MaterialTable:
    """Region tag -> Material lookup with a hard error on missing tags."""

    def __init__(self, table: dict[int, Material]):
        self._table = dict(table)

    def for_tag(self, tag: int) -> Material:
        try:
            return self._table[int(tag)]
        except KeyError:
            raise ConfigurationError(f"no material for region tag {tag}") from None

    def arrays_for(self, mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-triangle (nu, sigma, jz) arrays."""
        nu = np.empty(mesh.num_triangles)
        sigma = np.empty(mesh.num_triangles)
        jz = np.empty(mesh.num_triangles)
        for t, tag in enumerate(mesh.region_tags):
            m = self.for_tag(tag)
            nu[t], sigma[t], jz[t] = m.nu, m.sigma, m.jz
        return nu, sigma, jz


def _element_geometry(mesh: Mesh):
    """Edge coefficient vectors b, c and areas of all triangles.

    For linear hats on triangle (p0, p1, p2):
    grad N_i = (b_i, c_i) / (2 A).
    """
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = mesh.triangle_areas()
    return b, c, area


def _assemble(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Scatter (M, 3, 3) local matrices into CSR with deterministic ordering."""
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(mesh.num_nodes, mesh.num_nodes))
    out = mat.tocsr()
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


def assemble_stiffness(mesh: Mesh, materials: MaterialTable) -> sp.csr_matrix:
    """K_ij = sum over triangles of nu * int grad N_i . grad N_j dA."""
    nu, _, _ = materials.arrays_for(mesh)
    b, c, area = _element_geometry(mesh)
    scale = nu / (4.0 * area)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :])
    local *= scale[:, None, None]
    return _assemble(mesh, local)


def assemble_mass(mesh: Mesh, materials: MaterialTable) -> sp.csr_matrix:
    """Consistent mass M_ij = sum of sigma * int N_i N_j dA."""
    _, sigma, _ = materials.arrays_for(mesh)
    _, _, area = _element_geometry(mesh)
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = (sigma * area)[:, None, None] * base[None, :, :]
    return _assemble(mesh, local)


def assemble_load(mesh: Mesh, materials: MaterialTable) -> np.ndarray:
    """f_i = sum of jz * area / 3 over triangles incident to node i."""
    _, _, jz = materials.arrays_for(mesh)
    _, _, area = _element_geometry(mesh)
    f = np.zeros(mesh.num_nodes)
    contrib = (jz * area / 3.0)
    np.add.at(f, mesh.triangles.ravel(), np.repeat(contrib, 3))
    return f


def apply_dirichlet(matrix: sp.csr_matrix, rhs: np.ndarray,
                    constraints: dict[int, float]):
    """Symmetric elimination of Dirichlet constraints.

    Constrained values are moved to the right-hand side; constrained rows
    and columns are replaced by identity so the solve reproduces the
    prescribed values exactly and the matrix stays symmetric.
    """
    seen: dict[int, float] = {}
    for node, value in constraints.items():
        node = int(node)
        if node in seen and seen[node] != value:
            raise ConfigurationError(
                f"conflicting Dirichlet values at node {node}")
        seen[node] = float(value)
    if not seen:
        return matrix.copy(), rhs.copy()
    n = matrix.shape[0]
    idx = np.fromiter(seen.keys(), dtype=np.int64)
    vals = np.fromiter(seen.values(), dtype=float)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ConfigurationError("Dirichlet node out of range")
    ud = np.zeros(n)
    ud[idx] = vals
    rhs_out = rhs - matrix @ ud
    rhs_out[idx] = vals
    mask = np.ones(n)
    mask[idx] = 0.0
    d_mask = sp.diags(mask)
    out = d_mask @ matrix @ d_mask + sp.diags(1.0 - mask)
    out = out.tocsr()
    out.sum_duplicates()
    return out, rhs_out


def restrict(u: np.ndarray, ring: InterfaceRing) -> np.ndarray:
    """Pick the ring entries of a subdomain vector in ring order (Q u)."""
    if u.ndim != 1:
        raise InternalError("restrict expects a flat vector")
    return u[ring.node_indices]


def prolongate(g_ring: np.ndarray, ring: InterfaceRing, dim: int) -> np.ndarray:
    """Scatter a ring vector into a zero subdomain vector (Q^T g)."""
    if len(g_ring) != ring.n:
        raise InternalError("ring vector length mismatch")
    if ring.node_indices.max() >= dim:
        raise InternalError("ring index exceeds subdomain dimension")
    out = np.zeros(dim, dtype=np.asarray(g_ring).dtype)
    out[ring.node_indices] = g_ring
    return out


@dataclass
class FeSubdomain:
    """One assembled FE subdomain with its interface ring.

    Dirichlet constraints are stored raw; elimination happens when the
    coupled system is built. Constraints on ring nodes are rejected:
    interface nodes belong to the air-gap coupling.
    """

    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    f: np.ndarray
    ring: InterfaceRing
    dirichlet: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        ring_nodes = set(int(i) for i in self.ring.node_indices)
        for node in self.dirichlet:
            if int(node) in ring_nodes:
                raise ConfigurationError(
                    f"Dirichlet constraint on interface-ring node {node} "
                    "is not supported")

    @property
    def dim(self) -> int:
        return self.mesh.num_nodes


def build_subdomain(mesh: Mesh, materials: MaterialTable, ring: InterfaceRing,
                    dirichlet: dict[int, float] | None = None) -> FeSubdomain:
    return FeSubdomain(
        mesh=mesh,
        K=assemble_stiffness(mesh, materials),
        M=assemble_mass(mesh, materials),
        f=assemble_load(mesh, materials),
        ring=ring,
        dirichlet=dict(dirichlet or {}),
    )


def dirichlet_from_set(mesh: Mesh, set_name: str, value) -> dict[int, float]:
    """Constraints for a whole node set; value may be a callable of (x, y)."""
    if set_name not in mesh.node_sets:
        raise ConfigurationError(f"mesh has no node set named {set_name!r}")
    out = {}
    for i in mesh.node_sets[set_name]:
        if callable(value):
            out[int(i)] = float(value(mesh.nodes[i, 0], mesh.nodes[i, 1]))
        else:
            out[int(i)] = float(value)
    return out
