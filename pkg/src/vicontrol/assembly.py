"""Exact P1 assembly of the bilinear forms and load functionals.

Builds the stiffness matrix for the Dirichlet form, the domain mass matrix
for the L2 inner product, the boundary mass matrix supported on gamma1, and
the boundary load vectors on gamma1/gamma2.  All element integrals are
closed-form (no quadrature error for P1 data and edge-constant fluxes).
Mass matrices are consistent, not lumped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import AssemblyError, InvalidParameterError
from .mesh import Mesh, ScalarField, constant_field, interpolate

# control/flux specifications accepted by problem data
ControlSpec = Union[float, Callable[[float, float], float], ScalarField, None]
FluxSpec = Union[float, dict, Callable[[float, float], float]]

_MASS_TEMPLATE = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_TEMPLATE = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


@dataclass(frozen=True)
class ProblemData:
    """One problem instance: Robin coefficient, boundary data, cost weight.

    Parameters
    ----------
    alpha : float or None
        Heat transfer coefficient on gamma1 (> 0).  None is allowed for
        data used only with the Dirichlet-limit system.
    b : float
        Constant environment temperature on gamma1 (> 0).
    q : float, dict, or callable
        Heat flux on gamma2.  A float is a global constant, a dict maps
        side names to constants, a callable is evaluated at edge midpoints
        (treated as constant per edge).
    M_cost : float
        Weight of the control term in the quadratic cost (> 0).
    g : float, callable, ScalarField, or None
        Distributed control; materialized as a P1 nodal field per mesh.
    """

    alpha: float | None = None
    b: float = 1.0
    q: FluxSpec = 0.0
    M_cost: float = 1.0
    g: ControlSpec = 0.0

    def __post_init__(self):
        if self.alpha is not None and not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParameterError(f"alpha must be > 0, got {self.alpha}")
        if not (np.isfinite(self.b) and self.b > 0):
            raise InvalidParameterError(f"b must be > 0, got {self.b}")
        if not (np.isfinite(self.M_cost) and self.M_cost > 0):
            raise InvalidParameterError(f"M_cost must be > 0, got {self.M_cost}")


@dataclass(frozen=True)
class AssembledSystem:
    """Sparse matrices and load vectors of one mesh.

    K is the stiffness matrix of the Dirichlet form, M_H the domain mass
    matrix, M_R the boundary mass matrix supported on gamma1 nodes.
    q_load and b_load hold the gamma2 flux functional and the gamma1
    environment-temperature functional for the data passed to
    :func:`assemble` (unit data q = 1, b = 1 when none was given).
    """

    mesh: Mesh
    K: sp.csr_matrix
    M_H: sp.csr_matrix
    M_R: sp.csr_matrix
    q_load: np.ndarray
    b_load: np.ndarray
    alpha: float | None = None


def as_control_field(mesh: Mesh, g: ControlSpec) -> ScalarField:
    """Materialize a control specification as a nodal field on a mesh."""
    if g is None:
        return constant_field(mesh, 0.0)
    if isinstance(g, ScalarField):
        if g.mesh is not mesh:
            raise InvalidParameterError("control field lives on a different mesh")
        return g
    if callable(g):
        return interpolate(mesh, g)
    return constant_field(mesh, float(g))


def _symmetrized(coo: sp.coo_matrix) -> sp.csr_matrix:
    a = coo.tocsr()
    return ((a + a.T) * 0.5).tocsr()


def _element_geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    bvec = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    cvec = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (x[:, 0] * bvec[:, 0] + x[:, 1] * bvec[:, 1] + x[:, 2] * bvec[:, 2])
    if np.any(area <= 1e-14):
        bad = int(np.argmax(area <= 1e-14))
        raise AssemblyError(
            f"triangle {bad} with nodes {mesh.triangles[bad].tolist()} is degenerate "
            f"(area {area[bad]:.3e})"
        )
    return bvec, cvec, area


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    tri = mesh.triangles
    t = tri.shape[0]
    rows = np.broadcast_to(tri[:, :, None], (t, 3, 3)).ravel()
    cols = np.broadcast_to(tri[:, None, :], (t, 3, 3)).ravel()
    n = mesh.node_count
    return _symmetrized(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def _edge_lengths(mesh: Mesh, edges: np.ndarray) -> np.ndarray:
    if edges.shape[0] == 0:
        return np.empty(0)
    d = mesh.nodes[edges[:, 0]] - mesh.nodes[edges[:, 1]]
    return np.linalg.norm(d, axis=1)


def _gamma1_mass(mesh: Mesh) -> sp.csr_matrix:
    n = mesh.node_count
    edges = mesh.gamma1_edges
    if edges.shape[0] == 0:
        return sp.csr_matrix((n, n))
    ell = _edge_lengths(mesh, edges)
    local = ell[:, None, None] * _EDGE_TEMPLATE
    rows = np.broadcast_to(edges[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(edges[:, None, :], local.shape).ravel()
    return _symmetrized(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def _flux_value(q: FluxSpec, mid: np.ndarray) -> float:
    if callable(q):
        return float(q(float(mid[0]), float(mid[1])))
    if isinstance(q, dict):
        x, y = mid
        tol = 1e-12
        if abs(y) <= tol:
            side = "bottom"
        elif abs(x - 1.0) <= tol:
            side = "right"
        elif abs(y - 1.0) <= tol:
            side = "top"
        elif abs(x) <= tol:
            side = "left"
        else:
            raise InvalidParameterError(
                f"per-side flux given but edge midpoint {mid} is on no unit-square side"
            )
        return float(q.get(side, 0.0))
    return float(q)


def _gamma2_flux_load(mesh: Mesh, q: FluxSpec) -> np.ndarray:
    """(q, phi_i) over gamma2, exact for edge-constant q."""
    out = np.zeros(mesh.node_count)
    for a, b in mesh.gamma2_edges:
        pa, pb = mesh.nodes[a], mesh.nodes[b]
        ell = float(np.linalg.norm(pb - pa))
        qe = _flux_value(q, 0.5 * (pa + pb))
        out[a] += qe * ell / 2.0
        out[b] += qe * ell / 2.0
    return out


def _gamma1_unit_load(mesh: Mesh) -> np.ndarray:
    """(1, phi_i) over gamma1: each node gets half its adjacent edge length."""
    out = np.zeros(mesh.node_count)
    ell = _edge_lengths(mesh, mesh.gamma1_edges)
    for (a, b), le in zip(mesh.gamma1_edges, ell):
        out[a] += le / 2.0
        out[b] += le / 2.0
    return out


def assemble(mesh: Mesh, data: ProblemData | None = None) -> AssembledSystem:
    """Assemble all matrices and boundary loads of a mesh.

    Parameters
    ----------
    mesh : Mesh
    data : ProblemData, optional
        When given, q_load and b_load are assembled for data.q and data.b
        and alpha is recorded; otherwise unit data (q = 1, b = 1) is used
        and alpha is None.

    Returns
    -------
    AssembledSystem
        With exact P1 matrices: K positive semidefinite (kernel = constants),
        M_H positive definite, M_R positive semidefinite with support on
        gamma1 nodes.
    """
    bvec, cvec, area = _element_geometry(mesh)
    k_local = (
        np.einsum("ti,tj->tij", bvec, bvec) + np.einsum("ti,tj->tij", cvec, cvec)
    ) / (4.0 * area)[:, None, None]
    m_local = area[:, None, None] * _MASS_TEMPLATE

    q = 1.0 if data is None else data.q
    b = 1.0 if data is None else data.b
    return AssembledSystem(
        mesh=mesh,
        K=_scatter(mesh, k_local),
        M_H=_scatter(mesh, m_local),
        M_R=_gamma1_mass(mesh),
        q_load=_gamma2_flux_load(mesh, q),
        b_load=b * _gamma1_unit_load(mesh),
        alpha=None if data is None else data.alpha,
    )


def robin_matrix(sys: AssembledSystem, alpha: float) -> sp.csr_matrix:
    """K + alpha * M_R; positive definite for alpha > 0."""
    if not (np.isfinite(alpha) and alpha > 0):
        raise InvalidParameterError(f"alpha must be > 0, got {alpha}")
    return (sys.K + alpha * sys.M_R).tocsr()


def load_vector(sys: AssembledSystem, data: ProblemData) -> np.ndarray:
    """Load functional of the Robin-family state system.

    F_i = (g, phi_i)_H - (q, phi_i)_Q + alpha (b, phi_i)_R, assembled from
    the data directly (independent of the loads stored on the system).
    Exact for edge-constant q and P1 controls.
    """
    if data.alpha is None:
        raise InvalidParameterError("Robin load requires alpha > 0")
    g = as_control_field(sys.mesh, data.g)
    return (
        sys.M_H @ g.values
        - _gamma2_flux_load(sys.mesh, data.q)
        + data.alpha * data.b * _gamma1_unit_load(sys.mesh)
    )


def _values(v) -> np.ndarray:
    return v.values if isinstance(v, ScalarField) else np.asarray(v, dtype=float)


def norm_H(sys: AssembledSystem, v) -> float:
    x = _values(v)
    return float(np.sqrt(max(x @ (sys.M_H @ x), 0.0)))


def norm_V(sys: AssembledSystem, v) -> float:
    x = _values(v)
    return float(np.sqrt(max(x @ (sys.K @ x) + x @ (sys.M_H @ x), 0.0)))


def norm_R(sys: AssembledSystem, v) -> float:
    x = _values(v)
    return float(np.sqrt(max(x @ (sys.M_R @ x), 0.0)))


def norms(sys: AssembledSystem, v) -> dict[str, float]:
    """H-, V-, and R-norms of a nodal field."""
    x = _values(v)
    if x.shape != (sys.mesh.node_count,):
        raise InvalidParameterError(
            f"field has shape {x.shape}, expected ({sys.mesh.node_count},)"
        )
    return {"H": norm_H(sys, x), "V": norm_V(sys, x), "R": norm_R(sys, x)}


def coercivity_constant(sys: AssembledSystem, alpha: float) -> float:
    """Sharp discrete coercivity constant of the Robin form.

    Smallest eigenvalue of the pencil (K + alpha M_R, K + M_H): the largest
    lambda with  v'(K + alpha M_R)v >= lambda ||v||_V^2  for all v.  Dense
    computation; intended for small meshes and test tolerances only.
    """
    a = robin_matrix(sys, alpha).toarray()
    g = (sys.K + sys.M_H).toarray()
    w = scipy.linalg.eigh(a, g, eigvals_only=True, subset_by_index=[0, 0])
    return float(w[0])


def dump_matrix(matrix, path) -> None:
    """Write a sparse matrix as coordinate triplets ``i j value``."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")
