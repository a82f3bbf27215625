"""Conforming P1 triangulations of the unit square with a two-part boundary.

The boundary of every mesh is partitioned into a heat-exchange part
(``gamma1``, where Robin or Dirichlet data act) and a flux part (``gamma2``).
``gamma1`` must be nonempty.  Nodes are ordered lexicographically by (y, x)
so that assembly and projected sweeps iterate in a reproducible order.
Meshes are immutable after construction and safe to share between solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidParameterError, MeshError

SIDES = ("bottom", "right", "top", "left")

_AREA_TOL = 1e-14


@dataclass(frozen=True)
class Mesh:
    """A conforming triangulation with tagged boundary edges.

    Attributes
    ----------
    nodes : ndarray, shape (N, 2)
        Node coordinates.
    triangles : ndarray, shape (T, 3)
        Node indices per triangle, counterclockwise.
    gamma1_edges : ndarray, shape (E1, 2)
        Boundary edges (sorted node pairs) on the heat-exchange boundary.
    gamma2_edges : ndarray, shape (E2, 2)
        Boundary edges on the flux boundary.
    h : float
        Mesh size, equal to the longest triangle side.
    division_count : int or None
        Subdivisions per side for structured unit-square meshes; None for
        meshes of unknown provenance.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    gamma1_edges: np.ndarray
    gamma2_edges: np.ndarray
    h: float
    division_count: int | None = None

    def __post_init__(self):
        for arr in (self.nodes, self.triangles, self.gamma1_edges, self.gamma2_edges):
            arr.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def gamma1_nodes(self) -> np.ndarray:
        """Sorted indices of all nodes lying on gamma1 edges."""
        return np.unique(self.gamma1_edges)


@dataclass(frozen=True)
class ScalarField:
    """Nodal coefficients of a piecewise-linear function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.node_count,):
            raise InvalidParameterError(
                f"field has {vals.shape} values for {self.mesh.node_count} nodes"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise EvaluationError(f"non-finite value at node {bad}")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)


def _normalize_sides(gamma1_spec) -> tuple[str, ...]:
    if isinstance(gamma1_spec, str):
        names = [s.strip() for s in gamma1_spec.split(",") if s.strip()]
    else:
        names = list(gamma1_spec)
    for name in names:
        if name not in SIDES:
            raise InvalidParameterError(f"unknown boundary side {name!r}")
    if not names:
        raise InvalidParameterError("gamma1 must cover at least one side")
    return tuple(s for s in SIDES if s in names)


def _side_edges(n: int) -> dict[str, np.ndarray]:
    m = n + 1
    bottom = np.column_stack([np.arange(n), np.arange(1, m)])
    top = bottom + n * m
    left = np.column_stack([np.arange(n) * m, np.arange(1, m) * m])
    right = left + n
    return {"bottom": bottom, "right": right, "top": top, "left": left}


def build_unit_square(n: int, gamma1_spec="bottom") -> Mesh:
    """Triangulate (0,1)^2 with n subdivisions per side.

    Each of the n^2 cells is split along its lower-left to upper-right
    diagonal, giving 2 n^2 triangles, (n+1)^2 nodes, and h = sqrt(2)/n.

    Parameters
    ----------
    n : int
        Subdivisions per side, at least 1.
    gamma1_spec : str or iterable of str
        Sides assigned to gamma1, e.g. ``"bottom"`` or ``"bottom,left"``.
        The remaining sides form gamma2.
    """
    if n < 1:
        raise InvalidParameterError(f"need n >= 1 subdivisions, got {n}")
    sides = _normalize_sides(gamma1_spec)

    m = n + 1
    ticks = np.arange(m) / n
    xg, yg = np.meshgrid(ticks, ticks, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (iy * m + ix).ravel()
    v10 = v00 + 1
    v01 = v00 + m
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    per_side = _side_edges(n)
    g1 = [per_side[s] for s in sides]
    g2 = [per_side[s] for s in SIDES if s not in sides]
    gamma1 = np.vstack(g1)
    gamma2 = np.vstack(g2) if g2 else np.empty((0, 2), dtype=np.int64)

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        gamma1_edges=np.sort(gamma1, axis=1).astype(np.int64),
        gamma2_edges=np.sort(gamma2, axis=1).astype(np.int64),
        h=_longest_edge(nodes, triangles),
        division_count=n,
    )


def _longest_edge(nodes, triangles) -> float:
    p = nodes[triangles]
    d01 = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    d12 = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    d20 = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    return float(max(d01.max(), d12.max(), d20.max()))


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into 4 congruent children via edge midpoints.

    Halves h and passes boundary tags down to child edges.  Node order of
    the refined mesh is again lexicographic by (y, x).
    """
    tri = mesh.triangles
    pairs = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    pairs = np.sort(pairs, axis=1)
    edges, edge_of = np.unique(pairs, axis=0, return_inverse=True)
    n_old = mesh.node_count

    midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.vstack([mesh.nodes, midpoints])

    t = mesh.triangle_count
    m01 = n_old + edge_of[0:t]
    m12 = n_old + edge_of[t : 2 * t]
    m20 = n_old + edge_of[2 * t : 3 * t]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    children = np.empty((4 * t, 3), dtype=np.int64)
    children[0::4] = np.column_stack([a, m01, m20])
    children[1::4] = np.column_stack([m01, b, m12])
    children[2::4] = np.column_stack([m20, m12, c])
    children[3::4] = np.column_stack([m01, m12, m20])

    edge_lookup = {(int(e[0]), int(e[1])): n_old + k for k, e in enumerate(edges)}

    def split_tagged(tagged):
        out = []
        for a_, b_ in tagged:
            mid = edge_lookup[_edge_key(int(a_), int(b_))]
            out.append((min(a_, mid), max(a_, mid)))
            out.append((min(mid, b_), max(mid, b_)))
        return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)

    gamma1 = split_tagged(mesh.gamma1_edges)
    gamma2 = split_tagged(mesh.gamma2_edges)

    # restore lexicographic (y, x) node order
    order = np.lexsort((nodes[:, 0], nodes[:, 1]))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    nodes = nodes[order]
    children = rank[children]
    gamma1 = np.sort(rank[gamma1], axis=1)
    gamma2 = np.sort(rank[gamma2], axis=1)
    gamma1 = gamma1[np.lexsort((gamma1[:, 1], gamma1[:, 0]))]
    if gamma2.size:
        gamma2 = gamma2[np.lexsort((gamma2[:, 1], gamma2[:, 0]))]

    return Mesh(
        nodes=nodes,
        triangles=children,
        gamma1_edges=gamma1,
        gamma2_edges=gamma2,
        h=_longest_edge(nodes, children),
        division_count=None if mesh.division_count is None else 2 * mesh.division_count,
    )


def interpolate(mesh: Mesh, f: Callable[[float, float], float]) -> ScalarField:
    """Nodal interpolation: the P1 function matching f at every node.

    Reproduces affine functions (and any member of the P1 space) exactly.
    """
    values = np.empty(mesh.node_count)
    for i, (x, y) in enumerate(mesh.nodes):
        v = f(float(x), float(y))
        if not np.isfinite(v):
            raise EvaluationError(f"f({x}, {y}) = {v!r} at node {i} is not finite")
        values[i] = v
    return ScalarField(mesh, values)


def constant_field(mesh: Mesh, value: float) -> ScalarField:
    return ScalarField(mesh, np.full(mesh.node_count, float(value)))


def prolongate(field: ScalarField, fine: Mesh) -> ScalarField:
    """Transfer a field from a structured mesh to a nested finer one.

    Exact P1 prolongation: coarse nodes inject, new nodes take the value of
    the coarse piecewise-linear function.  Requires both meshes to be
    structured unit-square meshes with fine n a multiple of coarse n.
    """
    coarse = field.mesh
    nc, nf = coarse.division_count, fine.division_count
    if nc is None or nf is None:
        raise InvalidParameterError("prolongation requires structured meshes")
    if nf % nc != 0 or nf < nc:
        raise InvalidParameterError(
            f"fine divisions {nf} must be a multiple of coarse divisions {nc}"
        )
    u = field.values
    sx = fine.nodes[:, 0] * nc
    sy = fine.nodes[:, 1] * nc
    ix = np.minimum(np.floor(sx).astype(np.int64), nc - 1)
    iy = np.minimum(np.floor(sy).astype(np.int64), nc - 1)
    s = sx - ix
    t = sy - iy
    m = nc + 1
    u00 = u[iy * m + ix]
    u10 = u[iy * m + ix + 1]
    u01 = u[(iy + 1) * m + ix]
    u11 = u[(iy + 1) * m + ix + 1]
    lower = u00 * (1.0 - s) + u10 * (s - t) + u11 * t
    upper = u00 * (1.0 - t) + u11 * s + u01 * (t - s)
    return ScalarField(fine, np.where(s >= t, lower, upper))


def signed_areas(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def validate_mesh(mesh: Mesh) -> None:
    """Audit conformity and tagging invariants; raise MeshError on failure."""
    areas = signed_areas(mesh)
    if np.any(areas <= _AREA_TOL):
        bad = int(np.argmax(areas <= _AREA_TOL))
        raise MeshError(f"triangle {bad} has non-positive area {areas[bad]:.3e}")

    tri = mesh.triangles
    pairs = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    pairs = np.sort(pairs, axis=1)
    edges, counts = np.unique(pairs, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("an edge is shared by more than two triangles")
    boundary = {tuple(e) for e in edges[counts == 1]}

    g1 = {tuple(e) for e in np.asarray(mesh.gamma1_edges)}
    g2 = {tuple(e) for e in np.asarray(mesh.gamma2_edges)}
    if not g1:
        raise MeshError("gamma1 is empty")
    if g1 & g2:
        raise MeshError("gamma1 and gamma2 overlap")
    if (g1 | g2) != boundary:
        raise MeshError("tagged edges do not partition the boundary")

    if mesh.h != _longest_edge(mesh.nodes, mesh.triangles):
        raise MeshError("h does not equal the longest triangle side")


def write_mesh(mesh: Mesh, path) -> None:
    """Dump a mesh in the plain-text exchange format.

    One header line ``nodes <N> triangles <T>``, node coordinate lines,
    triangle index lines, then the ``gamma1`` and ``gamma2`` edge lists.
    """
    lines = [f"nodes {mesh.node_count} triangles {mesh.triangle_count}"]
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g}")
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    lines.append("gamma1")
    for a, b in mesh.gamma1_edges:
        lines.append(f"{a} {b}")
    lines.append("gamma2")
    for a, b in mesh.gamma2_edges:
        lines.append(f"{a} {b}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
