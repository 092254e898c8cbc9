"""Communication graph, incidence matrix and the edge-space consensus matrix.

Vertices are 1-based in every public signature; arrays are 0-based
internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray


class GraphError(ValueError):
    """Raised when a graph violates the formation-graph invariants."""


class EigensolveError(RuntimeError):
    """Raised when the symmetric eigensolver does not converge."""


@dataclass(frozen=True)
class FormationGraph:
    """Undirected graph with ordered edges ``(tail, head)``.

    The order of ``edges`` fixes the column order of the incidence matrix
    and therefore the meaning of every edge-indexed quantity downstream.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...] = ()
    _degrees: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = int(self.vertex_count)
        if n < 1:
            raise GraphError(f"vertex_count must be positive, got {self.vertex_count}")
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        seen: set[frozenset[int]] = set()
        for k, (tail, head) in enumerate(edges, start=1):
            for v in (tail, head):
                if not 1 <= v <= n:
                    raise GraphError(f"edge {k} ({tail},{head}): vertex {v} outside [1, {n}]")
            if tail == head:
                raise GraphError(f"edge {k} ({tail},{head}) is a self-loop")
            key = frozenset((tail, head))
            if key in seen:
                raise GraphError(f"edge {k} ({tail},{head}) duplicates an earlier edge")
            seen.add(key)
        degrees = [0] * n
        for tail, head in edges:
            degrees[tail - 1] += 1
            degrees[head - 1] += 1
        object.__setattr__(self, "vertex_count", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_degrees", tuple(degrees))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, vertex: int) -> int:
        """Number of neighbors of ``vertex`` (edges taken as undirected)."""
        return self._degrees[vertex - 1]

    @property
    def max_degree(self) -> int:
        return max(self._degrees) if self._degrees else 0

    def neighbors(self, vertex: int) -> list[int]:
        out = []
        for tail, head in self.edges:
            if tail == vertex:
                out.append(head)
            elif head == vertex:
                out.append(tail)
        return out

    def incident_edges(self, vertex: int) -> list[int]:
        """0-based indices of the edges touching ``vertex``, in edge order."""
        return [k for k, (t, h) in enumerate(self.edges) if vertex in (t, h)]

    @classmethod
    def from_incidence(cls, matrix: NDArray) -> "FormationGraph":
        b = np.asarray(matrix)
        edges = []
        for k in range(b.shape[1]):
            col = b[:, k]
            if sorted(col.tolist()).count(0) != b.shape[0] - 2 or col.sum() != 0:
                raise GraphError(f"column {k + 1} is not a valid incidence column")
            edges.append((int(np.argmax(col)) + 1, int(np.argmin(col)) + 1))
        return cls(b.shape[0], tuple(edges))


def incidence_matrix(graph: FormationGraph) -> NDArray[np.int64]:
    """Return ``B`` with +1 at each edge's tail row and -1 at its head row."""
    b = np.zeros((graph.vertex_count, graph.edge_count), dtype=np.int64)
    for k, (tail, head) in enumerate(graph.edges):
        b[tail - 1, k] = 1
        b[head - 1, k] = -1
    return b


def _components(graph: FormationGraph) -> tuple[int, bool]:
    """Union-find pass; returns (number of components, cycle found)."""
    parent = list(range(graph.vertex_count))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    cycle = False
    components = graph.vertex_count
    for tail, head in graph.edges:
        a, b = find(tail - 1), find(head - 1)
        if a == b:
            cycle = True
        else:
            parent[a] = b
            components -= 1
    return components, cycle


def is_acyclic(graph: FormationGraph) -> bool:
    return not _components(graph)[1]


def is_connected(graph: FormationGraph) -> bool:
    return _components(graph)[0] == 1


def consensus_matrix(graph: FormationGraph) -> NDArray[np.int64]:
    """Edge-space matrix ``-B^T B`` in exact integer arithmetic."""
    b = incidence_matrix(graph)
    return -(b.T @ b)


@dataclass(frozen=True)
class HurwitzReport:
    max_real_eigenvalue: float
    is_hurwitz: bool
    eigenvalues: tuple[float, ...]


def verify_hurwitz(a: NDArray, tolerance: float = 1e-9) -> HurwitzReport:
    """Check that the symmetric matrix ``a`` has every eigenvalue below ``-tolerance``."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not symmetric")
    if m.size == 0:
        return HurwitzReport(float("-inf"), True, ())
    try:
        eig = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolveError(f"symmetric eigensolve failed: {exc}") from exc
    top = float(eig[-1])
    return HurwitzReport(top, top < -tolerance, tuple(float(v) for v in eig))
