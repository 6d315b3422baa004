"""Weighted simple (di)graphs and the matrices built from them.

Node indices are 0-based inside :class:`WeightedGraph`; the text format and
every user-facing report use 1-based indices.

An edge ``(i, j, w)`` sets ``adjacency[i, j] = w``, so in the consensus
dynamics ``dx_i/dt = sum_j w_ij (x_j - x_i)`` node ``i`` is driven by node
``j``.  Strong connectivity is taken along these arcs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GraphFormatError",
    "WeightedGraph",
    "parse_graph",
    "format_graph",
    "adjacency_matrix",
    "degree_matrix",
    "laplacian",
    "strongly_connected_components",
    "is_strongly_connected",
    "is_irreducible_bruteforce",
    "generate_graph",
    "reverse_graph",
    "disjoint_union",
    "BRUTEFORCE_MAX_N",
]

BRUTEFORCE_MAX_N = 8
RANDOM_MAX_REJECTIONS = 1000


class GraphFormatError(ValueError):
    """Raised for malformed graph text or invalid edge data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class WeightedGraph:
    """A simple weighted graph with ``n`` nodes.

    ``edges`` holds ``(i, j, w)`` triples with 0-based node indices.  For an
    undirected graph both orientations are stored with equal weight.
    """

    n: int
    directed: bool
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise GraphFormatError(f"node count must be an integer >= 1, got {self.n!r}")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        seen = {}
        for i, j, w in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphFormatError(
                    f"edge ({i + 1}, {j + 1}) has a node index outside [1, {self.n}]")
            if i == j:
                raise GraphFormatError(f"self-loop on node {i + 1}")
            if not math.isfinite(w) or w <= 0.0:
                raise GraphFormatError(f"edge ({i + 1}, {j + 1}) has non-positive weight {w!r}")
            if (i, j) in seen:
                raise GraphFormatError(f"duplicate edge ({i + 1}, {j + 1})")
            seen[(i, j)] = w
        if not self.directed:
            for (i, j), w in seen.items():
                if seen.get((j, i)) != w:
                    raise GraphFormatError(
                        f"undirected graph is missing the reverse of edge ({i + 1}, {j + 1})")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence], directed: bool = True,
                   one_based: bool = False) -> "WeightedGraph":
        """Build a graph, symmetrizing the edge list when ``directed`` is false.

        ``edges`` items are ``(i, j)`` or ``(i, j, w)``; a missing weight is 1.
        """
        offset = 1 if one_based else 0
        triples = []
        for e in edges:
            i, j = int(e[0]) - offset, int(e[1]) - offset
            w = float(e[2]) if len(e) > 2 else 1.0
            triples.append((i, j, w))
        if not directed:
            triples = _symmetrize(triples)
        return cls(n, directed, tuple(triples))

    @property
    def edge_count(self) -> int:
        """Number of stored arcs (an undirected edge counts once)."""
        return len(self.edges) if self.directed else len(self.edges) // 2


def _symmetrize(triples, line_numbers=None):
    out = []
    index = {}
    for k, (i, j, w) in enumerate(triples):
        line = line_numbers[k] if line_numbers else None
        key = (min(i, j), max(i, j))
        if key in index:
            raise GraphFormatError(f"duplicate edge ({i + 1}, {j + 1})", line)
        index[key] = w
        out.append((i, j, w))
        out.append((j, i, w))
    return out


def parse_graph(text: str) -> WeightedGraph:
    """Parse the graph text format.

    The first non-comment line is ``n m directed|undirected``; it is followed
    by ``m`` lines ``i j w`` with 1-based node indices.  Lines starting with
    ``#`` and blank lines are ignored.  Undirected edges are listed once and
    symmetrized here.
    """
    header = None
    triples = []
    lines = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 3 or parts[2] not in ("directed", "undirected"):
                raise GraphFormatError("header must be 'n m directed|undirected'", lineno)
            try:
                n, m = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError("node and edge counts must be integers", lineno) from None
            if n < 1 or m < 0:
                raise GraphFormatError("node count must be >= 1 and edge count >= 0", lineno)
            header = (n, m, parts[2] == "directed")
            continue
        if len(parts) != 3:
            raise GraphFormatError("edge line must be 'i j w'", lineno)
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphFormatError("edge line must be 'i j w' with integer indices", lineno) from None
        n = header[0]
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphFormatError(f"node index out of range [1, {n}]", lineno)
        if i == j:
            raise GraphFormatError(f"self-loop on node {i}", lineno)
        if not math.isfinite(w) or w <= 0.0:
            raise GraphFormatError(f"non-positive weight {parts[2]}", lineno)
        if (i, j) in seen:
            raise GraphFormatError(f"duplicate edge ({i}, {j})", lineno)
        seen.add((i, j))
        triples.append((i - 1, j - 1, w))
        lines.append(lineno)
    if header is None:
        raise GraphFormatError("missing header line")
    n, m, directed = header
    if len(triples) != m:
        raise GraphFormatError(f"header declares {m} edges but {len(triples)} were given")
    if not directed:
        triples = _symmetrize(triples, lines)
    return WeightedGraph(n, directed, tuple(triples))


def format_graph(g: WeightedGraph) -> str:
    """Serialize ``g`` in the text format read by :func:`parse_graph`."""
    if g.directed:
        edges = g.edges
    else:
        edges = [(i, j, w) for i, j, w in g.edges if i < j]
    lines = [f"{g.n} {len(edges)} {'directed' if g.directed else 'undirected'}"]
    lines.extend(f"{i + 1} {j + 1} {w!r}" for i, j, w in edges)
    return "\n".join(lines) + "\n"


def adjacency_matrix(g: WeightedGraph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    for i, j, w in g.edges:
        a[i, j] = w
    return a


def degree_matrix(g: WeightedGraph) -> np.ndarray:
    return np.diag(adjacency_matrix(g).sum(axis=1))


def laplacian(g: WeightedGraph) -> np.ndarray:
    """Return ``L = D - A`` with ``D`` the diagonal of adjacency row sums."""
    a = adjacency_matrix(g)
    lap = -a
    # Diagonal set from the same row sums so that L @ 1 vanishes to rounding.
    lap[np.diag_indices(g.n)] = a.sum(axis=1)
    return lap


def _successors(n: int, arcs: Iterable[tuple[int, int]]) -> list[list[int]]:
    succ = [[] for _ in range(n)]
    for i, j in arcs:
        succ[i].append(j)
    return succ


def strongly_connected_components(n: int, arcs: Iterable[tuple[int, int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative so that deep graphs do not hit the recursion limit.

    Components are returned in reverse topological order.
    """
    succ = _successors(n, arcs)
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    components = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if index[w] == -1:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
    return components


def is_strongly_connected(g: WeightedGraph) -> bool:
    """True iff every node reaches every other node along the arcs of ``g``."""
    comps = strongly_connected_components(g.n, ((i, j) for i, j, _ in g.edges))
    return len(comps) == 1


def _permutations_array(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)


def is_irreducible_bruteforce(m) -> bool:
    """Decide irreducibility by enumerating every permutation.

    ``m`` is reducible when some permutation ``p`` puts ``m[p][:, p]`` in
    block upper triangular form, i.e. a trailing ``(n-k) x k`` block of the
    sparsity pattern is identically zero.  Only the pattern ``|m| > 0``
    matters; the diagonal is irrelevant.  This is exponential in ``n`` and
    exists as an oracle for :func:`is_strongly_connected`.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("irreducibility is defined for square matrices")
    n = m.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise ValueError(f"brute-force enumeration is limited to n <= {BRUTEFORCE_MAX_N}, got {n}")
    if n == 1:
        return True
    pattern = np.abs(m) > 0
    perms = _permutations_array(n)
    permuted = pattern[perms[:, :, None], perms[:, None, :]]
    for k in range(1, n):
        lower_left = permuted[:, k:, :k]
        if np.any(~lower_left.any(axis=(1, 2))):
            return False
    return True


def reverse_graph(g: WeightedGraph) -> WeightedGraph:
    """Reverse every arc; undirected graphs are returned unchanged."""
    if not g.directed:
        return g
    return WeightedGraph(g.n, True, tuple((j, i, w) for i, j, w in g.edges))


def disjoint_union(*graphs: WeightedGraph) -> WeightedGraph:
    """Place graphs side by side, relabelling nodes consecutively."""
    offset = 0
    edges = []
    for g in graphs:
        edges.extend((i + offset, j + offset, w) for i, j, w in g.edges)
        offset += g.n
    directed = any(g.directed for g in graphs)
    return WeightedGraph(offset, directed, tuple(edges))


def _weights(rng, count, weight_range):
    lo, hi = weight_range
    if lo == hi:
        return [float(lo)] * count
    return [float(w) for w in rng.uniform(lo, hi, size=count)]


def generate_graph(kind: str, n: int | None = None, seed: int | None = 0,
                   weight_range: tuple[float, float] = (1.0, 1.0), *,
                   rows: int | None = None, cols: int | None = None,
                   directed: bool = False, edge_prob: float | None = None,
                   diffusivity: float = 1.0, spacing: float = 1.0) -> WeightedGraph:
    """Generate a graph of the given ``kind``.

    Parameters
    ----------
    kind : {'path', 'cycle', 'complete', 'grid', 'diffusion1d', 'random'}
    n : int
        Node count.  For ``grid`` it may be omitted when ``rows`` and
        ``cols`` are given; if given it must equal ``rows * cols``.
    seed : int
        Seed for weight draws and for the ``random`` edge draws.
    weight_range : (lo, hi)
        Weights are uniform in ``[lo, hi]``; ``lo == hi`` gives constant weights.
    directed : bool
        Only meaningful for ``cycle`` (a one-way ring ``i -> i+1``).
    edge_prob : float, optional
        Arc probability for ``random``; defaults to ``min(1, 1.5 ln(n) / (n-1))``.
    diffusivity, spacing : float
        ``diffusion1d`` builds a path whose Laplacian is the Neumann
        second-difference matrix times ``diffusivity / spacing**2``.

    Notes
    -----
    ``random`` draws independent arcs with probability ``edge_prob`` and
    rejects draws that are not strongly connected, failing after 1000
    rejections.
    """
    lo, hi = (float(v) for v in weight_range)
    if not (lo > 0 and hi >= lo and math.isfinite(hi)):
        raise ValueError(f"weight range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
    if kind == "grid":
        if rows is None or cols is None:
            raise ValueError("grid requires rows and cols")
        if rows < 1 or cols < 1:
            raise ValueError("grid sides must be >= 1")
        if n is not None and n != rows * cols:
            raise ValueError(f"n={n} does not equal rows*cols={rows * cols}")
        n = rows * cols
    if n is None or int(n) != n or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)

    if kind == "path":
        pairs = [(i, i + 1) for i in range(n - 1)]
    elif kind == "cycle":
        if n < 3:
            raise ValueError("cycle requires n >= 3")
        pairs = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "complete":
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif kind == "grid":
        pairs = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    pairs.append((v, v + 1))
                if r + 1 < rows:
                    pairs.append((v, v + cols))
    elif kind == "diffusion1d":
        if diffusivity <= 0 or spacing <= 0:
            raise ValueError("diffusivity and spacing must be positive")
        w = diffusivity / spacing ** 2
        return WeightedGraph.from_edges(n, [(i, i + 1, w) for i in range(n - 1)], directed=False)
    elif kind == "random":
        return _random_strongly_connected(n, rng, (lo, hi), edge_prob)
    else:
        raise ValueError(f"unknown graph kind {kind!r}")

    is_directed = directed and kind == "cycle"
    ws = _weights(rng, len(pairs), (lo, hi))
    return WeightedGraph.from_edges(n, [(i, j, w) for (i, j), w in zip(pairs, ws)],
                                    directed=is_directed)


def _random_strongly_connected(n, rng, weight_range, edge_prob):
    if n == 1:
        return WeightedGraph(1, True, ())
    p = edge_prob if edge_prob is not None else min(1.0, 1.5 * math.log(n) / (n - 1))
    if not 0 < p <= 1:
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    offdiag = [(i, j) for i in range(n) for j in range(n) if i != j]
    for _ in range(RANDOM_MAX_REJECTIONS + 1):
        keep = rng.random(len(offdiag)) < p
        arcs = [e for e, k in zip(offdiag, keep) if k]
        if len(strongly_connected_components(n, arcs)) == 1:
            ws = _weights(rng, len(arcs), weight_range)
            return WeightedGraph(n, True, tuple((i, j, w) for (i, j), w in zip(arcs, ws)))
    raise RuntimeError(
        f"no strongly connected draw after {RANDOM_MAX_REJECTIONS} rejections (n={n}, p={p})")
