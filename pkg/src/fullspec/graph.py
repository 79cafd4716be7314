"""Graphs, Laplacians, labeled-graph metrics, synthetic generators and I/O.

Graphs are small, simple and undirected. Vertices are ``0..n-1``; an edge is
stored once as ``(u, v)`` with ``u < v``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, ParseError

COMBINATORIAL = "combinatorial"
NORMALIZED = "normalized"

_KIND_ALIASES = {
    "combinatorial": COMBINATORIAL,
    "comb": COMBINATORIAL,
    "unnormalized": COMBINATORIAL,
    "normalized": NORMALIZED,
    "norm": NORMALIZED,
    "symmetric-normalized": NORMALIZED,
    "sym": NORMALIZED,
}


def laplacian_kind(kind: str) -> str:
    """Resolve a Laplacian variant name (``comb``/``norm`` and long forms)."""
    try:
        return _KIND_ALIASES[kind.lower()]
    except (KeyError, AttributeError):
        raise DomainError(f"unknown Laplacian kind {kind!r}") from None


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with optional integer node labels."""

    n: int
    edges: tuple = ()
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("vertex count must be non-negative")
        canon = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"edge ({u}, {v}) has an endpoint outside [0, {self.n})")
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        if self.labels is not None:
            labels = tuple(int(x) for x in self.labels)
            if len(labels) != self.n:
                raise DomainError(f"expected {self.n} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self, sparse: bool = False):
        rows = [u for u, v in self.edges] + [v for u, v in self.edges]
        cols = [v for u, v in self.edges] + [u for u, v in self.edges]
        A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        return A if sparse else A.toarray()

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self) -> list:
        nbrs = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return [sorted(x) for x in nbrs]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in set(self.edges)

    def n_components(self) -> int:
        if self.n == 0:
            return 0
        count, _ = connected_components(self.adjacency(sparse=True), directed=False)
        return int(count)

    def is_connected(self) -> bool:
        return self.n_components() == 1

    def with_labels(self, labels: Optional[Sequence[int]]) -> "Graph":
        return Graph(self.n, self.edges, None if labels is None else tuple(labels))

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Copy with vertex ``v`` renamed to ``perm[v]``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.n)):
            raise DomainError("relabel needs a permutation of range(n)")
        edges = [(perm[u], perm[v]) for u, v in self.edges]
        labels = None
        if self.labels is not None:
            lab = [0] * self.n
            for v, p in enumerate(perm):
                lab[p] = self.labels[v]
            labels = tuple(lab)
        return Graph(self.n, tuple(edges), labels)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "edges": [[u, v] for u, v in self.edges],
            "labels": None if self.labels is None else list(self.labels),
        }

    @classmethod
    def from_json(cls, data) -> "Graph":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            return cls(int(data["n"]), tuple(tuple(e) for e in data["edges"]), data.get("labels"))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"invalid graph JSON: {exc}") from exc


@dataclass(frozen=True)
class Partition:
    """Assignment of nodes to classes ``0..k-1``."""

    class_of: tuple
    sizes: tuple = field(init=False)

    def __post_init__(self):
        class_of = tuple(int(c) for c in self.class_of)
        if not class_of:
            raise DomainError("partition of an empty vertex set")
        k = max(class_of) + 1
        sizes = tuple(int(s) for s in np.bincount(class_of, minlength=k))
        if min(class_of) < 0 or 0 in sizes:
            raise DomainError("class ids must be 0..k-1 with every class non-empty")
        object.__setattr__(self, "class_of", class_of)
        object.__setattr__(self, "sizes", sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return len(self.class_of)

    def members(self, a: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.class_of) == a)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "Partition":
        """Contiguous blocks: the first ``sizes[0]`` nodes form class 0, and so on."""
        if any(int(s) <= 0 for s in sizes):
            raise DomainError("class sizes must be positive")
        return cls(tuple(np.repeat(np.arange(len(sizes)), sizes)))

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """Classes numbered by sorted distinct label value."""
        order = {lab: i for i, lab in enumerate(sorted(set(labels)))}
        return cls(tuple(order[lab] for lab in labels))


# --------------------------------------------------------------------------
# I/O


def load_edge_list(text: str, return_remap: bool = False):
    """Parse an edge-list document.

    Each non-comment line is ``u v`` or ``u v label``; the optional third
    column is the class label of ``u``. ``#`` starts a comment. If the ids
    that occur are not contiguous from 0 they are compacted in increasing
    order; pass ``return_remap=True`` to get the ``{old: new}`` mapping.
    """
    pairs = []
    node_labels = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'u v' or 'u v label', got {raw.strip()!r}", lineno)
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-integer field in {raw.strip()!r}", lineno) from None
        u, v = vals[0], vals[1]
        if u < 0 or v < 0:
            raise DomainError(f"line {lineno}: negative vertex id")
        if u == v:
            raise DomainError(f"line {lineno}: self-loop at vertex {u}")
        pairs.append((u, v))
        if len(vals) == 3:
            if node_labels.get(u, vals[2]) != vals[2]:
                raise ParseError(f"conflicting labels for vertex {u}", lineno)
            node_labels[u] = vals[2]

    ids = sorted({x for e in pairs for x in e} | set(node_labels))
    if ids and ids[-1] + 1 == len(ids):
        remap = {i: i for i in ids}
    else:
        remap = {old: new for new, old in enumerate(ids)}
    n = len(ids)
    labels = None
    if node_labels:
        missing = [old for old in ids if old not in node_labels]
        if missing:
            raise ParseError(f"labels given for some vertices but not for {missing[:5]}")
        labels = tuple(node_labels[old] for old in ids)
    g = Graph(n, tuple((remap[u], remap[v]) for u, v in pairs), labels)
    return (g, remap) if return_remap else g


def dump_edge_list(g: Graph) -> str:
    """Write ``g`` as an edge list; every non-isolated vertex keeps its label."""
    if g.labels is None:
        return "".join(f"{u} {v}\n" for u, v in g.edges)
    lines = []
    labelled = set()
    for u, v in g.edges:
        lines.append(f"{u} {v} {g.labels[u]}")
        labelled.add(u)
    # the label column belongs to the first endpoint, so repeat edges reversed
    for u, v in g.edges:
        if v not in labelled:
            lines.append(f"{v} {u} {g.labels[v]}")
            labelled.add(v)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Laplacians and metrics


def laplacian(g: Graph, kind: str = COMBINATORIAL, sparse: bool = False):
    """``D - A`` or ``I - D^{-1/2} A D^{-1/2}``.

    Isolated nodes get a zero row/column in ``D^{-1/2}``, so their diagonal
    entry of the normalized Laplacian is 1.
    """
    kind = laplacian_kind(kind)
    A = g.adjacency(sparse=True)
    deg = np.asarray(A.sum(axis=1)).ravel()
    if kind == COMBINATORIAL:
        L = sp.diags(deg) - A
    else:
        inv_sqrt = np.zeros_like(deg)
        nz = deg > 0
        inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
        Dm = sp.diags(inv_sqrt)
        L = sp.identity(g.n) - Dm @ A @ Dm
    L = sp.csr_matrix(L)
    if sparse:
        return L
    L = L.toarray()
    return 0.5 * (L + L.T)


def edge_homophily(g: Graph) -> float:
    """Fraction of edges whose endpoints carry different labels.

    Despite the name this counts *cross-label* edges, so 1 means fully
    heterophilic.
    """
    if g.labels is None:
        raise DomainError("edge homophily needs node labels")
    if g.m == 0:
        raise DomainError("edge homophily of a graph without edges")
    cross = sum(1 for u, v in g.edges if g.labels[u] != g.labels[v])
    return float(Fraction(cross, g.m))


def cartesian_product(g: Graph) -> Graph:
    """``G □ G`` with vertex ``(u, v)`` at index ``u * n + v``."""
    n = g.n
    edges = []
    for a, b in g.edges:
        for w in range(n):
            edges.append((w * n + a, w * n + b))  # first coordinate fixed
            edges.append((a * n + w, b * n + w))  # second coordinate fixed
    return Graph(n * n, tuple(edges))


# --------------------------------------------------------------------------
# Generators


def generate_class_graph(partition: Partition, target_h: float, avg_degree: float, seed: int):
    """Two-block-probability random graph with a prescribed expected edge homophily.

    Every intra-class pair is an edge with probability ``p_intra`` and every
    inter-class pair with probability ``p_inter``; both are solved so that the
    expected edge count is ``n * avg_degree / 2`` and the expected fraction of
    inter-class edges is ``target_h``.

    Returns ``(graph, realized_h)``; the graph carries the class ids as labels.
    ``realized_h`` is ``nan`` when no edge was sampled.
    """
    if not 0.0 <= target_h <= 1.0:
        raise DomainError("target_h must lie in [0, 1]")
    if avg_degree <= 0:
        raise DomainError("avg_degree must be positive")
    class_of = np.asarray(partition.class_of)
    n = partition.n
    sizes = np.asarray(partition.sizes, dtype=float)
    intra_pairs = float(np.sum(sizes * (sizes - 1) / 2))
    inter_pairs = n * (n - 1) / 2 - intra_pairs
    if partition.k == 1 and target_h != 0:
        raise DomainError("a single-class graph has no inter-class pairs; target_h must be 0")
    m_target = n * avg_degree / 2
    want_inter = target_h * m_target
    want_intra = (1 - target_h) * m_target
    if want_inter > inter_pairs or want_intra > intra_pairs:
        raise DomainError(
            f"infeasible: need {want_intra:.1f} intra / {want_inter:.1f} inter edges, "
            f"but only {intra_pairs:.0f} / {inter_pairs:.0f} pairs exist"
        )
    p_intra = want_intra / intra_pairs if intra_pairs else 0.0
    p_inter = want_inter / inter_pairs if inter_pairs else 0.0

    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, 1)
    same = class_of[iu] == class_of[iv]
    keep = rng.random(iu.size) < np.where(same, p_intra, p_inter)
    g = Graph(n, tuple(zip(iu[keep].tolist(), iv[keep].tolist())), tuple(class_of.tolist()))
    realized = edge_homophily(g) if g.m else float("nan")
    return g, realized


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise DomainError("a simple cycle needs at least 3 vertices")
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def frucht_graph() -> Graph:
    """The 12-vertex cubic graph with trivial automorphism group."""
    edges = [(i, (i + 1) % 7) for i in range(7)]
    edges += [(0, 7), (1, 7), (2, 8), (3, 9), (4, 9), (5, 10), (6, 10),
              (7, 11), (8, 9), (8, 11), (10, 11)]
    return Graph(12, tuple(edges))


def disjoint_union(*graphs: Graph) -> Graph:
    edges = []
    labels = []
    offset = 0
    for g in graphs:
        edges.extend((u + offset, v + offset) for u, v in g.edges)
        labels.extend(g.labels if g.labels is not None else [None] * g.n)
        offset += g.n
    lab = None if any(x is None for x in labels) else tuple(labels)
    return Graph(offset, tuple(edges), lab)


def random_graph(n: int, p: float, seed: int, connected: bool = False, max_tries: int = 1000) -> Graph:
    """Erdos-Renyi ``G(n, p)``; with ``connected=True`` redraw until connected."""
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, 1)
    for _ in range(max_tries):
        keep = rng.random(iu.size) < p
        g = Graph(n, tuple(zip(iu[keep].tolist(), iv[keep].tolist())))
        if not connected or n <= 1 or g.is_connected():
            return g
    raise DomainError(f"no connected G({n}, {p}) sample in {max_tries} draws")


def graph_from_edges(n: int, edges: Iterable, labels=None) -> Graph:
    return Graph(n, tuple(tuple(e) for e in edges), labels)
