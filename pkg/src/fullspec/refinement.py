"""Colour refinement: 1-WL on nodes and Local 2-GNN on ordered node pairs.

The perfect hash of each round is realized as canonical relabelling: every
distinct signature gets the next integer id in order of first appearance
(row-major over nodes or pairs). Several graphs can be refined jointly with a
shared palette, which is what graph comparison needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .graph import Graph

WL1 = "wl1"
LOCAL2 = "local2"
QUANT_DECIMALS = 12


@dataclass(frozen=True)
class NodeColoring:
    colors: tuple
    round: int
    stable: bool = True

    def histogram(self) -> dict:
        return _histogram(self.colors)

    def to_json(self) -> dict:
        return {"round": self.round, "colors": list(self.colors), "histogram": self.histogram()}


@dataclass(frozen=True)
class PairColoring:
    """Colours of ordered pairs; entry ``u * n + v`` is the colour of ``(u, v)``."""

    colors: tuple
    n: int
    round: int
    stable: bool = True

    def matrix(self) -> np.ndarray:
        return np.asarray(self.colors).reshape(self.n, self.n)

    def histogram(self) -> dict:
        return _histogram(self.colors)

    def to_json(self) -> dict:
        return {"round": self.round, "colors": list(self.colors), "histogram": self.histogram()}


def _histogram(colors) -> dict:
    vals, counts = np.unique(np.asarray(colors), return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def canonical_ids(rows) -> np.ndarray:
    """Map equal rows to equal ids ``0, 1, ...`` numbered by first appearance."""
    rows = np.asarray(rows)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, first, inv = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=int)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inv.ravel()]


def quantize_labels(labels, n: int) -> np.ndarray:
    """Initial labels as an ``n x c`` array; floats rounded to 12 decimals."""
    if labels is None:
        return np.zeros((n, 1))
    arr = np.asarray(labels)
    if arr.shape[0] != n:
        raise DomainError(f"expected {n} initial labels, got {arr.shape[0]}")
    if arr.dtype.kind == "f":
        arr = np.round(arr, QUANT_DECIMALS) + 0.0  # +0.0 folds -0.0 into 0.0
    elif arr.dtype.kind not in "iub":
        raise DomainError("initial labels must be numeric")
    return arr.reshape(n, -1).astype(float)


def atp(g: Graph, u: int, v: int) -> tuple:
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise DomainError(f"pair ({u}, {v}) outside [0, {g.n})")
    return (int(u == v), int(u != v and g.has_edge(u, v)))


def partition_refines(fine, coarse) -> bool:
    """True iff equal ``fine`` ids imply equal ``coarse`` ids."""
    fine = np.asarray(fine).ravel()
    coarse = np.asarray(coarse).ravel()
    seen = {}
    for f, c in zip(fine.tolist(), coarse.tolist()):
        if seen.setdefault(f, c) != c:
            return False
    return True


def same_partition(a, b) -> bool:
    return partition_refines(a, b) and partition_refines(b, a)


# --------------------------------------------------------------------------
# signatures


def _node_init(g: Graph, init) -> np.ndarray:
    if init is None and g.labels is not None:
        init = g.labels
    return quantize_labels(init, g.n)


def _pair_init(g: Graph, init) -> np.ndarray:
    lab = _node_init(g, init)
    n = g.n
    A = g.adjacency()
    u, v = np.divmod(np.arange(n * n), n)
    return np.hstack([lab[u], lab[v], (u == v)[:, None], A[u, v][:, None]])


def _wl1_signature(A: np.ndarray, colors: np.ndarray, palette: int) -> np.ndarray:
    onehot = np.eye(palette)[colors]
    return np.hstack([colors[:, None], A @ onehot])


def _local2_signature(A: np.ndarray, colors: np.ndarray, palette: int) -> np.ndarray:
    n = A.shape[0]
    onehot = np.eye(palette)[colors].reshape(n, n, palette)
    # M_{u<-v}: colours (w, v) over w in N(u); M_{v<-u}: colours (u, w) over w in N(v)
    from_u = np.einsum("uw,wvc->uvc", A, onehot).reshape(n * n, palette)
    from_v = np.einsum("vw,uwc->uvc", A, onehot).reshape(n * n, palette)
    return np.hstack([colors[:, None], from_u, from_v])


def joint_refine(graphs: Sequence[Graph], mode: str, inits=None, max_rounds: Optional[int] = None):
    """Refine several graphs with one shared palette.

    Returns ``(colorings, history)`` where ``history[t]`` is the list of
    per-graph colour arrays after round ``t`` (round 0 is the initial
    colouring). Iteration stops once a round adds no colour, or after
    ``max_rounds`` rounds.
    """
    if mode not in (WL1, LOCAL2):
        raise DomainError(f"unknown refinement mode {mode!r}")
    if max_rounds is not None and max_rounds < 0:
        raise DomainError("max_rounds must be non-negative")
    if inits is None:
        inits = [None] * len(graphs)
    init_fn = _node_init if mode == WL1 else _pair_init
    step = _wl1_signature if mode == WL1 else _local2_signature
    adj = [g.adjacency() for g in graphs]
    sizes = [g.n if mode == WL1 else g.n * g.n for g in graphs]
    splits = np.cumsum(sizes)[:-1]

    init_rows = [init_fn(g, x) for g, x in zip(graphs, inits)]
    width = max(r.shape[1] for r in init_rows)
    init_rows = [np.pad(r, ((0, 0), (0, width - r.shape[1])), constant_values=np.inf)
                 for r in init_rows]
    colors = canonical_ids(np.vstack(init_rows))
    history = [np.split(colors, splits)]
    count = int(colors.max()) + 1 if colors.size else 0
    limit = max_rounds if max_rounds is not None else max(max(sizes, default=0), 1)
    rnd = 0
    stable = False
    while rnd < limit:
        palette = count
        parts = np.split(colors, splits)
        sigs = [step(A, c, palette) for A, c in zip(adj, parts)]
        new = canonical_ids(np.vstack(sigs))
        new_count = int(new.max()) + 1 if new.size else 0
        if new_count == count:
            stable = True
            break
        colors, count = new, new_count
        rnd += 1
        history.append(np.split(colors, splits))
    if not stable and max_rounds is None:
        stable = True
    out = []
    for g, c in zip(graphs, np.split(colors, splits)):
        if mode == WL1:
            out.append(NodeColoring(tuple(int(x) for x in c), rnd, stable))
        else:
            out.append(PairColoring(tuple(int(x) for x in c), g.n, rnd, stable))
    return out, history


def wl1_refine(g: Graph, init=None, max_rounds: Optional[int] = None):
    """1-WL colouring and per-round history (list of colour arrays).

    ``init`` defaults to the graph's labels, or a uniform colour. The returned
    colouring's ``round`` is the first round whose partition is stable;
    ``stable`` is False when ``max_rounds`` cut the iteration short.
    """
    cols, hist = joint_refine([g], WL1, [init], max_rounds)
    return cols[0], [h[0] for h in hist]


def local2_refine(g: Graph, init=None, max_rounds: Optional[int] = None):
    """Local 2-GNN colouring of ordered pairs and per-round history."""
    cols, hist = joint_refine([g], LOCAL2, [init], max_rounds)
    return cols[0], [h[0] for h in hist]


def distinguishable(g1: Graph, g2: Graph, mode: str = WL1, init1=None, init2=None) -> bool:
    """True iff the stable colour histograms of the two graphs differ."""
    if g1.n != g2.n:
        return True
    (c1, c2), _ = joint_refine([g1, g2], mode, [init1, init2])
    return c1.histogram() != c2.histogram()
