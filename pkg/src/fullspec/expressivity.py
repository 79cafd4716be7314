"""Harnesses for what polynomial pair filters can and cannot separate.

* :func:`universal_interpolate` builds a bivariate polynomial reproducing any
  target pair signal when the spectrum is simple and the input has every
  eigengraph component.
* :func:`check_order2_bound` tries to falsify "pairs with equal Local 2-GNN
  colour get equal filtered values" with random polynomials.
* :func:`construct_separating_poly` builds a filter whose output separates the
  stable Local 2-GNN classes.
* :func:`check_wl1_bound` is the node-level analogue against 1-WL.

Pair signals built from an ``n^2``-row matrix use row index ``u * n + v`` for
the pair ``(u, v)``, the same order as :class:`PairColoring`.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import DomainError, PreconditionError
from .filters import BivariatePoly, UnivariatePoly, apply_bivariate_poly
from .graph import NORMALIZED, Graph, laplacian
from .linalg import Spectrum, colliding_pair, eigendecompose, pair_gft
from .refinement import local2_refine, partition_refines, wl1_refine

REL_TOL = 1e-8
ABS_TOL = 1e-12
W_ATTEMPTS = 64
INTERVAL_WIDTH = 0.5


def node_label_matrix(g: Graph, labels=None) -> np.ndarray:
    """One-hot node labels (classes ordered by value), or a constant column."""
    if labels is None:
        labels = g.labels
    if labels is None:
        return np.ones((g.n, 1))
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(float)
    vals = np.unique(labels)
    return (labels[:, None] == vals[None, :]).astype(float)


def pair_label_matrix(g: Graph, labels=None) -> np.ndarray:
    """Rows ``(l(u), l(v), [u == v], [u ~ v])`` for pairs in row-major order."""
    X = node_label_matrix(g, labels)
    n = g.n
    A = g.adjacency()
    u, v = np.divmod(np.arange(n * n), n)
    return np.hstack([X[u], X[v], (u == v)[:, None].astype(float), A[u, v][:, None]])


def pair_matrix(column, n: int) -> np.ndarray:
    """``n^2`` pair values (row-major) as an ``n x n`` matrix."""
    return np.asarray(column, dtype=float).reshape(n, n)


def _report(theorem: str, graph_id, K, trials, violations, max_spread, **extra) -> dict:
    out = {"theorem": theorem, "graph_id": graph_id, "K": K, "trials": trials,
           "violations": violations, "max_spread": float(max_spread)}
    out.update(extra)
    return out


def _class_spreads(values: np.ndarray, colors: np.ndarray):
    """Per colour class, the largest deviation of a row from the class's first row."""
    out = {}
    for c in np.unique(colors):
        rows = values[colors == c]
        out[int(c)] = float(np.max(np.abs(rows - rows[0]))) if rows.shape[0] > 1 else 0.0
    return out


# --------------------------------------------------------------------------
# interpolation


def universal_interpolate(s: Spectrum, e, target, coeff_tol: Optional[float] = None,
                          gap_tol: Optional[float] = None, refine_steps: int = 1) -> BivariatePoly:
    """Bivariate polynomial with ``q(lam_i, lam_j) = That_ij / c_ij``.

    Here ``c = U^T e U`` and ``That = U^T target U``, so
    ``apply_full_spectrum_eigen(s, tabulate(q, s), e)`` reproduces ``target``.
    The grid interpolant is the tensor Lagrange polynomial on the eigenvalues;
    it is stored in monomials of the variable mapped from
    ``[lam_min, lam_max]`` onto ``[-1, 1]`` and solved with
    ``refine_steps`` rounds of iterative refinement.

    Raises ``PreconditionError`` on a repeated eigenvalue or a coefficient
    ``|c_ij| <= coeff_tol`` (default ``1e-8 * max|c|``).
    """
    n = s.n
    pair = colliding_pair(s, gap_tol)
    if pair is not None:
        i, j = pair
        raise PreconditionError(
            f"repeated eigenvalues: lambda_{i} = {s.eigenvalues[i]:.12g} and "
            f"lambda_{j} = {s.eigenvalues[j]:.12g} collide")
    c = pair_gft(s, e)
    that = pair_gft(s, target)
    if coeff_tol is None:
        coeff_tol = 1e-8 * max(1.0, float(np.max(np.abs(c))))
    small = np.argwhere(np.abs(c) <= coeff_tol)
    if small.size:
        i, j = (int(x) for x in small[0])
        raise PreconditionError(
            f"vanishing spectral coefficient at ({i}, {j}): |u_{i}^T e u_{j}| = "
            f"{abs(c[i, j]):.3g} <= {coeff_tol:.3g}; the input lacks that eigengraph component")
    Q = that / c
    if n == 1:
        return BivariatePoly(Q.copy())
    lam = s.eigenvalues
    q0 = BivariatePoly(np.zeros((n, n)), domain=(lam[0], lam[-1]))
    x = q0.map_variable(lam)
    V = np.vander(x, n, increasing=True)

    def solve(R):
        return np.linalg.solve(V, np.linalg.solve(V, R).T).T

    A = solve(Q)
    for _ in range(refine_steps):
        A = A + solve(Q - V @ A @ V.T)
    return BivariatePoly(A, domain=q0.domain)


# --------------------------------------------------------------------------
# upper bounds


def check_order2_bound(g: Graph, K: int, trials: int, seed: int, kind: str = NORMALIZED,
                       rounds: Optional[int] = None, channels: int = 2, labels=None,
                       graph_id=None) -> dict:
    """Falsification run: equal round-``rounds`` pair colour => equal filtered rows.

    Each trial draws ``p`` with i.i.d. uniform ``[-1, 1]`` coefficients on
    ``i + j <= K`` and a Gaussian ``W`` (``channels`` columns), filters every
    column of ``pair_label_matrix @ W`` with ``p``, and compares rows inside
    each Local 2-GNN colour class. ``rounds`` defaults to ``K``. Violations
    are collected, never raised.
    """
    if K < 0 or trials < 1:
        raise DomainError("need K >= 0 and trials >= 1")
    rounds = K if rounds is None else rounds
    rng = np.random.default_rng(seed)
    n = g.n
    L = laplacian(g, kind, sparse=True)
    lab = pair_label_matrix(g, labels)
    init = None if labels is None else labels
    coloring, _ = local2_refine(g, init=init, max_rounds=rounds)
    colors = np.asarray(coloring.colors)
    violations = []
    max_spread = 0.0
    for trial in range(trials):
        p = BivariatePoly.random(K, rng)
        W = rng.standard_normal((lab.shape[1], channels))
        proj = lab @ W
        out = np.column_stack([apply_bivariate_poly(L, p, pair_matrix(proj[:, c], n)).ravel()
                               for c in range(channels)])
        scale = max(1.0, float(np.max(np.abs(out))))
        tol = REL_TOL * scale + ABS_TOL
        for color, spread in _class_spreads(out, colors).items():
            max_spread = max(max_spread, spread / scale)
            if spread > tol:
                violations.append({"trial": trial, "color": color, "spread": spread})
    return _report("thm2", graph_id, K, trials, violations, max_spread,
                   rounds=rounds, laplacian=kind)


def check_wl1_bound(g: Graph, K: int, trials: int, seed: int, kind: str = NORMALIZED,
                    rounds: Optional[int] = None, channels: int = 2, labels=None,
                    graph_id=None) -> dict:
    """Falsification run: equal 1-WL colour after ``K + 1`` rounds => equal rows of
    ``Z = sum_t alpha_t L^t X W`` for a random degree-``K`` polynomial."""
    if K < 0 or trials < 1:
        raise DomainError("need K >= 0 and trials >= 1")
    rounds = K + 1 if rounds is None else rounds
    rng = np.random.default_rng(seed)
    L = laplacian(g, kind, sparse=True)
    X = node_label_matrix(g, labels)
    coloring, _ = wl1_refine(g, init=labels, max_rounds=rounds)
    colors = np.asarray(coloring.colors)
    violations = []
    max_spread = 0.0
    for trial in range(trials):
        p = UnivariatePoly.monomial(rng.uniform(-1.0, 1.0, K + 1))
        W = rng.standard_normal((X.shape[1], channels))
        Z = p.apply(L, X @ W)
        scale = max(1.0, float(np.max(np.abs(Z))))
        tol = REL_TOL * scale + ABS_TOL
        for color, spread in _class_spreads(Z, colors).items():
            max_spread = max(max_spread, spread / scale)
            if spread > tol:
                violations.append({"trial": trial, "color": color, "spread": spread})
    return _report("wlspec", graph_id, K, trials, violations, max_spread,
                   rounds=rounds, laplacian=kind)


# --------------------------------------------------------------------------
# lower bound


def value_classes(values, tol: float = 1e-6) -> np.ndarray:
    """Cluster scalars: sorted neighbours closer than ``tol`` share an id."""
    values = np.asarray(values, dtype=float).ravel()
    order = np.argsort(values, kind="stable")
    ids = np.empty(values.size, dtype=int)
    cur = 0
    for rank, idx in enumerate(order):
        if rank and values[idx] - values[order[rank - 1]] > tol:
            cur += 1
        ids[idx] = cur
    return ids


def class_targets(colors) -> np.ndarray:
    """Class ``t`` gets distinct values spread evenly over ``[t, t + 0.5]``."""
    colors = np.asarray(colors)
    out = np.empty(colors.size)
    for t in np.unique(colors):
        idx = np.flatnonzero(colors == t)
        steps = np.arange(idx.size) / max(1, idx.size - 1)
        out[idx] = t + INTERVAL_WIDTH * steps
    return out


def construct_separating_poly(g: Graph, s: Optional[Spectrum] = None, labels=None, seed: int = 0,
                              kind: str = NORMALIZED, coeff_tol: Optional[float] = None,
                              max_attempts: int = W_ATTEMPTS, graph_id=None):
    """Filter ``q`` and projection ``W`` whose output separates stable pair colours.

    ``W`` is redrawn until every eigengraph coefficient of
    ``e = Matrix(pair_label_matrix @ W)`` is non-zero (at most ``max_attempts``
    draws). Targets come from :func:`class_targets`, so distinct colour
    classes land in disjoint intervals. The returned ``q`` is oriented for
    :func:`apply_bivariate_poly`; the report checks its output independently.

    Returns ``(q, W, report)``.
    """
    if s is None:
        s = eigendecompose(laplacian(g, kind), kind=kind)
    n = g.n
    L = laplacian(g, s.source_kind or kind)
    pair = colliding_pair(s)
    if pair is not None:
        raise PreconditionError(f"repeated eigenvalues at indices {pair}")
    lab = pair_label_matrix(g, labels)
    rng = np.random.default_rng(seed)
    for attempt in range(1, max_attempts + 1):
        W = rng.standard_normal(lab.shape[1])
        e = pair_matrix(lab @ W, n)
        c = pair_gft(s, e)
        tol = coeff_tol if coeff_tol is not None else 1e-8 * max(1.0, float(np.max(np.abs(c))))
        if np.all(np.abs(c) > tol):
            break
    else:
        raise PreconditionError(
            f"no W in {max_attempts} draws gives every eigengraph coefficient non-zero; "
            "a symmetry of the labelled graph forces some U^T e U entries to vanish")

    coloring, _ = local2_refine(g, init=labels)
    colors = np.asarray(coloring.colors)
    target = pair_matrix(class_targets(colors), n)
    q = universal_interpolate(s, e, target, coeff_tol=coeff_tol).swapped()
    out = apply_bivariate_poly(L, q, e)
    residual = float(np.max(np.abs(out - target)))
    induced = value_classes(out.ravel())
    refines = partition_refines(induced, colors)
    n_colors = int(np.unique(colors).size)
    n_values = int(np.unique(induced).size)
    nontrivial = bool(np.any(np.bincount(colors) >= 2))
    strict = n_values > n_colors
    violations = []
    if not refines:
        violations.append("equal filtered values across distinct stable colours")
    if nontrivial and not strict:
        violations.append("filtered partition is not strictly finer than the stable colouring")
    report = _report("thm3", graph_id, None, 1, violations, residual,
                     attempts=attempt, stable_classes=n_colors, value_classes=n_values,
                     refines=refines, strict=strict, has_nontrivial_class=nontrivial,
                     laplacian=s.source_kind or kind)
    return q, W, report
