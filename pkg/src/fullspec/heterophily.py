"""Class-wise feature model, optimal convolutions and spectral energy diagnostics.

Nodes fall into ``k`` classes; a node of class ``a`` has feature
``m_a + z`` with ``E z = 0`` and ``Cov z = (tau_a / d) I``. A convolution
``C`` is scored by the class-weighted squared error of ``C X`` against the
class means, evaluated in closed form from the bias-variance split.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError, NumericError, PreconditionError
from .graph import Graph, Partition, generate_class_graph, laplacian
from .linalg import Spectrum, eigendecompose, eigenspace_projectors, eigenvalue_groups


@dataclass(frozen=True)
class ClassModel:
    """Means ``m_a`` (rows, unit norm), traces ``tau_a`` and node classes."""

    means: np.ndarray
    taus: tuple
    partition: Partition
    seed: Optional[int] = None

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        taus = tuple(float(t) for t in self.taus)
        if means.shape[0] != self.partition.k or len(taus) != self.partition.k:
            raise DimensionError(
                f"{means.shape[0]} means and {len(taus)} taus for {self.partition.k} classes")
        if any(t <= 0 for t in taus):
            raise DomainError("every tau must be positive")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "taus", taus)

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def sizes(self) -> tuple:
        return self.partition.sizes

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n(self) -> int:
        return self.partition.n

    def onehot(self) -> np.ndarray:
        return np.eye(self.k)[np.asarray(self.partition.class_of)]


def sample_means(k: int, d: int, rng) -> np.ndarray:
    if d < 1:
        raise DomainError("feature dimension must be at least 1")
    G = rng.standard_normal((k, d))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def sample_model(k: int, sizes, d: int, taus, seed: int, class_of=None) -> ClassModel:
    """Means uniform on the unit sphere (normalized Gaussians).

    Nodes are laid out in contiguous class blocks unless ``class_of`` is given.
    A scalar ``taus`` is broadcast to every class.
    """
    partition = Partition(tuple(class_of)) if class_of is not None else Partition.from_sizes(sizes)
    if partition.k != k or (sizes is not None and tuple(sizes) != partition.sizes):
        raise DimensionError(f"k={k} and sizes={sizes} disagree with the class assignment")
    taus = np.broadcast_to(np.asarray(taus, dtype=float), (k,))
    rng = np.random.default_rng(seed)
    return ClassModel(sample_means(k, d, rng), tuple(taus), partition, seed)


def sample_features(model: ClassModel, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cls = np.asarray(model.partition.class_of)
    scale = np.sqrt(np.asarray(model.taus) / model.dim)[cls]
    return model.means[cls] + scale[:, None] * rng.standard_normal((model.n, model.dim))


# --------------------------------------------------------------------------
# loss


def _check_C(C, model: ClassModel) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.shape != (model.n, model.n):
        raise DimensionError(f"C has shape {C.shape}, model has {model.n} nodes")
    return C


def loss(C, model: ClassModel) -> float:
    """Closed-form class-weighted mean squared error of ``C X`` against ``m_class``.

    Row ``p`` of class ``a`` contributes ``(bias_p + var_p) / n_a`` with
    ``bias_p = |sum_b C[p, V_b].sum() m_b - m_a|^2`` and
    ``var_p = sum_b tau_b |C[p, V_b]|^2``.
    """
    C = _check_C(C, model)
    P = model.onehot()
    M = model.means
    resid = (C @ P) @ M - P @ M
    bias = np.sum(resid**2, axis=1)
    var = (C**2) @ (P @ np.asarray(model.taus))
    weight = 1.0 / np.asarray(model.sizes, dtype=float)[np.asarray(model.partition.class_of)]
    return float(np.sum(weight * (bias + var)))


@dataclass(frozen=True)
class EquivariantConv:
    """``C = sum_a (alpha_a I + beta_a J) on V_a x V_a + sum_{a != b} gamma_ab J on V_a x V_b``.

    ``gamma`` is a ``k x k`` array whose diagonal is ignored. Singleton classes
    keep ``alpha_a = 0`` and store their single entry in ``beta_a``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        beta = np.asarray(self.beta, dtype=float).ravel()
        gamma = np.array(self.gamma, dtype=float)
        k = alpha.size
        if beta.size != k or gamma.shape != (k, k):
            raise DimensionError("alpha, beta and gamma sizes disagree")
        np.fill_diagonal(gamma, 0.0)
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
            raise DomainError("coefficients must be finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def k(self) -> int:
        return self.alpha.size

    @classmethod
    def zeros(cls, k: int) -> "EquivariantConv":
        return cls(np.zeros(k), np.zeros(k), np.zeros((k, k)))

    @classmethod
    def identity(cls, k: int) -> "EquivariantConv":
        return cls(np.ones(k), np.zeros(k), np.zeros((k, k)))

    def assemble(self, partition: Partition) -> np.ndarray:
        cls_of = np.asarray(partition.class_of)
        block = self.gamma.copy()
        block[np.diag_indices(self.k)] = self.beta
        C = block[cls_of][:, cls_of]
        C[np.diag_indices(partition.n)] += self.alpha[cls_of]
        return C

    def to_vector(self) -> np.ndarray:
        off = ~np.eye(self.k, dtype=bool)
        return np.concatenate([self.alpha, self.beta, self.gamma[off]])

    @classmethod
    def from_vector(cls, v, k: int) -> "EquivariantConv":
        v = np.asarray(v, dtype=float)
        gamma = np.zeros((k, k))
        gamma[~np.eye(k, dtype=bool)] = v[2 * k:]
        return cls(v[:k], v[k:2 * k], gamma)


def class_losses(coeffs: EquivariantConv, model: ClassModel) -> np.ndarray:
    """Per-class contribution ``phi_a`` (identical for every node of the class)."""
    n = np.asarray(model.sizes, dtype=float)
    tau = np.asarray(model.taus)
    M = model.means
    out = np.empty(model.k)
    for a in range(model.k):
        weights = n * coeffs.gamma[a]
        weights[a] = coeffs.alpha[a] + n[a] * coeffs.beta[a] - 1.0
        bias = float(np.sum((weights @ M) ** 2))
        own = tau[a] * ((coeffs.alpha[a] + coeffs.beta[a]) ** 2 + (n[a] - 1) * coeffs.beta[a] ** 2)
        cross = float(np.sum(np.delete(tau * n * coeffs.gamma[a] ** 2, a)))
        out[a] = bias + own + cross
    return out


def loss_equivariant(coeffs: EquivariantConv, model: ClassModel) -> float:
    """:func:`loss` of ``coeffs.assemble(...)`` without forming ``C``.

    Each of the ``n_a`` rows of class ``a`` has the same error ``phi_a`` and
    weight ``1 / n_a``, so the total is ``sum_a phi_a``.
    """
    if coeffs.k != model.k:
        raise DimensionError(f"{coeffs.k} classes of coefficients, model has {model.k}")
    return float(np.sum(class_losses(coeffs, model)))


# --------------------------------------------------------------------------
# Reynolds average


def reynolds_coefficients(C, partition: Partition) -> EquivariantConv:
    """Average of ``C`` over independent within-class permutations, as coefficients.

    Diagonal blocks: ``beta`` is the mean off-diagonal entry and ``alpha`` the
    mean diagonal entry minus ``beta``; off blocks average to ``gamma``.
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (partition.n, partition.n):
        raise DimensionError(f"C has shape {C.shape}, partition has {partition.n} nodes")
    k = partition.k
    members = [partition.members(a) for a in range(k)]
    alpha, beta, gamma = np.zeros(k), np.zeros(k), np.zeros((k, k))
    for a, Va in enumerate(members):
        block = C[np.ix_(Va, Va)]
        na = Va.size
        if na == 1:
            beta[a] = block[0, 0]
        else:
            diag_mean = np.trace(block) / na
            off_mean = (block.sum() - np.trace(block)) / (na * (na - 1))
            alpha[a], beta[a] = diag_mean - off_mean, off_mean
        for b, Vb in enumerate(members):
            if b != a:
                gamma[a, b] = C[np.ix_(Va, Vb)].mean()
    return EquivariantConv(alpha, beta, gamma)


def reynolds_average(C, partition: Partition) -> np.ndarray:
    return reynolds_coefficients(C, partition).assemble(partition)


def is_class_equivariant(C, partition: Partition, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(reynolds_average(C, partition) - np.asarray(C))) <= tol)


# --------------------------------------------------------------------------
# optimum


def optimal_convolution(model: ClassModel):
    """Unique minimizer of :func:`loss` (it is class-wise equivariant).

    For each class ``a``, with ``b, c`` ranging over the other classes:
    ``h_b = n_b <m_b, m_a>``, ``G_bc = n_b n_c <m_b, m_c>``,
    ``D = diag(tau_b n_b)``, ``w = (G + D)^{-1} h`` and
    ``A_a = |m_a|^2 - h . w``. Then ``alpha_a = 0``,
    ``beta_a = A_a / (n_a A_a + tau_a)`` and
    ``gamma_a. = tau_a / (n_a A_a + tau_a) * w``.

    Returns ``(coeffs, C)``.
    """
    k = model.k
    n = np.asarray(model.sizes, dtype=float)
    tau = np.asarray(model.taus)
    gram = model.means @ model.means.T
    alpha, beta, gamma = np.zeros(k), np.zeros(k), np.zeros((k, k))
    for a in range(k):
        others = np.array([b for b in range(k) if b != a], dtype=int)
        h = n[others] * gram[others, a]
        system = np.outer(n[others], n[others]) * gram[np.ix_(others, others)] + np.diag(tau[others] * n[others])
        if others.size:
            try:
                w = scipy.linalg.solve(system, h, assume_a="pos")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
                raise NumericError(f"class {a}: singular normal equations ({exc})") from exc
        else:
            w = np.zeros(0)
        A = gram[a, a] - float(h @ w)
        denom = n[a] * A + tau[a]
        beta[a] = A / denom
        gamma[a, others] = tau[a] / denom * w
    coeffs = EquivariantConv(alpha, beta, gamma)
    return coeffs, coeffs.assemble(model.partition)


def asymptotic_sweep(k: int, sizes, taus, dims: Sequence[int], seeds: int, base_seed: int = 0) -> dict:
    """Distance of the optimum from the block-diagonal limit as ``d`` grows.

    Each ``(d, seed)`` cell samples fresh means and records, per class,
    ``beta_err = |beta_a - 1/(n_a + tau_a)|`` and ``gamma_max = max_b |gamma_ab|``.
    Medians are pooled over seeds and classes. ``rate_ok`` compares the fitted
    log-log slope of the gamma medians with that of ``sqrt(log d / d)`` on
    the same grid.
    """
    dims = [int(d) for d in dims]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise DomainError("dims must be strictly ascending")
    n = np.asarray(sizes, dtype=float)
    tau = np.broadcast_to(np.asarray(taus, dtype=float), (k,))
    limit = 1.0 / (n + tau)
    rows = []
    beta_med, gamma_med = [], []
    for d in dims:
        b_errs, g_maxs = [], []
        for s in range(seeds):
            seed = int(np.random.SeedSequence([base_seed, d, s]).generate_state(1)[0])
            model = sample_model(k, sizes, d, tau, seed)
            coeffs, _ = optimal_convolution(model)
            for a in range(k):
                be = abs(coeffs.beta[a] - limit[a])
                gm = float(np.max(np.abs(np.delete(coeffs.gamma[a], a)))) if k > 1 else 0.0
                rows.append((d, s, a, be, gm))
                b_errs.append(be)
                g_maxs.append(gm)
        beta_med.append(float(np.median(b_errs)))
        gamma_med.append(float(np.median(g_maxs)))
    logd = np.log(np.asarray(dims, dtype=float))
    rate = np.sqrt(logd / np.asarray(dims, dtype=float))
    rate_slope = float(np.polyfit(logd, np.log(rate), 1)[0]) if len(dims) > 1 else 0.0
    if k > 1 and len(dims) > 1 and min(gamma_med) > 0:
        gamma_slope = float(np.polyfit(logd, np.log(gamma_med), 1)[0])
    else:
        gamma_slope = float("-inf")
    beta_monotone = all(b2 <= b1 for b1, b2 in zip(beta_med, beta_med[1:]))
    gamma_monotone = all(g2 <= g1 for g1, g2 in zip(gamma_med, gamma_med[1:]))
    ratio = gamma_med[0] / gamma_med[-1] if gamma_med[-1] > 0 else float("inf")
    return {
        "rows": rows,
        "dims": dims,
        "beta_median": beta_med,
        "gamma_median": gamma_med,
        "beta_monotone": beta_monotone,
        "gamma_monotone": gamma_monotone,
        "gamma_ratio": ratio,
        "gamma_slope": gamma_slope,
        "rate_slope": rate_slope,
        "rate_ok": gamma_slope <= rate_slope,
    }


# --------------------------------------------------------------------------
# spectral diagnostics


def near_diagonal_energy(C, s: Spectrum, deltas) -> np.ndarray:
    """Share of ``sum W_ij`` with ``|lam_i - lam_j| <= delta``, ``W = (U^T C U)**2``."""
    C = np.asarray(C, dtype=float)
    if C.shape != (s.n, s.n):
        raise DimensionError(f"C has shape {C.shape}, spectrum has {s.n}")
    W = (s.U.T @ C @ s.U) ** 2
    total = W.sum()
    if total <= 0:
        raise DomainError("near-diagonal energy of the zero operator is undefined")
    gap = np.abs(s.eigenvalues[:, None] - s.eigenvalues[None, :])
    slack = 1e-12 * max(1.0, float(np.max(np.abs(s.eigenvalues))))
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    return np.array([W[gap <= dl + slack].sum() / total for dl in deltas])


def distance_to_spectral_subspace(C, s: Spectrum, group_tol: Optional[float] = None) -> float:
    """Frobenius distance from ``C`` to ``span{E_lam}``."""
    C = np.asarray(C, dtype=float)
    if C.shape != (s.n, s.n):
        raise DimensionError(f"C has shape {C.shape}, spectrum has {s.n}")
    proj = np.zeros_like(C)
    for P in eigenspace_projectors(s, group_tol):
        proj += (np.trace(P.projector @ C) / P.multiplicity) * P.projector
    return float(np.linalg.norm(C - proj))


def numerical_rank(M, tol: float = 1e-8) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    sig = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sig > tol * sig[0])) if sig[0] > 0 else 0


def null_space(M, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel at cutoff ``tol * sigma_max``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, sig, Vt = np.linalg.svd(M)
    r = int(np.sum(sig > tol * sig[0])) if sig.size and sig[0] > 0 else 0
    return Vt[r:].T


def vertex_block(U, i: int) -> np.ndarray:
    """``U`` without row ``i``, columns scaled by row ``i``: the rows are
    ``U[j] * U[i]`` for ``j != i``."""
    U = np.asarray(U, dtype=float)
    return np.delete(U, i, axis=0) * U[i][None, :]


def column_support(U, i: int, tol: float = 1e-8) -> frozenset:
    return frozenset(np.flatnonzero(np.abs(np.asarray(U)[i]) > tol).tolist())


def greedy_activating_list(U, tol: float = 1e-8) -> list:
    """Vertices chosen by largest new column coverage, ties to the smallest id."""
    U = np.asarray(U)
    n = U.shape[0]
    supports = [column_support(U, i, tol) for i in range(n)]
    covered = set()
    chosen = []
    while len(covered) < U.shape[1]:
        gains = [(len(supports[i] - covered), -i) for i in range(n) if i not in chosen]
        if not gains:
            break
        best, neg_i = max(gains)
        if best == 0:
            raise PreconditionError("some eigenvector column is zero on every vertex")
        chosen.append(-neg_i)
        covered |= supports[-neg_i]
    return chosen


@dataclass(frozen=True)
class SpectralObstruction:
    activating_list: tuple
    block_supports: tuple
    stacked_rank: int
    K: int
    null_dim: int
    verdict: bool
    partition: tuple
    degenerate: bool = False
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "activating_list": list(self.activating_list),
            "block_supports": [sorted(s) for s in self.block_supports],
            "stacked_rank": self.stacked_rank,
            "K": self.K,
            "null_dim": self.null_dim,
            "verdict": self.verdict,
            "partition": list(self.partition),
            "degenerate": self.degenerate,
        }


def spectral_obstruction(g: Graph, s: Spectrum, tol: float = 1e-8) -> SpectralObstruction:
    """Why no spectral filter can be non-trivially class-block-sparse.

    The greedy list ``I`` induces the partition {each listed vertex alone, the
    rest}. A spectral operator ``U diag(theta) U^T`` is zero on every
    cross-class pair iff ``T theta = 0``, where ``T`` stacks ``U[i] * U[j]``
    over those pairs. The verdict holds when ``rank(M_I) = n - 1`` and the
    kernel of ``T`` (with ``theta`` tied inside degenerate eigenspaces) is the
    constants, forcing the operator to be a multiple of the identity.
    """
    if not g.is_connected():
        raise PreconditionError("graph is disconnected")
    U = s.U
    n = s.n
    chosen = greedy_activating_list(U, tol)
    supports = tuple(column_support(U, i, tol) for i in chosen)
    M_I = np.vstack([vertex_block(U, i) for i in chosen]) if chosen else np.zeros((0, n))
    rank = numerical_rank(M_I, tol) if n > 1 else 0

    cls = np.full(n, len(chosen))
    for t, i in enumerate(chosen):
        cls[i] = t
    iu, ju = np.triu_indices(n, 1)
    cross = cls[iu] != cls[ju]
    T = U[iu[cross]] * U[ju[cross]]
    groups = eigenvalue_groups(s)
    B = np.zeros((n, len(groups)))
    for gi, idx in enumerate(groups):
        B[idx, gi] = 1.0
    TB = T @ B
    if TB.shape[0] == 0:
        null = np.eye(len(groups))
    else:
        null = null_space(TB, tol)
    ones = np.ones(len(groups)) / np.sqrt(len(groups))
    const_in_null = null.shape[1] >= 1 and np.linalg.norm(null @ (null.T @ ones) - ones) < 1e-6
    verdict = bool(rank == n - 1 and null.shape[1] == 1 and const_in_null)
    return SpectralObstruction(
        activating_list=tuple(chosen),
        block_supports=supports,
        stacked_rank=rank,
        K=len(chosen),
        null_dim=int(null.shape[1]),
        verdict=verdict,
        partition=tuple(int(c) for c in cls),
        degenerate=len(groups) < n,
        details={"n_constraints": int(T.shape[0]), "n_groups": len(groups)},
    )


def deletion_drops_rank(Uk, row: int, tol: float = 1e-8):
    """``(observed, predicted)`` for deleting ``row`` from orthonormal columns ``Uk``.

    Predicted: the rank drops iff the row has unit norm.
    """
    Uk = np.atleast_2d(np.asarray(Uk, dtype=float))
    observed = numerical_rank(np.delete(Uk, row, axis=0), tol) < Uk.shape[1]
    predicted = abs(float(np.sum(Uk[row] ** 2)) - 1.0) <= 1e-9
    return observed, predicted


def stacked_pair_rank(U, i: int, j: int, tol: float = 1e-8):
    """``(rank([M_i; M_j]), |S_i | S_j| - 1)``."""
    M = np.vstack([vertex_block(U, i), vertex_block(U, j)])
    predicted = len(column_support(U, i, tol) | column_support(U, j, tol)) - 1
    return numerical_rank(M, tol), predicted


# --------------------------------------------------------------------------
# heterophily sweep


def heterophily_sweep(h_grid, sizes, avg_degree: float, d: int, taus, seeds: int,
                      deltas, kind: str = "normalized", base_seed: int = 0) -> list:
    """Near-diagonal energy of the optimum on synthetic graphs of rising heterophily.

    Rows are ``(h, seed, realized_h, delta, ratio)``.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.size == 0:
        raise DomainError("empty delta grid")
    partition = Partition.from_sizes(sizes)
    k = partition.k
    rows = []
    for h in h_grid:
        for s in range(seeds):
            seed = int(np.random.SeedSequence([base_seed, s, int(round(h * 1e6))]).generate_state(1)[0])
            g, realized = generate_class_graph(partition, h, avg_degree, seed)
            model = sample_model(k, partition.sizes, d, taus, seed + 1, class_of=partition.class_of)
            _, C = optimal_convolution(model)
            spec = eigendecompose(laplacian(g, kind), kind=kind)
            for dl, r in zip(deltas, near_diagonal_energy(C, spec, deltas)):
                rows.append((float(h), s, realized, float(dl), float(r)))
    return rows


def median_energy(rows, delta: float) -> dict:
    """``{h: median ratio at delta}`` from :func:`heterophily_sweep` rows."""
    out = {}
    for h in sorted({r[0] for r in rows}):
        vals = [r[4] for r in rows if r[0] == h and abs(r[3] - delta) < 1e-12]
        out[h] = float(np.median(vals)) if vals else float("nan")
    return out
