"""Univariate and bivariate spectral filters.

Orientation used throughout: for a bivariate polynomial ``q(s, t)`` with
coefficient matrix ``A`` (``A[i, j]`` multiplies ``s**i * t**j``), the operator
``q(L kron I, I kron L)`` acts on a pair signal ``e`` as

    sum_ij A[i, j] * L**j @ e @ L**i

so the first variable acts on the column index of ``e`` and the second on the
row index. On the eigengraph ``u_a u_b^T`` it therefore multiplies by
``q(lam_b, lam_a)``; :func:`eigengraph_response` returns exactly that table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb
from typing import Callable, Optional

import numpy as np
import numpy.polynomial.chebyshev as npcheb
import numpy.polynomial.polynomial as nppoly
import scipy.sparse as sp

from .errors import DimensionError, DomainError, NeedsSpectrumError
from .graph import NORMALIZED, laplacian_kind
from .linalg import Spectrum

MONOMIAL = "monomial"
CHEBYSHEV = "chebyshev"
CHEB_INTERP = "chebyshev-interpolated"
BERNSTEIN = "bernstein"
BASES = (MONOMIAL, CHEBYSHEV, CHEB_INTERP, BERNSTEIN)
_BASIS_ALIASES = {"chebyshev-first-kind": CHEBYSHEV, "cheb": CHEBYSHEV,
                  "chebii": CHEB_INTERP, "bern": BERNSTEIN}


def spectral_domain(L, kind: Optional[str] = None) -> tuple:
    """Interval known to contain the spectrum of ``L`` without diagonalizing it.

    ``[0, 2]`` for the normalized Laplacian, else ``[0, Gershgorin bound]``.
    """
    if kind is not None and laplacian_kind(kind) == NORMALIZED:
        return (0.0, 2.0)
    if sp.issparse(L):
        absL = abs(L)
        radius = np.asarray(absL.sum(axis=1)).ravel()
    else:
        radius = np.abs(np.asarray(L)).sum(axis=1)
    hi = float(np.max(radius)) if radius.size else 0.0
    return (0.0, hi if hi > 0 else 1.0)


def _matmul(L, X) -> np.ndarray:
    return np.asarray(L @ X)


def _right(X, L) -> np.ndarray:
    """``X @ L`` for symmetric ``L`` (keeps a sparse ``L`` on the left)."""
    return np.asarray(L @ X.T).T


def chebyshev_nodes(K: int, domain=(-1.0, 1.0)) -> np.ndarray:
    """The ``K+1`` first-kind Chebyshev nodes mapped onto ``domain``.

    Node ``j`` is where the ``j``-th value of a ``chebyshev-interpolated``
    filter is attained.
    """
    j = np.arange(K + 1)
    x = np.cos((j + 0.5) * np.pi / (K + 1))
    lo, hi = domain
    return (lo + hi) / 2 + (hi - lo) / 2 * x


def cheb_values_to_coeffs(values) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through values at Chebyshev nodes.

    Discrete cosine relation ``c_k = 2/(K+1) * sum_j v_j cos(k (j+1/2) pi/(K+1))``
    with ``c_0`` halved.
    """
    v = np.asarray(values, dtype=float)
    K = v.size - 1
    j = np.arange(K + 1)
    k = j[:, None]
    T = np.cos(k * (j[None, :] + 0.5) * np.pi / (K + 1))
    c = (2.0 / (K + 1)) * T @ v
    c[0] /= 2
    return c


@dataclass(frozen=True)
class UnivariatePoly:
    """Polynomial filter ``p(lam)`` in one of four bases.

    Rescaled bases (everything except monomial) map ``domain`` affinely onto
    ``[-1, 1]`` (Chebyshev) or ``[0, 1]`` (Bernstein). For the
    ``chebyshev-interpolated`` basis ``coeffs`` are the filter values at the
    ``K+1`` Chebyshev nodes of the domain.
    """

    basis: str
    coeffs: tuple
    domain: Optional[tuple] = None

    def __post_init__(self):
        basis = _BASIS_ALIASES.get(self.basis, self.basis)
        if basis not in BASES:
            raise DomainError(f"unknown basis {self.basis!r}")
        object.__setattr__(self, "basis", basis)
        coeffs = tuple(float(c) for c in np.atleast_1d(self.coeffs))
        if not coeffs:
            raise DomainError("a polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)
        if basis != MONOMIAL:
            if self.domain is None:
                raise DomainError(f"basis {basis!r} needs a spectral domain")
            lo, hi = (float(x) for x in self.domain)
            if not hi > lo:
                raise DomainError(f"degenerate spectral domain [{lo}, {hi}]")
            object.__setattr__(self, "domain", (lo, hi))
        elif self.domain is not None:
            object.__setattr__(self, "domain", tuple(float(x) for x in self.domain))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def monomial(cls, coeffs) -> "UnivariatePoly":
        return cls(MONOMIAL, tuple(coeffs))

    @classmethod
    def constant(cls, c: float = 1.0) -> "UnivariatePoly":
        return cls(MONOMIAL, (c,))

    def _cheb_coeffs(self) -> np.ndarray:
        c = np.asarray(self.coeffs)
        return cheb_values_to_coeffs(c) if self.basis == CHEB_INTERP else c

    def _to_unit(self, lam):
        lo, hi = self.domain
        return (2 * np.asarray(lam, dtype=float) - lo - hi) / (hi - lo)

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        c = np.asarray(self.coeffs)
        if self.basis == MONOMIAL:
            return nppoly.polyval(lam, c)
        if self.basis in (CHEBYSHEV, CHEB_INTERP):
            return npcheb.chebval(self._to_unit(lam), self._cheb_coeffs())
        lo, hi = self.domain
        y = (lam - lo) / (hi - lo)
        b = [np.full_like(y, ck) for ck in c]
        for r in range(1, len(c)):
            b = [(1 - y) * b[k] + y * b[k + 1] for k in range(len(c) - r)]
        return b[0]

    def to_monomial(self) -> "UnivariatePoly":
        """Same polynomial with coefficients in powers of ``lam``."""
        if self.basis == MONOMIAL:
            return self
        lo, hi = self.domain
        if self.basis in (CHEBYSHEV, CHEB_INTERP):
            series = np.polynomial.Chebyshev(self._cheb_coeffs(), domain=[lo, hi])
            coef = series.convert(kind=np.polynomial.Polynomial).coef
        else:
            P = np.polynomial.Polynomial
            y = P([-lo / (hi - lo), 1.0 / (hi - lo)])
            K = self.degree
            total = P([0.0])
            for k, ck in enumerate(self.coeffs):
                total = total + ck * comb(K, k) * y**k * (1 - y) ** (K - k)
            coef = total.coef
        coef = np.pad(coef, (0, max(0, self.degree + 1 - coef.size)))
        return UnivariatePoly(MONOMIAL, tuple(coef[: self.degree + 1]))

    def apply(self, L, X) -> np.ndarray:
        """``p(L) @ X`` by the basis recurrence; ``L`` may be dense or sparse."""
        X = np.asarray(X, dtype=float)
        if X.shape[0] != L.shape[0]:
            raise DimensionError(f"operand has {X.shape[0]} rows, operator is {L.shape}")
        c = self.coeffs
        if self.basis == MONOMIAL:
            out = c[-1] * X
            for ck in c[-2::-1]:
                out = _matmul(L, out) + ck * X
            return out
        lo, hi = self.domain
        if self.basis in (CHEBYSHEV, CHEB_INTERP):
            cc = self._cheb_coeffs()
            scale, shift = 2.0 / (hi - lo), (lo + hi) / (hi - lo)

            def Lt(Y):
                return scale * _matmul(L, Y) - shift * Y

            t_prev, t_cur = X, Lt(X)
            out = cc[0] * t_prev
            if len(cc) > 1:
                out = out + cc[1] * t_cur
            for ck in cc[2:]:
                t_prev, t_cur = t_cur, 2 * Lt(t_cur) - t_prev
                out = out + ck * t_cur
            return out

        def By(Y):
            return (_matmul(L, Y) - lo * Y) / (hi - lo)

        b = [ck * X for ck in c]
        for r in range(1, len(c)):
            b = [b[k] - By(b[k]) + By(b[k + 1]) for k in range(len(c) - r)]
        return b[0]

    def apply_right(self, X, L) -> np.ndarray:
        """``X @ p(L)`` for symmetric ``L``."""
        return self.apply(L, np.asarray(X, dtype=float).T).T

    def to_json(self) -> dict:
        out = {"basis": self.basis, "coeffs": list(self.coeffs)}
        if self.domain is not None:
            out["domain"] = list(self.domain)
        return out

    @classmethod
    def from_json(cls, data) -> "UnivariatePoly":
        return cls(data["basis"], tuple(data["coeffs"]), data.get("domain"))


@dataclass(frozen=True)
class BivariatePoly:
    """``q(s, t) = sum_ij A[i, j] x(s)**i x(t)**j`` with an optional total-degree cap.

    Without a ``domain`` the map ``x`` is the identity. With ``domain=(lo, hi)``
    it is the affine map of ``[lo, hi]`` onto ``[-1, 1]``, which keeps high
    degree interpolants well conditioned.
    """

    coeff_matrix: np.ndarray
    total_degree_cap: Optional[int] = None
    domain: Optional[tuple] = None

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.coeff_matrix, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"coefficient matrix must be square, got {A.shape}")
        if self.total_degree_cap is not None:
            i, j = np.indices(A.shape)
            if np.any(A[i + j > self.total_degree_cap] != 0):
                raise DomainError(f"coefficients above total degree {self.total_degree_cap}")
        A.setflags(write=False)
        object.__setattr__(self, "coeff_matrix", A)
        if self.domain is not None:
            lo, hi = (float(x) for x in self.domain)
            if not hi > lo:
                raise DomainError(f"degenerate domain [{lo}, {hi}]")
            object.__setattr__(self, "domain", (lo, hi))

    @property
    def K(self) -> int:
        return self.coeff_matrix.shape[0] - 1

    @classmethod
    def constant(cls, c: float = 1.0, K: int = 0) -> "BivariatePoly":
        A = np.zeros((K + 1, K + 1))
        A[0, 0] = c
        return cls(A)

    @classmethod
    def random(cls, K: int, rng, total_degree: bool = True) -> "BivariatePoly":
        """I.i.d. uniform ``[-1, 1]`` coefficients, masked to ``i + j <= K`` by default."""
        A = rng.uniform(-1.0, 1.0, size=(K + 1, K + 1))
        if total_degree:
            i, j = np.indices(A.shape)
            A[i + j > K] = 0.0
            return cls(A, K)
        return cls(A)

    def map_variable(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.domain is None:
            return lam
        lo, hi = self.domain
        return (2 * lam - lo - hi) / (hi - lo)

    def map_operator(self, L):
        """The matrix counterpart of :meth:`map_variable`."""
        if self.domain is None:
            return L
        lo, hi = self.domain
        eye = sp.identity(L.shape[0], format="csr") if sp.issparse(L) else np.eye(L.shape[0])
        return (2 * L - (lo + hi) * eye) / (hi - lo)

    def __call__(self, s, t):
        return nppoly.polyval2d(self.map_variable(s), self.map_variable(t), self.coeff_matrix)

    def swapped(self) -> "BivariatePoly":
        """``(s, t) -> q(t, s)``."""
        return BivariatePoly(self.coeff_matrix.T.copy(), self.total_degree_cap, self.domain)

    def to_raw(self) -> "BivariatePoly":
        """Equivalent polynomial with coefficients in plain powers of ``s`` and ``t``."""
        if self.domain is None:
            return self
        lo, hi = self.domain
        K = self.K
        x = np.polynomial.Polynomial([-(lo + hi) / (hi - lo), 2.0 / (hi - lo)])
        T = np.zeros((K + 1, K + 1))  # x**a = sum_k T[a, k] lam**k
        for a in range(K + 1):
            coef = (x**a).coef
            T[a, : coef.size] = coef
        return BivariatePoly(T.T @ self.coeff_matrix @ T)

    def to_json(self) -> dict:
        out = {"K": self.K, "coeff_matrix": self.coeff_matrix.tolist()}
        if self.total_degree_cap is not None:
            out["total_degree_cap"] = self.total_degree_cap
        if self.domain is not None:
            out["domain"] = list(self.domain)
        return out

    @classmethod
    def from_json(cls, data) -> "BivariatePoly":
        if isinstance(data, str):
            data = json.loads(data)
        A = np.array(data["coeff_matrix"], dtype=float)
        if "K" in data and A.shape[0] != int(data["K"]) + 1:
            raise DimensionError(f"K={data['K']} does not match a {A.shape} coefficient matrix")
        return cls(A, data.get("total_degree_cap"), data.get("domain"))


@dataclass(frozen=True)
class TensorDecomposition:
    """``sum_r f_r(s) h_r(t)``, i.e. the operator ``sum_r f_r(L) kron h_r(L)``."""

    pairs: tuple

    def __post_init__(self):
        if len(self.pairs) < 1:
            raise DomainError("a tensor decomposition needs at least one term")
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))

    @property
    def rank(self) -> int:
        return len(self.pairs)

    def to_bivariate(self) -> BivariatePoly:
        K = max(max(f.degree, h.degree) for f, h in self.pairs)
        A = np.zeros((K + 1, K + 1))
        for f, h in self.pairs:
            fc = np.asarray(f.to_monomial().coeffs)
            hc = np.asarray(h.to_monomial().coeffs)
            A[: fc.size, : hc.size] += np.outer(fc, hc)
        return BivariatePoly(A)

    def to_json(self) -> dict:
        return {"S": self.rank,
                "pairs": [{"f": f.to_json(), "h": h.to_json()} for f, h in self.pairs]}

    @classmethod
    def from_json(cls, data) -> "TensorDecomposition":
        if isinstance(data, str):
            data = json.loads(data)
        pairs = tuple((UnivariatePoly.from_json(p["f"]), UnivariatePoly.from_json(p["h"]))
                      for p in data["pairs"])
        if "S" in data and int(data["S"]) != len(pairs):
            raise DimensionError(f"S={data['S']} but {len(pairs)} pairs given")
        return cls(pairs)


# --------------------------------------------------------------------------
# application


def apply_univariate(s_or_L, g, x, backend: Optional[str] = None) -> np.ndarray:
    """Classical spectral filtering ``g(L) x``.

    With a :class:`Spectrum` the default backend is ``U (g(lam) * U^T x)``;
    with a matrix only the polynomial recurrence is available. ``g`` may be a
    :class:`UnivariatePoly` or a tabulated length-``n`` response.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(s_or_L, Spectrum):
        s = s_or_L
        if x.shape[0] != s.n:
            raise DimensionError(f"signal has {x.shape[0]} rows, spectrum has {s.n}")
        if backend == "poly":
            if not isinstance(g, UnivariatePoly):
                raise DomainError("polynomial backend needs a UnivariatePoly")
            return g.apply(s.matrix(), x)
        resp = g(s.eigenvalues) if isinstance(g, UnivariatePoly) else np.asarray(g, dtype=float)
        if resp.shape != (s.n,):
            raise DimensionError(f"response has shape {resp.shape}, expected {(s.n,)}")
        xhat = s.U.T @ x
        return s.U @ (resp.reshape((-1,) + (1,) * (x.ndim - 1)) * xhat)
    if not isinstance(g, UnivariatePoly):
        raise NeedsSpectrumError("a tabulated response needs an eigendecomposition")
    if backend == "eigen":
        raise NeedsSpectrumError("eigen backend needs a Spectrum")
    return g.apply(s_or_L, x)


def tabulate(q: BivariatePoly, s: Spectrum) -> np.ndarray:
    """``values[i, j] = q(lam_i, lam_j)`` (Horner on the eigenvalue grid)."""
    x = q.map_variable(s.eigenvalues)
    return nppoly.polygrid2d(x, x, q.coeff_matrix)


def eigengraph_response(q: BivariatePoly, s: Spectrum) -> np.ndarray:
    """Multiplier of each eigengraph ``u_a u_b^T`` under ``q(L kron I, I kron L)``.

    Equal to ``tabulate(q, s).T``: entry ``(a, b)`` is ``q(lam_b, lam_a)``.
    """
    return tabulate(q, s).T


def apply_full_spectrum_eigen(s: Spectrum, G, e) -> np.ndarray:
    """``U (G * (U^T e U)) U^T``: scale eigengraph ``u_i u_j^T`` by ``G[i, j]``."""
    G = np.asarray(G, dtype=float)
    e = np.asarray(e, dtype=float)
    if G.shape != (s.n, s.n) or e.shape != (s.n, s.n):
        raise DimensionError(f"shapes {G.shape} and {e.shape} do not match n={s.n}")
    U = s.U
    return U @ (G * (U.T @ e @ U)) @ U.T


def apply_bivariate_poly(L, q: BivariatePoly, e) -> np.ndarray:
    """``sum_ij A[i, j] L**j @ e @ L**i`` without forming any ``n^2 x n^2`` matrix.

    Right powers ``e @ L**i`` are cached once; the left side is a Horner sweep,
    so the cost is ``2K`` products with ``L``.
    """
    e = np.asarray(e, dtype=float)
    n = e.shape[0]
    if e.shape != (n, n) or L.shape != (n, n):
        raise DimensionError(f"operator {L.shape} and pair signal {e.shape} do not match")
    A = q.coeff_matrix
    K = q.K
    L = q.map_operator(L)
    right = [e]
    for _ in range(K):
        right.append(_right(right[-1], L))
    Z = [sum(A[i, j] * right[i] for i in range(K + 1)) for j in range(K + 1)]
    out = Z[K]
    for j in range(K - 1, -1, -1):
        out = _matmul(L, out) + Z[j]
    return out


def dense_bivariate_operator(L, q: BivariatePoly) -> np.ndarray:
    """Materialized ``sum_ij A[i, j] L**i kron L**j`` (oracle use, small ``n`` only)."""
    from .linalg import check_dense

    L = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
    n = L.shape[0]
    check_dense(n)
    L = q.map_operator(L)
    powers = [np.eye(n)]
    for _ in range(q.K):
        powers.append(powers[-1] @ L)
    A = q.coeff_matrix
    out = np.zeros((n * n, n * n))
    for i in range(q.K + 1):
        for j in range(q.K + 1):
            if A[i, j] != 0:
                out += A[i, j] * np.kron(powers[i], powers[j])
    return out


def tensor_decompose(q: BivariatePoly, S: int) -> TensorDecomposition:
    """Rank-``S`` truncated SVD of the coefficient matrix as ``sum_r f_r(s) h_r(t)``.

    ``S`` larger than ``K + 1`` is capped at ``K + 1``, which is already exact.
    Factors of a domain-mapped ``q`` come back in the Chebyshev basis on the
    same domain, which is the same polynomial in ``s``.
    """
    if S < 1:
        raise DomainError("rank S must be at least 1")
    Uf, sig, Vt = np.linalg.svd(q.coeff_matrix)
    S = min(S, sig.size)

    def factor(c):
        if q.domain is None:
            return UnivariatePoly.monomial(c)
        return UnivariatePoly(CHEBYSHEV, tuple(npcheb.poly2cheb(c)), q.domain)

    pairs = []
    for r in range(S):
        w = np.sqrt(sig[r])
        pairs.append((factor(w * Uf[:, r]), factor(w * Vt[r])))
    return TensorDecomposition(tuple(pairs))


def numerical_rank(A, cutoff: float = 1e-10) -> int:
    sig = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    return int(np.sum(sig > cutoff))


def apply_rank_S(t: TensorDecomposition, L, e) -> np.ndarray:
    """``sum_r h_r(L) @ e @ f_r(L)``."""
    e = np.asarray(e, dtype=float)
    out = np.zeros_like(e)
    for f, h in t.pairs:
        out += h.apply(L, f.apply_right(e, L))
    return out


def rank1_layer(L, f: UnivariatePoly, h: UnivariatePoly, e, H, W=None,
                sigma: Optional[Callable] = None) -> np.ndarray:
    """``sigma(h(L) @ e @ f(L) @ H @ W)`` evaluated right to left on thin matrices.

    ``H1 = f(L) H``, ``H2 = e H1``, ``H3 = h(L) H2``; nothing ``n x n`` beyond
    ``e`` itself is formed.
    """
    H = np.asarray(H, dtype=float)
    e = np.asarray(e, dtype=float)
    n = L.shape[0]
    if e.shape != (n, n) or H.shape[0] != n:
        raise DimensionError(f"L {L.shape}, e {e.shape} and H {H.shape} do not chain")
    H1 = f.apply(L, H)
    H2 = e @ H1
    H3 = h.apply(L, H2)
    if W is not None:
        W = np.asarray(W, dtype=float)
        if W.shape[0] != H3.shape[-1 if H3.ndim > 1 else 0]:
            raise DimensionError(f"W {W.shape} does not match features of width {H.shape}")
        H3 = H3 @ W
    return H3 if sigma is None else sigma(H3)


def rank1_layer_flops(nnz_L: int, nnz_e: int, n: int, d: int, d_out: int,
                      deg_f: int, deg_h: int) -> int:
    """Multiply-add count of :func:`rank1_layer` (monomial/Chebyshev recurrences).

    Each power of a sparse ``L`` on an ``n x d`` block costs ``nnz_L * d``, so
    both filters together are linear in ``K m d``.
    """
    return (deg_f + deg_h) * (nnz_L * d + n * d) + nnz_e * d + n * d * d_out


def diag_embed(s: Spectrum, x) -> np.ndarray:
    """``sum_i xhat_i u_i u_i^T``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (s.n,):
        raise DimensionError(f"signal has shape {x.shape}, expected {(s.n,)}")
    U = s.U
    return (U * (U.T @ x)) @ U.T


def project(s: Spectrum, H) -> np.ndarray:
    """``sum_ij (u_i^T H u_j) u_i``."""
    H = np.asarray(H, dtype=float)
    if H.shape != (s.n, s.n):
        raise DimensionError(f"pair signal has shape {H.shape}, expected {(s.n, s.n)}")
    U = s.U
    return U @ (U.T @ H @ U).sum(axis=1)
