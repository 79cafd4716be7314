"""Eigendecomposition, graph Fourier transforms and implicit Kronecker algebra.

Pair signals are ``n x n`` matrices identified with their column-stacked
vectorization, so ``(B.T kron A) vec(X) == vec(A @ X @ B)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DomainError, GuardError, NumericError, ParseError

DENSE_LIMIT = 32


def default_tol(eigenvalues) -> float:
    """Scale-relative gap/grouping tolerance ``1e-8 * max(1, |lambda_max|)``."""
    lam = np.asarray(eigenvalues)
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    return 1e-8 * max(1.0, top)


def check_dense(n: int, limit: int = DENSE_LIMIT) -> None:
    if n > limit:
        raise GuardError(f"refusing to materialize an {n * n}x{n * n} operator (n={n} > {limit})")


def _as_dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and orthonormal eigenvector columns of a symmetric matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_kind: Optional[str] = None

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def U(self) -> np.ndarray:
        return self.eigenvectors

    def matrix(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


def _fix_signs(U: np.ndarray, thresh: float = 1e-10) -> np.ndarray:
    """Flip columns so the first entry above ``thresh`` in magnitude is positive."""
    U = U.copy()
    for j in range(U.shape[1]):
        nz = np.flatnonzero(np.abs(U[:, j]) > thresh)
        if nz.size and U[nz[0], j] < 0:
            U[:, j] = -U[:, j]
    return U


def eigendecompose(L, tol: float = 1e-10, kind: Optional[str] = None) -> Spectrum:
    """Dense symmetric eigendecomposition with a deterministic sign convention.

    Raises ``DomainError`` if ``L`` is not symmetric within ``tol`` (relative to
    its largest entry) and ``NumericError`` if the solver does not converge.
    """
    L = _as_dense(L)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {L.shape}")
    scale = max(1.0, float(np.max(np.abs(L)))) if L.size else 1.0
    if L.size and np.max(np.abs(L - L.T)) > tol * scale:
        raise DomainError("matrix is not symmetric")
    try:
        lam, U = np.linalg.eigh(0.5 * (L + L.T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    U = _fix_signs(U)
    lam.setflags(write=False)
    U.setflags(write=False)
    return Spectrum(lam, U, kind)


def _check_vec(s: Spectrum, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != s.n:
        raise DimensionError(f"signal has {x.shape[0]} rows, spectrum has {s.n}")
    return x


def _check_pair(s: Spectrum, e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.shape != (s.n, s.n):
        raise DimensionError(f"pair signal has shape {e.shape}, expected {(s.n, s.n)}")
    return e


def gft(s: Spectrum, x) -> np.ndarray:
    return s.U.T @ _check_vec(s, x)


def igft(s: Spectrum, xhat) -> np.ndarray:
    return s.U @ _check_vec(s, xhat)


def pair_gft(s: Spectrum, e) -> np.ndarray:
    """Eigengraph coefficients ``U^T e U``; entry ``(i, j)`` multiplies ``u_i u_j^T``."""
    return s.U.T @ _check_pair(s, e) @ s.U


def pair_igft(s: Spectrum, ehat) -> np.ndarray:
    return s.U @ _check_pair(s, ehat) @ s.U.T


def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, n: int) -> np.ndarray:
    v = np.asarray(v)
    if v.size != n * n:
        raise DimensionError(f"cannot reshape {v.size} entries into {n}x{n}")
    return v.reshape((n, n), order="F")


def kron_apply(A, B, X) -> np.ndarray:
    """``A @ X @ B``, i.e. ``(B^T kron A)`` applied to ``vec(X)``."""
    A, B, X = (np.asarray(M, dtype=float) for M in (A, B, X))
    n = X.shape[0]
    if X.shape != (n, n) or A.shape != (n, n) or B.shape != (n, n):
        raise DimensionError(f"shapes {A.shape}, {B.shape}, {X.shape} do not match")
    return A @ X @ B


class KronSum:
    """Implicit ``L kron I + I kron L`` acting on pair signals."""

    def __init__(self, L):
        self.L = L if sp.issparse(L) else np.asarray(L, dtype=float)
        self.n = self.L.shape[0]

    def apply(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        if e.shape != (self.n, self.n):
            raise DimensionError(f"pair signal has shape {e.shape}, expected {(self.n, self.n)}")
        # (L kron I) vec(e) = vec(e L^T); L is symmetric
        return np.asarray(e @ self.L.T) + np.asarray(self.L @ e)

    __call__ = apply

    def dense(self, limit: int = DENSE_LIMIT) -> np.ndarray:
        check_dense(self.n, limit)
        L = _as_dense(self.L)
        eye = np.eye(self.n)
        return np.kron(L, eye) + np.kron(eye, L)


def kron_sum(L) -> KronSum:
    return KronSum(L)


@dataclass(frozen=True)
class EigenspaceProjector:
    eigenvalue: float
    projector: np.ndarray
    multiplicity: int
    indices: tuple


def eigenvalue_groups(s: Spectrum, group_tol: Optional[float] = None) -> list:
    """Index groups of consecutive eigenvalues whose successive gaps are ``<= group_tol``."""
    if group_tol is None:
        group_tol = default_tol(s.eigenvalues)
    if group_tol <= 0:
        raise DomainError("group_tol must be positive")
    groups = []
    for i, lam in enumerate(s.eigenvalues):
        if groups and lam - s.eigenvalues[groups[-1][-1]] <= group_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def eigenspace_projectors(s: Spectrum, group_tol: Optional[float] = None) -> list:
    out = []
    for idx in eigenvalue_groups(s, group_tol):
        Uk = s.U[:, idx]
        out.append(EigenspaceProjector(
            eigenvalue=float(np.mean(s.eigenvalues[idx])),
            projector=Uk @ Uk.T,
            multiplicity=len(idx),
            indices=tuple(idx),
        ))
    return out


def is_simple_spectrum(s: Spectrum, gap_tol: Optional[float] = None) -> bool:
    if gap_tol is None:
        gap_tol = default_tol(s.eigenvalues)
    if gap_tol <= 0:
        raise DomainError("gap_tol must be positive")
    if s.n <= 1:
        return True
    return bool(np.min(np.diff(s.eigenvalues)) > gap_tol)


def colliding_pair(s: Spectrum, gap_tol: Optional[float] = None):
    """First ``(i, i+1)`` whose eigenvalue gap is ``<= gap_tol``, else ``None``."""
    if gap_tol is None:
        gap_tol = default_tol(s.eigenvalues)
    gaps = np.diff(s.eigenvalues)
    bad = np.flatnonzero(gaps <= gap_tol)
    return None if bad.size == 0 else (int(bad[0]), int(bad[0]) + 1)


# --------------------------------------------------------------------------
# matrix CSV


def read_matrix_csv(text: str) -> np.ndarray:
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise ParseError(f"non-numeric entry in {row!r}", lineno) from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"expected {len(rows[0])} columns, got {len(rows[-1])}", lineno)
    if not rows:
        raise ParseError("empty matrix")
    return np.array(rows)


def format_float(x: float) -> str:
    return "%.17g" % x


def write_matrix_csv(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "".join(",".join(format_float(x) for x in row) + "\n" for row in M)
