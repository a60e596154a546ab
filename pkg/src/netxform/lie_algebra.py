"""Feasibility gate and constructive controllability of the edge vector fields.

Each edge (i, j) contributes the field g_ij(X) = E_ij X, where E_ij is the
matrix with a single one at row i, column j. The Lie algebra generated by
these fields decides whether the network can steer the transition matrix
anywhere in the positive-determinant group: for a connected graph the
closure spans all of R^(n x n), and pointwise controllability reduces to
rank(X) = n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import determinant
from .graph import Graph, is_connected


class LieAlgebraError(ValueError):
    """Index out of range or dimension mismatch."""


def index_matrix(n: int, i: int, j: int) -> np.ndarray:
    """E_ij: one at (i, j), zeros elsewhere. 1-based indices."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise LieAlgebraError(f"index ({i},{j}) out of range for n={n}")
    M = np.zeros((n, n))
    M[i - 1, j - 1] = 1.0
    return M


@dataclass(frozen=True)
class IndexField:
    """Symbolic handle for the edge vector field g_ij(X) = E_ij X."""

    n: int
    i: int
    j: int

    def __post_init__(self):
        if not (1 <= self.i <= self.n and 1 <= self.j <= self.n):
            raise LieAlgebraError(f"index ({self.i},{self.j}) out of range for n={self.n}")

    def element(self) -> "AlgebraElement":
        return AlgebraElement(coeffs=index_matrix(self.n, self.i, self.j))


@dataclass(frozen=True)
class AlgebraElement:
    """Coefficient matrix C representing the field X -> C X."""

    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(coeffs=self.coeffs + other.coeffs)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(coeffs=-self.coeffs)


@dataclass(frozen=True)
class FeasibilityReport:
    determinant: float
    connected: bool
    reason: str

    @property
    def feasible(self) -> bool:
        return self.determinant > 0.0 and self.connected

    @property
    def verdict(self) -> str:
        return "feasible" if self.feasible else "infeasible"

    def to_json_dict(self) -> dict:
        return {"det": self.determinant, "connected": self.connected,
                "feasible": self.feasible, "reason": self.reason}


def bracket(a: IndexField, b: IndexField) -> AlgebraElement:
    """Lie bracket of two edge fields as a combination of edge fields.

    For g_ij and g_kl the bracket field is (E_kl E_ij - E_ij E_kl) X, which
    contributes +g_kj when l = i and -g_il when j = k (both terms survive when
    both conditions hold, e.g. [g_12, g_21] = g_22 - g_11).
    """
    if a.n != b.n:
        raise LieAlgebraError("bracket: dimension mismatch")
    n = a.n
    C = np.zeros((n, n))
    if b.j == a.i:
        C[b.i - 1, a.j - 1] += 1.0
    if a.j == b.i:
        C[a.i - 1, b.j - 1] -= 1.0
    return AlgebraElement(coeffs=C)


def bracket_general(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Bracket of two fields A X and B X: the field (B A - A B) X."""
    if a.coeffs.shape != b.coeffs.shape:
        raise LieAlgebraError("bracket_general: dimension mismatch")
    return AlgebraElement(coeffs=b.coeffs @ a.coeffs - a.coeffs @ b.coeffs)


def matrix_rank(A: np.ndarray, rank_tol: float | None = None) -> int:
    """Numerical rank by row reduction with a pivot threshold.

    Default threshold is 1e-10 times the largest absolute entry; deterministic
    and free of factorization-library variation.
    """
    A = np.array(A, dtype=float)
    scale = np.abs(A).max(initial=0.0)
    if scale == 0.0:
        return 0
    tol = (1e-10 if rank_tol is None else rank_tol) * scale
    rows, cols = A.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        p = rank + int(np.argmax(np.abs(A[rank:, c])))
        if abs(A[p, c]) <= tol:
            continue
        A[[rank, p]] = A[[p, rank]]
        A[rank + 1:, c:] -= np.outer(A[rank + 1:, c] / A[rank, c], A[rank, c:])
        rank += 1
    return rank


def _closure_basis(g: Graph, rank_tol: float) -> list:
    """Orthonormal basis (as n x n matrices) of the commutator closure of the
    edge coefficient matrices, built by iterated sweeps."""
    n = g.n
    basis_vecs: list[np.ndarray] = []
    mats: list[np.ndarray] = []

    def try_add(M: np.ndarray) -> None:
        v = M.ravel().astype(float)
        thresh = max(rank_tol, rank_tol * np.linalg.norm(v))
        for _ in range(2):  # re-orthogonalize for stability
            for b in basis_vecs:
                v = v - (b @ v) * b
        nrm = np.linalg.norm(v)
        if nrm > thresh:
            v = v / nrm
            basis_vecs.append(v)
            mats.append(v.reshape(n, n))

    for (i, j) in sorted(g.edges):
        try_add(index_matrix(n, i, j))

    processed = 0
    while len(mats) < n * n:
        m = len(mats)
        if processed >= m:
            break
        for jdx in range(processed, m):
            for idx in range(jdx):
                A, B = mats[idx], mats[jdx]
                try_add(B @ A - A @ B)
                if len(mats) >= n * n:
                    break
            if len(mats) >= n * n:
                break
        processed = m
    return mats


def generated_algebra_dimension(g: Graph, rank_tol: float = 1e-10) -> int:
    """Dimension of the smallest matrix space containing the edge index
    matrices and closed under commutators."""
    return len(_closure_basis(g, rank_tol))


def closure_contains(g: Graph, C: np.ndarray, rank_tol: float = 1e-10) -> float:
    """Residual norm of C after projection onto the closure span."""
    v = np.asarray(C, dtype=float).ravel()
    for M in _closure_basis(g, rank_tol):
        b = M.ravel()
        v = v - (b @ v) * b
    return float(np.linalg.norm(v))


def check_feasible(g: Graph, T: np.ndarray) -> FeasibilityReport:
    """Existence gate for the boundary value problem: det(T) > 0 and connectivity."""
    T = np.asarray(T, dtype=float)
    if T.shape != (g.n, g.n):
        raise LieAlgebraError(f"target has shape {T.shape}, expected ({g.n},{g.n})")
    det = determinant(T)
    connected = is_connected(g)
    if det > 0.0 and connected:
        reason = "target has positive determinant and the graph is connected"
    elif det == 0.0:
        reason = "determinant is zero"
    elif det < 0.0:
        reason = f"determinant is negative ({det})"
    else:
        reason = "graph is not connected"
    if det > 0.0 and not connected:
        reason = "graph is not connected"
    return FeasibilityReport(determinant=float(det), connected=connected, reason=reason)


def controllable_at(g: Graph, X: np.ndarray, rank_tol: float = 1e-10) -> bool:
    """Local controllability of the transition dynamics at X: connected graph
    and full numerical rank of X."""
    X = np.asarray(X, dtype=float)
    if X.shape != (g.n, g.n):
        raise LieAlgebraError(f"state has shape {X.shape}, expected ({g.n},{g.n})")
    return is_connected(g) and matrix_rank(X, rank_tol) == g.n
