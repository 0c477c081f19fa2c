"""
Exact linear algebra over Lambda = Z/p^r.

Everything goes through a Smith normal form U A V = diag(p^v_0, ..., p^v_{s-1}, 0, ...)
computed by pivoting on an entry of minimal p-adic valuation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Lambda:
    """The coefficient ring Z/p^r."""

    p: int
    r: int = 1

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")

    @property
    def mod(self) -> int:
        return self.p**self.r


@dataclass
class SNF:
    U: np.ndarray
    V: np.ndarray
    vals: list  # valuations of the nonzero diagonal entries
    shape: tuple

    @property
    def rank(self):
        return len(self.vals)


def _vals(A, p, r):
    """Elementwise p-adic valuation, r for zero entries."""
    out = np.full(A.shape, r, dtype=np.int64)
    for v in range(r - 1, -1, -1):
        out[A % p ** (v + 1) != 0] = v
    return out


def snf(A, lam: Lambda) -> SNF:
    p, r, mod = lam.p, lam.r, lam.mod
    A = np.array(A, dtype=np.int64).reshape(np.shape(A)) % mod
    if A.ndim != 2:
        raise ValueError("matrix expected")
    m, n = A.shape
    U = np.eye(m, dtype=np.int64)
    V = np.eye(n, dtype=np.int64)
    vals = []
    for k in range(min(m, n)):
        sub = A[k:, k:]
        if not sub.any():
            break
        vv = _vals(sub, p, r)
        i, j = np.unravel_index(np.argmin(vv), vv.shape)
        v = int(vv[i, j])
        i, j = i + k, j + k
        if i != k:
            A[[k, i]] = A[[i, k]]
            U[[k, i]] = U[[i, k]]
        if j != k:
            A[:, [k, j]] = A[:, [j, k]]
            V[:, [k, j]] = V[:, [j, k]]
        unit = int(A[k, k]) // p**v
        inv = pow(unit, -1, mod)
        A[k] = (A[k] * inv) % mod
        U[k] = (U[k] * inv) % mod
        pv = p**v
        f = A[:, k] // pv
        f[k] = 0
        if f.any():
            A = (A - np.outer(f, A[k])) % mod
            U = (U - np.outer(f, U[k])) % mod
        g = A[k] // pv
        g[k] = 0
        if g.any():
            A = (A - np.outer(A[:, k], g)) % mod
            V = (V - np.outer(V[:, k], g)) % mod
        vals.append(v)
    return SNF(U, V, vals, (m, n))


def _as_matrix(A, rows=None):
    A = np.array(A, dtype=np.int64)
    if A.ndim == 1:
        A = A.reshape(-1, 1) if rows is None else A.reshape(rows, -1)
    return A


def kernel(A, lam: Lambda) -> np.ndarray:
    """Generators (as columns) of {x : A x = 0}."""
    A = _as_matrix(A)
    m, n = A.shape
    if m == 0:
        return np.eye(n, dtype=np.int64)
    s = snf(A, lam)
    cols = []
    for i, v in enumerate(s.vals):
        if v > 0:
            cols.append((s.V[:, i] * lam.p ** (lam.r - v)) % lam.mod)
    for i in range(s.rank, n):
        cols.append(s.V[:, i])
    if not cols:
        return np.zeros((n, 0), dtype=np.int64)
    return np.array(cols, dtype=np.int64).T % lam.mod


def solve(A, b, lam: Lambda, s: SNF | None = None):
    """Some x with A x = b, or None."""
    A = _as_matrix(A)
    b = np.array(b, dtype=np.int64).reshape(-1) % lam.mod
    m, n = A.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64) if not b.any() else None
    s = s or snf(A, lam)
    y = (s.U @ b) % lam.mod
    z = np.zeros(n, dtype=np.int64)
    for i, v in enumerate(s.vals):
        if y[i] % lam.p**v:
            return None
        z[i] = y[i] // lam.p**v
    if y[s.rank:].any():
        return None
    return (s.V @ z) % lam.mod


def in_span(A, b, lam: Lambda, s: SNF | None = None) -> bool:
    return solve(A, b, lam, s) is not None


def length(A, lam: Lambda) -> int:
    """log_p of the order of the column span of A."""
    A = _as_matrix(A)
    if A.size == 0:
        return 0
    return sum(lam.r - v for v in snf(A, lam).vals)


def span_contains(A, B, lam: Lambda) -> bool:
    """Column span of A contains that of B."""
    A, B = _as_matrix(A), _as_matrix(B)
    if B.shape[1] == 0:
        return True
    if A.shape[1] == 0:
        return not (B % lam.mod).any()
    s = snf(A, lam)
    return all(solve(A, B[:, j], lam, s) is not None for j in range(B.shape[1]))


def span_equal(A, B, lam: Lambda) -> bool:
    return span_contains(A, B, lam) and span_contains(B, A, lam)


def hstack(mats, rows: int) -> np.ndarray:
    mats = [_as_matrix(M) for M in mats if np.size(M)]
    if not mats:
        return np.zeros((rows, 0), dtype=np.int64)
    return np.hstack(mats)


def cokernel_invariants(A, lam: Lambda, rows: int | None = None) -> list:
    """Exponents e_i with Lambda^m / im A = prod Z/p^e_i (zero factors dropped)."""
    A = _as_matrix(A)
    m = A.shape[0] if rows is None else rows
    if A.shape[1] == 0:
        return [lam.r] * m
    s = snf(A, lam)
    out = [v for v in s.vals if v > 0]
    out += [lam.r] * (m - s.rank)
    return sorted(out)


def quotient_invariants(gens, relations, actions, lam: Lambda):
    """Submodule of Lambda^n of x with (g - 1) x in span(relations) for every g.

    Returns generator columns of that submodule (it contains the relations
    when the actions preserve them).
    """
    rel = _as_matrix(relations) if np.size(relations) else np.zeros((gens, 0), dtype=np.int64)
    n = gens
    if not actions:
        return np.eye(n, dtype=np.int64)
    if rel.shape[1]:
        s = snf(rel, lam)
        scale = np.array([lam.p ** (lam.r - v) for v in s.vals] + [1] * (n - s.rank), dtype=np.int64)
        proj = (scale[:, None] * s.U) % lam.mod
    else:
        proj = np.eye(n, dtype=np.int64)
    eye = np.eye(n, dtype=np.int64)
    blocks = [(proj @ ((np.array(g, dtype=np.int64) - eye) % lam.mod)) % lam.mod for g in actions]
    return kernel(np.vstack(blocks), lam)


def quotient_length(sub, relations, lam: Lambda) -> int:
    """Length of (span(sub) + span(relations)) / span(relations)."""
    sub = _as_matrix(sub)
    rel = _as_matrix(relations) if np.size(relations) else np.zeros((sub.shape[0], 0), dtype=np.int64)
    return length(hstack([sub, rel], sub.shape[0]), lam) - length(rel, lam)
