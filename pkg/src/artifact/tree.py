"""
The Bruhat-Tits tree of PGL2(F) in Iwasawa coordinates.

A vertex is a pair (m, u): the lattice class spanned by the columns of
[[pi^m, u], [0, 1]], with u a class in F / pi^m O.  u is stored as a sorted
tuple of (exponent, digit) pairs with nonzero digits and exponent < m.  The
distinguished end alpha_0 is m -> -infinity; x_plus = (0, ()) and
x_minus = (-1, ()).

GL2(F) acts by multiplying the column lattice and reducing it back to
Hermite form.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .localfield import (
    FElem,
    LocalFieldSpec,
    PrecisionError,
    f_add,
    f_from_int,
    f_inv,
    f_make,
    f_mul,
    f_neg,
)


class WindowError(ValueError):
    """A vertex falls outside the configured denominator window."""


@dataclass(frozen=True, order=True)
class Vertex:
    m: int
    u: tuple = ()

    def digit(self, exp: int) -> int:
        for e, d in self.u:
            if e == exp:
                return d
        return 0

    def __repr__(self):
        if not self.u:
            return f"({self.m},0)"
        ds = ",".join(f"{d}p^{e}" for e, d in self.u)
        return f"({self.m},{ds})"


X_PLUS = Vertex(0, ())
X_MINUS = Vertex(-1, ())


@dataclass(frozen=True, order=True)
class Edge:
    """An edge stored with its head (the endpoint farther from alpha_0) second."""

    tail: Vertex
    head: Vertex

    @property
    def vertices(self):
        return (self.tail, self.head)

    def __repr__(self):
        return f"{{{self.tail!r},{self.head!r}}}"


def make_edge(a: Vertex, b: Vertex) -> Edge:
    if b.m == a.m + 1 and parent(b) == a:
        return Edge(a, b)
    if a.m == b.m + 1 and parent(a) == b:
        return Edge(b, a)
    raise ValueError(f"{a} and {b} are not adjacent")


SIGMA = Edge(X_MINUS, X_PLUS)

INF = None  # label of the parent in P^1(k)


# ---------------------------------------------------------------------------
# combinatorics


def parent(v: Vertex) -> Vertex:
    return Vertex(v.m - 1, tuple((e, d) for e, d in v.u if e < v.m - 1))


def children(v: Vertex, q: int, B: int | None = None) -> list:
    if B is not None and v.m < -B:
        raise WindowError(f"children of {v} need digits below p^-{B}")
    return [Vertex(v.m + 1, v.u + ((v.m, c),) if c else v.u) for c in range(q)]


def neighbors(v: Vertex, q: int, B: int | None = None) -> list:
    """The parent followed by the q children."""
    return [parent(v)] + children(v, q, B)


def label(x: Vertex, y: Vertex):
    """Label in P^1(k) of the neighbour y of x, in the frame of x."""
    if y.m == x.m - 1:
        return INF
    return y.digit(x.m)


def neighbor_by_label(x: Vertex, lam) -> Vertex:
    if lam is INF:
        return parent(x)
    return Vertex(x.m + 1, x.u + ((x.m, lam),) if lam else x.u)


def distance(a: Vertex, b: Vertex) -> int:
    lo = min(a.m, b.m)
    da, db = dict(a.u), dict(b.u)
    keys = sorted(set(da) | set(db))
    for e in keys:
        if e >= lo:
            break
        if da.get(e, 0) != db.get(e, 0):
            lo = e
            break
    return (a.m - lo) + (b.m - lo)


def halftree_of(v: Vertex) -> str:
    if v.m >= 0 and all(e >= 0 for e, _ in v.u):
        return "plus"
    return "minus"


def oriented_head(mu: Edge) -> Vertex:
    return mu.head


def parity(v: Vertex) -> int:
    return distance(X_PLUS, v) % 2


def ball(center, e: int, q: int, mode: str = "symmetric", B: int | None = None) -> list:
    """Vertices within distance e of a vertex or edge (sorted).

    mode 'forward' returns the descendants (away from alpha_0) of depth <= e;
    for an edge the head is used as the root.
    """
    if mode == "forward":
        root = center.head if isinstance(center, Edge) else center
        out, layer = [root], [root]
        for _ in range(e):
            layer = [c for v in layer for c in children(v, q, B)]
            out.extend(layer)
        return sorted(out)
    if mode != "symmetric":
        raise ValueError(f"unknown mode {mode!r}")
    starts = list(center.vertices) if isinstance(center, Edge) else [center]
    seen = {s: 0 for s in starts}
    dq = deque(starts)
    while dq:
        v = dq.popleft()
        if seen[v] == e:
            continue
        for w in neighbors(v, q, B):
            if w not in seen:
                seen[w] = seen[v] + 1
                dq.append(w)
    return sorted(seen)


def edges_within(vertices) -> list:
    """All edges with both endpoints in the given vertex set."""
    vs = set(vertices)
    out = [Edge(parent(v), v) for v in vs if parent(v) in vs]
    return sorted(out)


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class GMatrix:
    """2x2 matrix over F with FElem entries a, b, c, d."""

    a: FElem
    b: FElem
    c: FElem
    d: FElem

    @property
    def spec(self):
        return self.a.spec

    @property
    def det(self) -> FElem:
        return f_add(f_mul(self.a, self.d), f_neg(f_mul(self.b, self.c)))

    def min_val(self) -> int:
        return min(x.val for x in (self.a, self.b, self.c, self.d))

    def __matmul__(self, other):
        return mat_mul(self, other)

    def __repr__(self):
        return f"GMatrix({self.a}, {self.b}, {self.c}, {self.d})"


def _entry(spec: LocalFieldSpec, x, prec: int) -> FElem:
    if isinstance(x, FElem):
        return x
    if isinstance(x, dict):
        return f_make(spec, x, prec)
    if isinstance(x, (int, Fraction)):
        if spec.mixed:
            return f_from_int(spec, x, prec)
        x = int(x)
        return f_make(spec, {0: x % spec.p}, prec)
    raise TypeError(f"cannot build a matrix entry from {x!r}")


def gmatrix(spec: LocalFieldSpec, rows, prec: int | None = None) -> GMatrix:
    """Matrix from [[a, b], [c, d]] with entries int/Fraction (Q_p), {exp: digit} dicts, or FElems."""
    prec = spec.N if prec is None else prec
    (a, b), (c, d) = rows
    return GMatrix(*(_entry(spec, x, prec) for x in (a, b, c, d)))


def mat_mul(g: GMatrix, h: GMatrix) -> GMatrix:
    m = f_mul
    return GMatrix(
        f_add(m(g.a, h.a), m(g.b, h.c)),
        f_add(m(g.a, h.b), m(g.b, h.d)),
        f_add(m(g.c, h.a), m(g.d, h.c)),
        f_add(m(g.c, h.b), m(g.d, h.d)),
    )


def mat_inv(g: GMatrix) -> GMatrix:
    di = f_inv(g.det)
    return GMatrix(f_mul(g.d, di), f_neg(f_mul(g.b, di)), f_neg(f_mul(g.c, di)), f_mul(g.a, di))


def identity(spec, prec=None) -> GMatrix:
    return gmatrix(spec, [[1, 0], [0, 1]], prec)


def t_matrix(spec, power: int = 1, prec=None) -> GMatrix:
    """diag(pi^power, 1)."""
    prec = spec.N if prec is None else prec
    return GMatrix(f_make(spec, {power: 1}, prec), FElem(spec, prec), FElem(spec, prec), f_make(spec, {0: 1}, prec))


def n_matrix(spec, b, prec=None) -> GMatrix:
    """Upper unipotent [[1, b], [0, 1]]; b an FElem, int, Fraction, or digit dict."""
    return gmatrix(spec, [[1, b], [0, 1]], prec)


def nminus_matrix(spec, c, prec=None) -> GMatrix:
    return gmatrix(spec, [[1, 0], [c, 1]], prec)


def w_matrix(spec, prec=None) -> GMatrix:
    return gmatrix(spec, [[0, 1], [1, 0]], prec)


@lru_cache(maxsize=200000)
def _u_felem(spec: LocalFieldSpec, u: tuple, prec: int) -> FElem:
    return f_make(spec, dict(u), prec)


def frame(spec: LocalFieldSpec, v: Vertex, prec: int | None = None) -> GMatrix:
    """h_v = [[pi^m, u], [0, 1]]: sends x_plus to v and the child with label c to the child with label c."""
    prec = spec.N if prec is None else prec
    return GMatrix(f_make(spec, {v.m: 1}, prec), _u_felem(spec, v.u, prec), FElem(spec, prec), f_make(spec, {0: 1}, prec))


def edge_frame(spec: LocalFieldSpec, eta: Edge, prec: int | None = None) -> GMatrix:
    """Frame of the head: sends sigma to eta with x_plus to the head."""
    return frame(spec, eta.head, prec)


# ---------------------------------------------------------------------------
# the action


@dataclass(frozen=True)
class Tree:
    """Bundle of a field spec and the denominator window B."""

    spec: LocalFieldSpec
    B: int = 8

    @property
    def q(self) -> int:
        return self.spec.q

    def neighbors(self, v):
        return neighbors(v, self.q, self.B)

    def children(self, v):
        return children(v, self.q, self.B)

    def ball(self, center, e, mode="symmetric"):
        return ball(center, e, self.q, mode, self.B)

    def act(self, g, v):
        return act(g, v, self.B)

    def check(self, v: Vertex):
        if any(e < -self.B for e, _ in v.u):
            raise WindowError(f"{v} lies outside the window B={self.B}")
        return v


def _val_known(x: FElem):
    return None if x.is_zero else x.val


def act(g: GMatrix, v: Vertex, B: int | None = None) -> Vertex:
    """g . v via the column lattice [[pi^m, u], [0, 1]]."""
    spec = g.spec
    V = max(0, -g.min_val())
    D = distance(X_PLUS, v)
    if spec.N < D + 2 * V + 2:
        raise PrecisionError(f"precision {spec.N} too small for depth {D} and denominators {V}")
    prec = spec.N + max(0, -v.m) + max((-e for e, _ in v.u), default=0) + D
    pim = f_make(spec, {v.m: 1}, prec + v.m)
    u = _u_felem(spec, v.u, prec)
    X1 = f_mul(g.a, pim)
    Y = f_add(f_mul(g.a, u), g.b)
    Z1 = f_mul(g.c, pim)
    Z2 = f_add(f_mul(g.c, u), g.d)
    v1, v2 = _val_known(Z1), _val_known(Z2)
    if v2 is not None and (v1 is None and v2 <= Z1.val or v1 is not None and v2 <= v1):
        y, z = Y, Z2
    elif v1 is not None and (v2 is None and v1 <= Z2.val or v2 is not None and v1 < v2):
        y, z = X1, Z1
    else:
        raise PrecisionError("cannot determine the pivot of the reduced lattice")
    det = g.det
    if det.is_zero:
        raise PrecisionError("determinant indistinguishable from zero")
    m2 = det.val + v.m - 2 * z.val
    u2 = f_mul(y, f_inv(z))
    digs = u2.digits_to(m2)
    w = Vertex(m2, tuple(sorted(digs.items())))
    if B is not None and any(e < -B for e, _ in w.u):
        raise WindowError(f"image {w} lies outside the window B={B}")
    return w


def act_edge(g: GMatrix, eta: Edge, B: int | None = None) -> Edge:
    return make_edge(act(g, eta.tail, B), act(g, eta.head, B))


def mobius(k, g, lam):
    """Action of g = ((a, b), (c, d)) in GL2 of the residue field k on a label."""
    (a, b), (c, d) = g
    if lam is INF:
        num, den = a, c
    else:
        num = k.add(k.mul(a, lam), b)
        den = k.add(k.mul(c, lam), d)
    if den == 0:
        return INF
    return k.mul(num, k.inv(den))
