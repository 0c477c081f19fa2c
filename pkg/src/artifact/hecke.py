"""
The pro-p Iwahori Hecke algebra at level e and the Hecke operator on compact inductions.

Double cosets are taken modulo the centre (all modules here have trivial
central character), so membership in U^(e)_sigma is tested up to scalars.
U g U is split into right cosets U g_j by letting U act on the left cosets
of U g^-1 U; the stored list holds the x_j = g_j^-1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .coeff import (
    CoeffSystem,
    FinMod,
    LocalRep,
    invariants,
    local_gl2,
    steinberg_rep,
    transport,
    trivial_rep,
    unipotent,
)
from .linalg import Lambda
from .localfield import LocalFieldSpec
from .locaut import MatrixMap, hat_u_generators, in_U_sigma, iwahori_unipotent_gens
from .tree import (
    INF,
    SIGMA,
    X_MINUS,
    X_PLUS,
    GMatrix,
    act,
    ball,
    distance,
    frame,
    gmatrix,
    label,
    mat_inv,
    mat_mul,
    neighbors,
)


class WindowExceeded(ValueError):
    pass


def _dist_sigma(v):
    return min(distance(v, X_PLUS), distance(v, X_MINUS))


def _reach(g: GMatrix) -> int:
    """Distance by which g moves sigma."""
    return max(_dist_sigma(act(g, X_PLUS)), _dist_sigma(act(g, X_MINUS)))


@dataclass
class DoubleCoset:
    rep: GMatrix
    e: int
    inverses: list  # x_j = g_j^-1 with U g U the disjoint union of the U g_j
    orbit_sizes: dict = field(default_factory=dict)

    @property
    def reps(self) -> list:
        return [mat_inv(x) for x in self.inverses]

    def __len__(self):
        return len(self.inverses)

    def contains(self, x: GMatrix) -> bool:
        return any(in_U_sigma(mat_mul(x, xj), self.e) for xj in self.inverses)


def coset_decompose(g: GMatrix, e: int, jmax: int | None = None, cap: int = 4096) -> DoubleCoset:
    """Right coset representatives of U g U, U = U^(e)_sigma up to the centre."""
    spec = g.spec
    jmax = e + _reach(g) + 2 if jmax is None else jmax
    gens = iwahori_unipotent_gens(spec, e, jmax)
    start = mat_inv(g)
    xs, frontier = [start], [start]
    while frontier:
        new = []
        for x in frontier:
            for u in gens:
                y = mat_mul(u, x)
                if not any(in_U_sigma(mat_mul(mat_inv(z), y), e) for z in xs):
                    xs.append(y)
                    new.append(y)
                    if len(xs) > cap:
                        raise WindowExceeded("too many cosets")
        frontier = new
    sizes = {repr(z): len({act(x, z) for x in xs}) for z in (X_PLUS, X_MINUS)}
    return DoubleCoset(g, e, xs, sizes)


def check_decomposition(C: DoubleCoset, jmax: int | None = None) -> dict:
    """Disjointness and closure under left multiplication by generators of U."""
    spec = C.rep.spec
    xs = C.inverses
    disjoint = all(
        not in_U_sigma(mat_mul(mat_inv(xs[i]), xs[j]), C.e) for i in range(len(xs)) for j in range(i + 1, len(xs))
    )
    jmax = C.e + _reach(C.rep) + 2 if jmax is None else jmax
    closed = all(
        any(in_U_sigma(mat_mul(mat_inv(z), mat_mul(u, x)), C.e) for z in xs)
        for x in xs
        for u in iwahori_unipotent_gens(spec, C.e, jmax)
    )
    return {"disjoint": disjoint, "closed": closed, "count": len(xs), "ok": disjoint and closed}


# ---------------------------------------------------------------------------
# the algebra


@dataclass
class HeckeElement:
    terms: list  # (DoubleCoset, integer coefficient)

    def coefficient(self, g: GMatrix) -> int:
        return sum(c for C, c in self.terms if C.contains(g))


def hecke_element(*triples) -> HeckeElement:
    """From (coefficient, GMatrix, e) triples."""
    return HeckeElement([(coset_decompose(g, e), c) for c, g, e in triples])


def convolve(A: HeckeElement, B: HeckeElement) -> HeckeElement:
    """Structure constants by counting: v.A.B = sum over pairs (a_i b_j)^-1 v."""
    found: list = []
    counts: list = []
    for CA, ca in A.terms:
        for CB, cb in B.terms:
            for a in CA.reps:
                for b in CB.reps:
                    x = mat_mul(a, b)
                    for idx, C in enumerate(found):
                        if C.contains(x):
                            counts[idx] += ca * cb
                            break
                    else:
                        found.append(coset_decompose(x, CA.e))
                        counts.append(ca * cb)
    terms = []
    for C, n in zip(found, counts):
        if n % len(C):
            raise AssertionError("coset count not divisible by the double coset size")
        if n:
            terms.append((C, n // len(C)))
    return HeckeElement(terms)


def describe(H: HeckeElement) -> list:
    return sorted((c, len(C), repr(C.rep)) for C, c in H.terms)


# ---------------------------------------------------------------------------
# right action on H0 of a window


def _image_radius(xs, R, q) -> int:
    verts = ball(SIGMA, R, q)
    return max(_dist_sigma(act(x, v)) for x in xs for v in verts)


def u_invariant(F: CoeffSystem, v: np.ndarray, R: int, e: int | None = None) -> bool:
    e = F.e if e is None else e
    verts = ball(SIGMA, R, F.q)
    d = F.boundary_matrix(verts)
    for g in iwahori_unipotent_gens(F.spec, e, R + 1):
        A = transport(F, MatrixMap(g), verts, verts)
        if not linalg.in_span(d, (A @ v - v) % F.lam.mod, F.lam):
            return False
    return True


def embed(F: CoeffSystem, v: np.ndarray, R: int, R2: int) -> np.ndarray:
    small, big = ball(SIGMA, R, F.q), ball(SIGMA, R2, F.q)
    return (transport(F, lambda x: x, small, big) @ v) % F.lam.mod


def hecke_act(F: CoeffSystem, v: np.ndarray, R: int, C: DoubleCoset, check: bool = True):
    """v . UgU = sum_j g_j^-1 v for a U-invariant class v of H0(Z^(R)); returns (w, R2)."""
    if check and not u_invariant(F, v, R, C.e):
        raise ValueError("v is not U-invariant")
    R2 = _image_radius(C.inverses, R, F.q)
    if R2 > F.D:
        raise WindowExceeded(f"result needs radius {R2} > {F.D}")
    R2 = max(R2, R)
    src, dst = ball(SIGMA, R, F.q), ball(SIGMA, R2, F.q)
    w = np.zeros(sum(F.vdim[x] for x in dst), dtype=np.int64)
    for x in C.inverses:
        w = (w + transport(F, MatrixMap(x), src, dst) @ v) % F.lam.mod
    return w, R2


def hecke_act_element(F: CoeffSystem, v, R, H: HeckeElement):
    parts = [(hecke_act(F, v, R, C, check=False), c) for C, c in H.terms]
    R2 = max([R] + [r for (_, r), _ in parts])
    w = np.zeros(sum(F.vdim[x] for x in ball(SIGMA, R2, F.q)), dtype=np.int64)
    for (u, r), c in parts:
        w = w + c * embed(F, u, r, R2)
    return w % F.lam.mod, R2


def same_class(F: CoeffSystem, a, Ra, b, Rb) -> bool:
    R = max(Ra, Rb)
    verts = ball(SIGMA, R, F.q)
    d = F.boundary_matrix(verts)
    return linalg.in_span(d, (embed(F, a, Ra, R) - embed(F, b, Rb, R)) % F.lam.mod, F.lam)


def hat_invariant(F: CoeffSystem, v, R) -> bool:
    """Membership of the class of v in H0(Z^(R))^(hat-U gens)."""
    verts = ball(SIGMA, R, F.q)
    d = F.boundary_matrix(verts)
    for a in hat_u_generators(F.spec, F.e, R + 1):
        A = F.chain_action(a, verts)[0]
        if not linalg.in_span(d, (A @ v - v) % F.lam.mod, F.lam):
            return False
    return True


def module_law(F: CoeffSystem, v, R, A: HeckeElement, B: HeckeElement) -> bool:
    """(v.A).B = v.(A*B) on classes."""
    vA, R1 = hecke_act_element(F, v, R, A)
    lhs, R2 = hecke_act_element(F, vA, R1, B)
    rhs, R3 = hecke_act_element(F, v, R, convolve(A, B))
    return same_class(F, lhs, R2, rhs, R3)


# ---------------------------------------------------------------------------
# compact induction and T


@dataclass
class HeckeOperatorSpec:
    """T on ind W: on G(x) -> G(y) the map f -> M_{x,y} f, M_{x_plus,x_minus} = seed.

    G(x) = W in the label coordinates of x; M_{x,y} is the seed moved by any
    g with g x_plus = x and g x_minus = y.
    """

    spec: LocalFieldSpec
    rep: LocalRep
    seed: np.ndarray

    @property
    def lam(self) -> Lambda:
        return self.rep.lam


def trivial_operator(spec: LocalFieldSpec, lam: Lambda) -> HeckeOperatorSpec:
    return HeckeOperatorSpec(spec, trivial_rep(spec.k, lam), np.eye(1, dtype=np.int64))


def coinvariant_functionals(rep: LocalRep, group) -> np.ndarray:
    """Rows phi with phi (n - 1) = 0 for n in group."""
    I = np.eye(rep.dim, dtype=np.int64)
    stacked = np.hstack([((rep.rho(n) - I) % rep.lam.mod) for n in group])
    return linalg.kernel(stacked.T, rep.lam).T


def steinberg_operator(spec: LocalFieldSpec, lam: Lambda) -> HeckeOperatorSpec:
    """Seed: W -> W_N(infinity) (one-dimensional) -> W^N(0) inside G(x_minus)."""
    k = spec.k
    rep = steinberg_rep(k, lam)
    phi = coinvariant_functionals(rep, unipotent(k, INF))
    col = rep.invariants_of(unipotent(k, _label_of_plus()))
    if phi.shape[0] != 1 or col.shape[1] < 1:
        raise ValueError("unexpected coinvariant dimension")
    seed = np.outer(col[:, 0], phi[0]) % lam.mod
    op = HeckeOperatorSpec(spec, rep, seed)
    if not check_seed(op):
        raise ValueError("Steinberg seed is not equivariant for this field")
    return op


def _label_of_plus():
    return label(X_MINUS, X_PLUS)


def _edge_carrier(spec, x, y) -> GMatrix:
    """Some g with g x_plus = x and g x_minus = y."""
    pi_swap = gmatrix(spec, [[0, 1], [{1: 1}, 0]])
    for g in (frame(spec, x), mat_mul(frame(spec, y), pi_swap), mat_mul(frame(spec, x), pi_swap)):
        if act(g, X_PLUS) == x and act(g, X_MINUS) == y:
            return g
    raise AssertionError(f"no carrier for {x}, {y}")


def check_seed(op: HeckeOperatorSpec) -> bool:
    """seed rho_plus(g) = rho_minus(g) seed for generators of the edge stabilizer."""
    spec, rep, mod = op.spec, op.rep, op.lam.mod
    gens = list(iwahori_unipotent_gens(spec, 1, 2))
    for z in range(2, spec.q):
        gens += [gmatrix(spec, [[{0: z}, 0], [0, 1]]), gmatrix(spec, [[1, 0], [0, {0: z}]])]
    k = spec.k
    for g in gens:
        f = MatrixMap(g)
        lhs = op.seed @ rep.rho(local_gl2(k, f, X_PLUS))
        rhs = rep.rho(local_gl2(k, f, X_MINUS)) @ op.seed
        if not np.array_equal(lhs % mod, rhs % mod):
            return False
    return True


def edge_operator(op: HeckeOperatorSpec, x, y) -> np.ndarray:
    k, rep, mod = op.spec.k, op.rep, op.lam.mod
    g = MatrixMap(_edge_carrier(op.spec, x, y))
    to_y = rep.rho(local_gl2(k, g, X_MINUS))
    inv = rep.rho(_gl2_inverse(k, local_gl2(k, g, X_PLUS)))
    return (to_y @ op.seed @ inv) % mod


def _gl2_inverse(k, g):
    (a, b), (c, d) = g
    det_inv = k.inv(k.sub(k.mul(a, d), k.mul(b, c)))
    return ((k.mul(d, det_inv), k.neg(k.mul(b, det_inv))), (k.neg(k.mul(c, det_inv)), k.mul(a, det_inv)))


def _offsets(verts, dim):
    return {v: i * dim for i, v in enumerate(sorted(verts))}


def t_matrix(op: HeckeOperatorSpec, R: int) -> np.ndarray:
    """T from sections supported on Z^(R)(sigma) to sections on Z^(R+1)(sigma)."""
    q, n = op.spec.q, op.rep.dim
    src, dst = ball(SIGMA, R, q), ball(SIGMA, R + 1, q)
    so, do = _offsets(src, n), _offsets(dst, n)
    T = np.zeros((len(dst) * n, len(src) * n), dtype=np.int64)
    for x in src:
        for y in neighbors(x, q):
            T[do[y]:do[y] + n, so[x]:so[x] + n] += edge_operator(op, x, y)
    return T % op.lam.mod


def apply_T(op: HeckeOperatorSpec, f: dict, D: int) -> dict:
    """T f for a section (vertex -> vector) supported strictly inside Z^(D)(sigma)."""
    q = op.spec.q
    if any(_dist_sigma(x) >= D for x in f):
        raise WindowExceeded("support touches the window boundary")
    out: dict = {}
    for x, val in f.items():
        for y in neighbors(x, q):
            out[y] = (out.get(y, 0) + edge_operator(op, x, y) @ np.asarray(val)) % op.lam.mod
    return {y: v for y, v in out.items() if np.any(v)}


def section_action(op: HeckeOperatorSpec, fn, R: int) -> np.ndarray:
    """A tree automorphism acting on sections over Z^(R)(sigma) through local permutations."""
    q, n, k = op.spec.q, op.rep.dim, op.spec.k
    verts = ball(SIGMA, R, q)
    off = _offsets(verts, n)
    A = np.zeros((len(verts) * n, len(verts) * n), dtype=np.int64)
    for x in verts:
        y = fn(x)
        A[off[y]:off[y] + n, off[x]:off[x] + n] = op.rep.rho(local_gl2(k, fn, x))
    return A % op.lam.mod


def _shift(op: HeckeOperatorSpec, ev: int, R: int) -> np.ndarray:
    """(T - ev) from Z^(R) to Z^(R+1)."""
    q, n = op.spec.q, op.rep.dim
    src, dst = ball(SIGMA, R, q), ball(SIGMA, R + 1, q)
    so, do = _offsets(src, n), _offsets(dst, n)
    M = t_matrix(op, R)
    for x in src:
        for i in range(n):
            M[do[x] + i, so[x] + i] -= ev
    return M % op.lam.mod


def kernel_window_check(op: HeckeOperatorSpec, ev: int, eta, D: int) -> bool:
    """No nonzero b on Z^(D-1) has (T - ev) b supported on the edge eta."""
    if D < 3:
        raise ValueError("window depth must be at least 3")
    q, n = op.spec.q, op.rep.dim
    M = _shift(op, ev, D - 1)
    dst = ball(SIGMA, D, q)
    do = _offsets(dst, n)
    keep = [do[x] + i for x in dst if x not in eta.vertices for i in range(n)]
    K = linalg.kernel(M[keep], op.lam)
    return linalg.length(K, op.lam) == 0 if K.size else True


def packet_invariants(op: HeckeOperatorSpec, ev: int, D: int) -> dict:
    """hat-U^(1)_sigma-invariants of sections on Z^(D-1) modulo (T - ev) of sections on Z^(D-2).

    The expected value is the length of W^(U_sigma) at x_plus plus that at x_minus.
    """
    if D < 3:
        raise ValueError("window depth must be at least 3")
    spec, lam = op.spec, op.lam
    R = D - 1
    rel = _shift(op, ev, R - 1)
    gens = hat_u_generators(spec, 1, D)
    mats = [section_action(op, a, R) for a in gens]
    M = FinMod(lam, rel.shape[0], rel)
    inv = invariants(M, mats)
    k = spec.k
    expected = linalg.length(op.rep.invariants_of(unipotent(k, INF)), lam) + linalg.length(
        op.rep.invariants_of(unipotent(k, _label_of_plus())), lam
    )
    return {"length": inv.length(), "expected": expected, "basis": inv.basis, "ok": inv.length() == expected}


def commutes_with_hat(op: HeckeOperatorSpec, R: int, gens=None) -> bool:
    """a T = T a on sections over Z^(R) for hat-U generators tabulated at depth R+2."""
    gens = hat_u_generators(op.spec, 1, R + 2) if gens is None else gens
    T = t_matrix(op, R)
    mod = op.lam.mod
    for a in gens:
        lhs = section_action(op, a, R + 1) @ T
        rhs = T @ section_action(op, a, R)
        if not np.array_equal(lhs % mod, rhs % mod):
            return False
    return True
