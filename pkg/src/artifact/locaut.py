"""
Finite-depth models of locally algebraic tree automorphisms.

Automorphisms are handled in two forms: global tree maps (callables on
vertices, built from matrices, half-tree cut-offs and subtree translations)
and DepthAut, the permutation table of such a map on a finite ball.  The
iterated semidirect products H_K^(e) live here as HElem, together with their
action on the ends of the half-tree X_+, the boundary map and the trace map.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

from .localfield import (
    ExtensionData,
    LocalFieldSpec,
    PrecisionError,
    embed_digits,
    f_add,
    f_inv,
    f_make,
    f_mul,
    f_neg,
    trace_digits,
)
from .tree import (
    SIGMA,
    X_MINUS,
    X_PLUS,
    Edge,
    GMatrix,
    Vertex,
    WindowError,
    act,
    ball,
    distance,
    edges_within,
    frame,
    gmatrix,
    make_edge,
    mat_inv,
    mat_mul,
    neighbors,
    parent,
)


class CapExceeded(RuntimeError):
    """A closure or enumeration grew beyond its configured cap."""


FLAVORS = ("hatU_sigma", "hatN0", "stab_sigma")


# ---------------------------------------------------------------------------
# tree maps


@dataclass(frozen=True)
class MatrixMap:
    g: GMatrix

    def __call__(self, v):
        return act(self.g, v)


@dataclass(frozen=True)
class Conjugate:
    """v -> h(inner(h^-1 v))."""

    h: GMatrix
    inner: object

    def __call__(self, v):
        hi = _inverse_cached(self.h)
        return act(self.h, self.inner(act(hi, v)))


@lru_cache(maxsize=4096)
def _inverse_cached(h):
    return mat_inv(h)


@dataclass(frozen=True)
class HalfTreeMap:
    """inner on the half-tree containing z cut off at the edge {z, w}; identity elsewhere."""

    inner: object
    z: Vertex
    w: Vertex

    def __call__(self, v):
        if distance(v, self.z) < distance(v, self.w):
            return self.inner(v)
        return v


def _below(z: Vertex, v: Vertex) -> bool:
    """z lies on the ray from alpha_0 to v."""
    return v.m >= z.m and tuple((e, d) for e, d in v.u if e < z.m) == z.u


def u_add(spec: LocalFieldSpec, u: tuple, x: dict, m: int) -> tuple:
    """(u + x) mod pi^m as a sorted digit tuple."""
    lo = min([e for e, _ in u] + list(x) + [0])
    prec = max(m, lo + 1)
    s = f_add(f_make(spec, dict(u), prec), f_make(spec, x, prec))
    return tuple(sorted(s.digits_to(m).items()))


@dataclass(frozen=True)
class SubtreeShift:
    """Translate the descendants of z by x (a digit dict): the elementary generators of the hat-N groups."""

    spec: LocalFieldSpec
    z: Vertex
    x: tuple  # sorted (exp, digit) pairs

    def __call__(self, v):
        if not _below(self.z, v):
            return v
        return Vertex(v.m, u_add(self.spec, v.u, dict(self.x), v.m))


@dataclass(frozen=True)
class Composite:
    """Composition of tree maps, applied right to left."""

    maps: tuple

    def __call__(self, v):
        for f in reversed(self.maps):
            v = f(v)
        return v


# ---------------------------------------------------------------------------
# permutation tables on balls


@lru_cache(maxsize=None)
def domain(q: int, D: int, root) -> tuple:
    """The ball a DepthAut is tabulated on: Z^(D)(sigma) for an edge root, the forward ball otherwise."""
    if isinstance(root, Edge):
        return tuple(ball(root, D, q))
    return tuple(ball(root, D, q, "forward"))


@lru_cache(maxsize=None)
def domain_index(q: int, D: int, root) -> dict:
    return {v: i for i, v in enumerate(domain(q, D, root))}


@dataclass(frozen=True)
class DepthAut:
    """A tree automorphism truncated to a ball of radius D.

    perm[i] is the index of the image of the i-th vertex of the domain.
    """

    flavor: str
    e: int
    D: int
    q: int
    root: object
    perm: tuple

    @property
    def verts(self):
        return domain(self.q, self.D, self.root)

    def __call__(self, v: Vertex) -> Vertex:
        i = domain_index(self.q, self.D, self.root).get(v)
        if i is None:
            raise WindowError(f"{v} is outside the depth-{self.D} ball")
        return self.verts[self.perm[i]]

    def _check_compatible(self, other):
        if (self.D, self.q, self.root) != (other.D, other.q, other.root):
            raise ValueError("DepthAut composition needs equal depth and domain; use restrict()")

    def compose(self, other: "DepthAut") -> "DepthAut":
        """self after other."""
        self._check_compatible(other)
        flavor = self.flavor if self.flavor == other.flavor else "stab_sigma"
        perm = tuple(self.perm[j] for j in other.perm)
        return DepthAut(flavor, min(self.e, other.e), self.D, self.q, self.root, perm)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self) -> "DepthAut":
        inv = [0] * len(self.perm)
        for i, j in enumerate(self.perm):
            inv[j] = i
        return DepthAut(self.flavor, self.e, self.D, self.q, self.root, tuple(inv))

    def restrict(self, D2: int) -> "DepthAut":
        if D2 > self.D:
            raise ValueError("cannot extend a truncation")
        small = domain(self.q, D2, self.root)
        idx = domain_index(self.q, D2, self.root)
        try:
            perm = tuple(idx[self(v)] for v in small)
        except KeyError:
            raise WindowError("automorphism does not preserve the smaller ball") from None
        return DepthAut(self.flavor, self.e, D2, self.q, self.root, perm)

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.perm))

    def to_dict(self) -> dict:
        vs = self.verts
        return {
            "flavor": self.flavor,
            "e": self.e,
            "D": self.D,
            "table": {_vkey(v): _vkey(vs[j]) for v, j in zip(vs, self.perm)},
        }


def _vkey(v: Vertex) -> str:
    return f"{v.m}:" + ",".join(f"{e}.{d}" for e, d in v.u)


def identity_aut(flavor, e, D, q, root=None) -> DepthAut:
    root = _default_root(flavor) if root is None else root
    return DepthAut(flavor, e, D, q, root, tuple(range(len(domain(q, D, root)))))


def _default_root(flavor):
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    return X_PLUS if flavor == "hatN0" else SIGMA


def tabulate(fn, flavor: str, e: int, D: int, q: int, root=None, check: bool = True) -> DepthAut:
    """DepthAut of a tree map on the ball of its flavor."""
    root = _default_root(flavor) if root is None else root
    verts = domain(q, D, root)
    idx = domain_index(q, D, root)
    perm = []
    for v in verts:
        w = fn(v)
        j = idx.get(w)
        if j is None:
            raise WindowError(f"image {w} of {v} leaves the ball")
        perm.append(j)
    a = DepthAut(flavor, e, D, q, root, tuple(perm))
    if check:
        validate(a)
    return a


def validate(a: DepthAut):
    """Bijectivity, adjacency preservation and the flavor invariant."""
    if sorted(a.perm) != list(range(len(a.perm))):
        raise ValueError("table is not a bijection")
    vs = a.verts
    for v in vs:
        pv = parent(v)
        if pv in domain_index(a.q, a.D, a.root):
            if distance(a(v), a(pv)) != 1:
                raise ValueError(f"edge {pv}-{v} is not preserved")
    if a.flavor == "hatU_sigma" and (a(X_PLUS) != X_PLUS or a(X_MINUS) != X_MINUS):
        raise ValueError("hatU_sigma elements fix x_plus and x_minus")
    if a.flavor == "hatN0" and any(a(v).m != v.m for v in vs):
        raise ValueError("hatN0 elements preserve levels")


def closure(perms, cap: int = 200000) -> set:
    """All products of the given permutations (breadth-first)."""
    perms = [tuple(p) for p in perms]
    if not perms:
        return set()
    n = len(perms[0])
    ident = tuple(range(n))
    seen = {ident}
    dq = deque([ident])
    while dq:
        h = dq.popleft()
        for g in perms:
            gh = tuple(g[i] for i in h)
            if gh not in seen:
                seen.add(gh)
                if len(seen) > cap:
                    raise CapExceeded(f"closure exceeds {cap} elements")
                dq.append(gh)
    return seen


def closure_image_order(gens, m: int, cap: int = 200000) -> int:
    """Order of the group generated by the restrictions of gens to the radius-m ball."""
    gens = list(gens)
    if not gens:
        return 1
    if any(g.D < m for g in gens):
        raise ValueError("m exceeds the depth of a generator")
    return len(closure([g.restrict(m).perm for g in gens], cap))


def is_p_power(n: int, p: int) -> bool:
    while n % p == 0:
        n //= p
    return n == 1


# ---------------------------------------------------------------------------
# matrix generators


def _j_range(lo, hi):
    return range(lo, hi + 1)


def iwahori_unipotent_gens(spec: LocalFieldSpec, e: int, jmax: int, b_shift: int = -1) -> list:
    """Topological generators of U^(e)_sigma (b_shift=-1) or U^(e)_{x_plus} (b_shift=0), up to pi^jmax."""
    out = []
    for c in spec.k.prime_basis():
        for j in _j_range(e + b_shift, jmax):
            out.append(gmatrix(spec, [[1, {j: c}], [0, 1]]))
        for j in _j_range(e, jmax):
            out.append(gmatrix(spec, [[1, 0], [{j: c}, 1]]))
            out.append(gmatrix(spec, [[{0: 1, j: c}, 0], [0, 1]]))
    return out


def in_U_sigma(g: GMatrix, e: int) -> bool:
    """Membership of g in Z * U^(e)_sigma (entries compared after scaling d to 1)."""
    if g.d.is_zero:
        return False
    inv = f_inv(g.d)
    a, b, c = (f_mul(x, inv) for x in (g.a, g.b, g.c))
    am1 = f_add(a, f_neg(f_make(g.spec, {0: 1}, a.prec)))
    return am1.val >= max(e, 1) and b.val >= e - 1 and c.val >= e


def hat_u_generators(spec: LocalFieldSpec, e: int, D: int, pieces: bool = True) -> list:
    """Generators of the image of the hat-U^(e)_sigma group on Z^(D)(sigma).

    Global generators of U^(e)_sigma plus, for every vertex z close enough to
    sigma to matter, the elements acting like an element of U^(e)_z on the
    half-tree behind z and trivially elsewhere.
    """
    q = spec.q
    maps = [MatrixMap(g) for g in iwahori_unipotent_gens(spec, e, D + 1)]
    if pieces:
        for z in ball(SIGMA, max(D - e - 1, -1), q) if D - e - 1 >= 0 else []:
            if z == X_PLUS:
                w = X_MINUS
            elif z == X_MINUS:
                w = X_PLUS
            else:
                w = min(neighbors(z, q), key=lambda y: min(distance(y, X_PLUS), distance(y, X_MINUS)))
            dz = min(distance(z, X_PLUS), distance(z, X_MINUS))
            h = frame(spec, z)
            for g in iwahori_unipotent_gens(spec, e, D - dz + 1, b_shift=0):
                maps.append(HalfTreeMap(Conjugate(h, MatrixMap(g)), z, w))
    return _dedupe([tabulate(f, "hatU_sigma", e, D, q) for f in maps])


def hat_n0_generators(spec: LocalFieldSpec, e: int, D: int, root: Vertex = X_PLUS) -> list:
    """Elementary generators of the hat-N_0^(e) image on the forward ball of root."""
    q = spec.q
    maps = []
    for z in ball(root, D - 1, q, "forward") if D >= 1 else []:
        k = z.m
        for j in range(max(k + e - 1, 0), D + root.m):
            for c in spec.k.prime_basis():
                maps.append(SubtreeShift(spec, z, ((j, c),)))
    return _dedupe([tabulate(f, "hatN0", e, D, q, root) for f in maps])


def _dedupe(auts):
    seen, out = set(), []
    for a in auts:
        if a.perm not in seen and not a.is_identity():
            seen.add(a.perm)
            out.append(a)
    return out


# ---------------------------------------------------------------------------
# local algebraicity


@lru_cache(maxsize=None)
def stab_table(spec: LocalFieldSpec, e: int, cap: int = 500000) -> dict:
    """Image of Stab_G(sigma) in Sym(Z^(e)(sigma)), as permutation -> matrix."""
    q = spec.q
    verts = domain(q, e, SIGMA)
    gens = list(iwahori_unipotent_gens(spec, 1, e + 2, b_shift=-1))
    for z in range(2, q):
        gens.append(gmatrix(spec, [[{0: z}, 0], [0, 1]]))
        gens.append(gmatrix(spec, [[1, 0], [0, {0: z}]]))
    gens.append(gmatrix(spec, [[0, 1], [{1: 1}, 0]]))
    pg = [(tabulate(MatrixMap(g), "stab_sigma", e, e, q, check=False).perm, g) for g in gens]
    ident = tuple(range(len(verts)))
    table = {ident: gmatrix(spec, [[1, 0], [0, 1]])}
    dq = deque([ident])
    while dq:
        h = dq.popleft()
        for p, g in pg:
            gh = tuple(p[i] for i in h)
            if gh not in table:
                table[gh] = mat_mul(g, table[h])
                if len(table) > cap:
                    raise CapExceeded("stabilizer image too large")
                dq.append(gh)
    return table


def is_locally_algebraic(a: DepthAut, spec: LocalFieldSpec, e: int | None = None, verify: bool = False):
    """(ok, certificates, failures) for a table on Z^(D)(sigma).

    For every edge mu whose radius-e neighbourhood lies in the ball a matrix g'
    agreeing with a on Z^(e)(mu) is looked up: conjugating by edge frames
    reduces the search to the finite image of Stab_G(sigma).
    """
    e = a.e if e is None else e
    if a.D < e + 1:
        raise ValueError("ball too small: need D >= e + 1")
    if not isinstance(a.root, Edge):
        raise ValueError("certificates are computed on symmetric balls around sigma")
    q = spec.q
    table = stab_table(spec, e)
    small = domain(q, e, SIGMA)
    sidx = domain_index(q, e, SIGMA)
    dom = set(a.verts)
    certs, fails = {}, []
    for mu in edges_within(a.verts):
        nb = ball(mu, e, q)
        if not all(v in dom for v in nb):
            continue
        mu2 = make_edge(a(mu.tail), a(mu.head))
        h1, h2 = frame(spec, mu.head), frame(spec, mu2.head)
        h2i = _inverse_cached(h2)
        try:
            perm = tuple(sidx[act(h2i, a(act(h1, v)))] for v in small)
        except KeyError:
            fails.append(mu)
            continue
        k = table.get(perm)
        if k is None:
            fails.append(mu)
            continue
        g = mat_mul(mat_mul(h2, k), _inverse_cached(h1))
        if verify and any(act(g, v) != a(v) for v in nb):
            raise AssertionError(f"certificate at {mu} does not match")
        certs[mu] = g
    return (not fails, certs, fails)


def in_stab_image(perm: tuple, spec, e) -> bool:
    return perm in stab_table(spec, e)


# ---------------------------------------------------------------------------
# H_K^(e)


@lru_cache(maxsize=None)
def _classes(spec: LocalFieldSpec, k: int):
    cls = list(spec.all_classes(k))
    return cls, {c: i for i, c in enumerate(cls)}


@dataclass(frozen=True)
class HElem:
    """Element of H_K^(e) with entries x_{a,k} in pi^(k+e-1) O / pi^prec O.

    levels[k][i] is the raw value attached to the i-th class of O/pi^k.
    """

    spec: LocalFieldSpec
    e: int
    K: int
    prec: int
    levels: tuple

    def __post_init__(self):
        s = self.spec
        if len(self.levels) != self.K + 1:
            raise ValueError("need one level for each k = 0..K")
        for k, lev in enumerate(self.levels):
            if len(lev) != s.q**k:
                raise ValueError(f"level {k} needs {s.q ** k} entries")
            for x in lev:
                if s.r_val(x, self.prec) < min(k + self.e - 1, self.prec):
                    raise ValueError(f"entry at level {k} has valuation below {k + self.e - 1}")

    @property
    def key(self):
        return (self.e, self.K, self.prec, self.levels)

    def to_dict(self):
        s = self.spec
        return {
            "e": self.e,
            "K": self.K,
            "prec": self.prec,
            "levels": [["".join(map(str, s.r_digits(x, self.prec))) for x in lev] for lev in self.levels],
        }


def h_identity(spec, e, K, prec) -> HElem:
    z = spec.r_zero(prec)
    return HElem(spec, e, K, prec, tuple(tuple(z for _ in range(spec.q**k)) for k in range(K + 1)))


def h_elementary(spec, e, K, prec, k, a_index, value) -> HElem:
    """The element with a single nonzero entry value at (a, k)."""
    h = h_identity(spec, e, K, prec)
    levels = [list(lev) for lev in h.levels]
    levels[k][a_index] = spec.r_trunc(value, prec) if spec.mixed else tuple(value)[:prec]
    return HElem(spec, e, K, prec, tuple(tuple(l) for l in levels))


def _apply(h: HElem, x, n: int, upto: int | None = None):
    """delta-bar of the levels < upto (all levels by default) on a raw value of O/pi^n."""
    s = h.spec
    top = h.K + 1 if upto is None else upto
    for k in range(min(top, n)):
        _, idx = _classes(s, k)
        a = s.r_trunc(x, k)
        x = s.r_add(x, s.r_trunc(h.levels[k][idx[a]], n), n)
    return x


def h_act_end(h: HElem, x, n: int | None = None):
    """delta-bar_K(h) = eps_K o ... o eps_0 applied to a class of O/pi^n (n defaults to K+1)."""
    n = h.K + 1 if n is None else n
    if n > h.prec:
        raise PrecisionError(f"entries known mod pi^{h.prec}, asked for pi^{n}")
    return _apply(h, h.spec.r_trunc(x, n) if h.spec.mixed else tuple(x)[:n], n)


def _level_perm(h: HElem, k: int) -> list:
    """P with delta-bar(levels < k)(class_j) = class_{P[j]} on O/pi^k."""
    cls, idx = _classes(h.spec, k)
    return [idx[_apply(h, c, k, upto=k)] for c in cls]


def _same_shape(a: HElem, b: HElem):
    if (a.spec, a.e, a.K, a.prec) != (b.spec, b.e, b.K, b.prec):
        raise ValueError("HElem shapes differ")


def h_mul(a: HElem, b: HElem) -> HElem:
    """(x + h.x') x| hh' levelwise, with (h.x')_c = x'_{h^-1 c}."""
    _same_shape(a, b)
    s, n = a.spec, a.prec
    out = []
    for k in range(a.K + 1):
        P = _level_perm(a, k)
        lev = list(a.levels[k])
        for j, pj in enumerate(P):
            lev[pj] = s.r_add(lev[pj], b.levels[k][j], n)
        out.append(tuple(lev))
    return HElem(s, a.e, a.K, n, tuple(out))


def h_inv(a: HElem) -> HElem:
    s, n = a.spec, a.prec
    out = []
    for k in range(a.K + 1):
        P = _level_perm(a, k)
        out.append(tuple(s.r_neg(a.levels[k][P[c]], n) for c in range(len(P))))
    return HElem(s, a.e, a.K, n, tuple(out))


def h_perm(h: HElem, n: int | None = None) -> tuple:
    """delta-bar(h) as a permutation of the classes of O/pi^n."""
    n = h.K + 1 if n is None else n
    cls, idx = _classes(h.spec, n)
    return tuple(idx[_apply(h, c, n)] for c in cls)


def boundary(h: HElem) -> HElem:
    """The boundary map from H^(e+1) to H^(e): product of (diag, -id) over the levels.

    The diagonal part of the top level lands at level K+1 and is dropped by
    the truncation.
    """
    s, e, K, n = h.spec, h.e - 1, h.K, h.prec
    if e < 1:
        raise ValueError("boundary needs an element of level e+1 >= 2")
    out = h_identity(s, e, K, n)
    for k in range(K, -1, -1):
        y = h.levels[k]
        levels = [list(lev) for lev in h_identity(s, e, K, n).levels]
        levels[k] = [s.r_neg(v, n) for v in y]
        if k + 1 <= K:
            cls, _ = _classes(s, k + 1)
            _, idx_k = _classes(s, k)
            levels[k + 1] = [y[idx_k[s.r_trunc(c, k)]] for c in cls]
        out = h_mul(out, HElem(s, e, K, n, tuple(tuple(l) for l in levels)))
    return out


def enumerate_h(spec, e, K, prec, cap: int = 200000):
    """All elements of H_K^(e) with entries mod pi^prec."""
    choices = []
    for k in range(K + 1):
        lo = min(k + e - 1, prec)
        vals = [spec.r_shift(c, lo, prec) for c in spec.all_classes(prec - lo)]
        choices.extend([vals] * spec.q**k)
    total = 1
    for c in choices:
        total *= len(c)
    if total > cap:
        raise CapExceeded(f"H_{K}^({e}) has {total} elements, cap {cap}")
    for combo in itertools.product(*choices):
        levels, i = [], 0
        for k in range(K + 1):
            levels.append(tuple(combo[i:i + spec.q**k]))
            i += spec.q**k
        yield HElem(spec, e, K, prec, tuple(levels))


def check_propexp(spec: LocalFieldSpec, e: int, K: int, cap: int = 200000) -> dict:
    """Exhaustive check that H_K^(e) / im(boundary) acts faithfully on O/pi^(K+1)."""
    prec = K + 1
    H = list(enumerate_h(spec, e, K, prec, cap))
    images, kernel = set(), set()
    for h in H:
        p = h_perm(h, prec)
        images.add(p)
        if p == tuple(range(len(p))):
            kernel.add(h.key)
    im_d = {boundary(g).key for g in enumerate_h(spec, e + 1, K, prec, cap)}
    ok = len(H) == len(images) * len(im_d) and kernel == im_d
    return {"ok": ok, "H": len(H), "image": len(images), "im_boundary": len(im_d), "kernel": len(kernel)}


def h_to_treeaut(h: HElem, D: int) -> DepthAut:
    """The action on the forward ball of x_plus: (d, u) -> (d, delta-bar(u) mod pi^d)."""
    if D > h.K + 1 or D > h.prec:
        raise ValueError(f"depth {D} exceeds what H_{h.K} determines")
    s = h.spec

    def fn(v):
        raw = s.r_from_digits([v.digit(i) for i in range(v.m)], v.m)
        img = _apply(h, raw, v.m)
        ds = s.r_digits(img, v.m)
        return Vertex(v.m, tuple((i, d) for i, d in enumerate(ds) if d))

    return tabulate(fn, "hatN0", h.e, D, s.q)


# ---------------------------------------------------------------------------
# the index of t^m N t^-m


def conjugate_index(spec: LocalFieldSpec, e: int, m: int, cap: int = 200000) -> dict:
    """[image of hat-N_{0,1} : image of its intersection with t^m hat-N_0 t^-m] on the depth m+e ball.

    The subgroup is cut out locally: an element belongs to t^m hat-N_0 t^-m
    iff on every Z_+^(e)(y) it agrees with some n(b), b in pi^(m+e-1).
    """
    q, D = spec.q, m + e
    gens = hat_n0_generators(spec, e, D)
    G = closure([g.perm for g in gens], cap)
    verts = domain(q, D, X_PLUS)
    idx = domain_index(q, D, X_PLUS)
    # restrictions of n(b), b in pi^(m+e-1)/pi^D, to each local ball
    local = {}
    checks = [y for y in verts if y.m + e <= D]
    shifts = []
    for c in spec.all_classes(max(D - (m + e - 1), 0)):
        ds = spec.r_digits(c, D - (m + e - 1))
        shifts.append({m + e - 1 + i: d for i, d in enumerate(ds) if d})
    for y in checks:
        Zy = [idx[v] for v in ball(y, e, q, "forward")]
        local[y] = (Zy, {tuple(idx[SubtreeShift(spec, X_PLUS, tuple(sorted(b.items())))(verts[i])] for i in Zy)
                         for b in shifts})
    sub = [g for g in G if all(tuple(g[i] for i in Zy) in allowed for Zy, allowed in local.values())]
    subset = set(sub)
    closed = all(tuple(a[i] for i in b) in subset for a in sub[:50] for b in sub[:50])
    return {"index": len(G) // len(sub), "order": len(G), "sub_order": len(sub), "closed": closed,
            "formula": _index_formula(q, e, m)}


def _index_formula(q, e, m):
    out = 1
    for j in range(m):
        out *= q ** (e + j)
    return out


# ---------------------------------------------------------------------------
# retraction along an end


def retract_along_end(fn, alpha: dict, D: int, spec: LocalFieldSpec) -> GMatrix:
    """The element [[pi^s, y], [0, 1]] of TN agreeing with fn on the apartment to alpha.

    fn is a tree map or DepthAut; alpha a digit dict of an element of O.
    Agreement is checked on the vertices (d, alpha mod pi^d), 0 <= d <= D.
    The torus part is normalized to powers of t: diag(c, 1) with c a unit
    fixes the apartment through 0, so TN elements agreeing along alpha
    differ by such factors.
    """
    apt = [Vertex(d, tuple(sorted((i, c) for i, c in alpha.items() if i < d and c))) for d in range(D + 1)]
    imgs = [fn(v) for v in apt]
    s = imgs[0].m - apt[0].m
    if any(w.m != v.m + s for v, w in zip(apt, imgs)):
        raise ValueError("map does not shift levels uniformly along the apartment")
    top = imgs[-1]
    prec = top.m + 1
    shifted = f_make(spec, {i + s: c for i, c in alpha.items()}, prec + abs(s) + 1)
    y = f_add(f_make(spec, dict(top.u), prec + abs(s) + 1), f_neg(shifted))
    ydig = y.digits_to(top.m)
    g = gmatrix(spec, [[{s: 1}, ydig], [0, 1]])
    for v, w in zip(apt, imgs):
        if act(g, v) != w:
            raise ValueError(f"no element of TN agrees with the map at {v}")
    return g


def end_image(fn, alpha: dict, D: int, spec) -> dict:
    """Digits of the image end, read off the depth-D apartment vertex."""
    v = Vertex(D, tuple(sorted((i, c) for i, c in alpha.items() if i < D and c)))
    w = fn(v)
    return dict(w.u)


# ---------------------------------------------------------------------------
# product decomposition over N / N_0^(1)


def coset_roots(spec: LocalFieldSpec, L: int) -> list:
    """The vertices (0, b) for b in pi^-L O / O."""
    out = []
    for c in spec.all_classes(L):
        ds = spec.r_digits(c, L)
        out.append(Vertex(0, tuple((i - L, d) for i, d in enumerate(ds) if d)))
    return sorted(out)


def decompose_product(a: DepthAut, L: int) -> dict:
    """Restrictions of a (tabulated on the forward ball of (-L, 0)) to the subtrees n X_+."""
    root = Vertex(-L, ())
    if a.root != root:
        raise ValueError(f"expected a table rooted at {root}")
    depth = a.D - L
    if depth < 0:
        raise WindowError("window does not reach level 0")
    for v in a.verts:
        if v.m < 0 and a(v) != v:
            raise ValueError("element moves a vertex below level 0")
    out = {}
    for z in [v for v in a.verts if v.m == 0]:
        sub = domain(a.q, depth, z)
        idx = domain_index(a.q, depth, z)
        try:
            perm = tuple(idx[a(v)] for v in sub)
        except KeyError:
            raise ValueError(f"element does not preserve the subtree at {z}") from None
        out[z] = DepthAut("hatN0", a.e, depth, a.q, z, perm)
    return out


def reassemble(components: dict, L: int, e: int, q: int) -> DepthAut:
    depth = next(iter(components.values())).D
    root = Vertex(-L, ())

    def fn(v):
        if v.m < 0:
            return v
        z = Vertex(0, tuple((i, d) for i, d in v.u if i < 0))
        return components[z](v)

    return tabulate(fn, "hatN0", e, depth + L, q, root)


# ---------------------------------------------------------------------------
# trace


def trace_map(h: HElem, ext: ExtensionData, e_prime: int) -> HElem:
    """Levelwise trace from H^(e)[F] to H^(e')[E].

    Level m >= 1 of the result collects the F-levels m*r - t, t = 0..r-1
    (r the ramification index): trace each entry, restrict the index set along
    O_E/pi^m -> O_F/pi^(m*r - t), and sum over t.  Level 0 is the trace.
    """
    F, E, r = ext.F, ext.E, ext.ram
    if h.spec != F:
        raise ValueError("element is not over F")
    if e_prime * r > h.e:
        raise ValueError("need e' * e(F/E) <= e")
    K_E = h.K // r
    prec_E = h.prec // r
    if prec_E < 1:
        raise PrecisionError("not enough precision for the trace")

    def tr(raw):
        ds = F.r_digits(raw, h.prec)
        t = trace_digits(ext, {i: d for i, d in enumerate(ds) if d})
        return E.r_from_digits([t.get(i, 0) for i in range(prec_E)], prec_E)

    levels = [(tr(h.levels[0][0]),)]
    for m in range(1, K_E + 1):
        cls_E, _ = _classes(E, m)
        acc = [E.r_zero(prec_E) for _ in cls_E]
        for t in range(r):
            kF = m * r - t
            _, idxF = _classes(F, kF)
            for i, c in enumerate(cls_E):
                ed = embed_digits(ext, {j: d for j, d in enumerate(E.r_digits(c, m)) if d})
                cF = F.r_from_digits([ed.get(j, 0) for j in range(kF)], kF)
                acc[i] = E.r_add(acc[i], tr(h.levels[kF][idxF[cF]]), prec_E)
        levels.append(tuple(acc))
    return HElem(E, e_prime, K_E, prec_E, tuple(levels))
