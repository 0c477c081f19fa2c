"""
Equivariant homological coefficient systems on finite windows of the tree.

A system on the window Z^(D)(sigma) assigns a free Lambda-module to every
vertex and edge, with transition matrices r_x^eta.  Systems built from a
representation W of GL2(k) (level e = 1) carry an action of every tree
automorphism through the permutation it induces on the neighbours of each
vertex: that permutation is an element of PGL2(k), and W is evaluated on it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import linalg
from .linalg import Lambda
from .localfield import GF, LocalFieldSpec
from .locaut import Conjugate, MatrixMap, hat_u_generators, iwahori_unipotent_gens
from .tree import (
    INF,
    SIGMA,
    X_MINUS,
    X_PLUS,
    Edge,
    Vertex,
    ball,
    distance,
    edge_frame,
    edges_within,
    frame,
    label,
    make_edge,
    mobius,
    neighbor_by_label,
    neighbors,
    parity,
)

SIGN_CONVENTIONS = ("all_plus", "negated_minus_orbit")


# ---------------------------------------------------------------------------
# GL2 of the residue field


def labels(k: GF) -> list:
    """P^1(k) in a fixed order: infinity first, then 0..q-1."""
    return [INF] + list(range(k.q))


@lru_cache(maxsize=None)
def gl2(k: GF) -> tuple:
    """All elements ((a, b), (c, d)) of GL2(k)."""
    out = []
    for a, b, c, d in itertools.product(range(k.q), repeat=4):
        if k.sub(k.mul(a, d), k.mul(b, c)) != 0:
            out.append(((a, b), (c, d)))
    return tuple(out)


def gl2_mul(k: GF, g, h):
    (a, b), (c, d) = g
    (e, f), (x, y) = h
    return (
        (k.add(k.mul(a, e), k.mul(b, x)), k.add(k.mul(a, f), k.mul(b, y))),
        (k.add(k.mul(c, e), k.mul(d, x)), k.add(k.mul(c, f), k.mul(d, y))),
    )


@lru_cache(maxsize=None)
def pgl2_table(k: GF) -> dict:
    """Permutation of labels (as an index tuple) -> a GL2(k) representative."""
    ls = labels(k)
    pos = {l: i for i, l in enumerate(ls)}
    table = {}
    for g in gl2(k):
        perm = tuple(pos[mobius(k, g, l)] for l in ls)
        table.setdefault(perm, g)
    return table


def local_perm(k: GF, fn, x: Vertex) -> tuple:
    """The permutation of P^1(k) that fn induces from the neighbours of x to those of fn(x)."""
    y = fn(x)
    ls = labels(k)
    pos = {l: i for i, l in enumerate(ls)}
    return tuple(pos[label(y, fn(neighbor_by_label(x, l)))] for l in ls)


def local_gl2(k: GF, fn, x: Vertex):
    """A GL2(k) element inducing the same permutation as fn at x."""
    g = pgl2_table(k).get(local_perm(k, fn, x))
    if g is None:
        raise ValueError(f"map is not locally algebraic at {x}")
    return g


# ---------------------------------------------------------------------------
# representations of GL2(k) over Lambda


@dataclass(frozen=True)
class LocalRep:
    """A representation of GL2(k) on Lambda^dim, trivial on scalars."""

    name: str
    k: GF = field(compare=False)
    lam: Lambda
    dim: int
    table: dict = field(compare=False, repr=False)

    def rho(self, g) -> np.ndarray:
        return self.table[g]

    def invariants_of(self, elements) -> np.ndarray:
        mats = [self.table[g] for g in elements]
        return linalg.quotient_invariants(self.dim, np.zeros((self.dim, 0), dtype=np.int64), mats, self.lam)


def trivial_rep(k: GF, lam: Lambda, dim: int = 1) -> LocalRep:
    I = np.eye(dim, dtype=np.int64)
    return LocalRep("trivial", k, lam, dim, {g: I for g in gl2(k)})


def steinberg_rep(k: GF, lam: Lambda) -> LocalRep:
    """Lambda[P^1(k)] modulo the sum of all points, with basis delta_lambda (lambda in k)."""
    q = k.q
    table = {}
    for g in gl2(k):
        M = np.zeros((q, q), dtype=np.int64)
        for lam_ in range(q):
            img = mobius(k, g, lam_)
            if img is INF:
                M[:, lam_] = lam.mod - 1
            else:
                M[img, lam_] = 1
        table[g] = M
    return LocalRep("steinberg", k, lam, q, table)


def rep_from_generators(name: str, k: GF, lam: Lambda, gens: dict) -> LocalRep:
    """Close generator images under multiplication; fails if they do not define a representation."""
    dim = next(iter(gens.values())).shape[0]
    one = ((1, 0), (0, 1))
    table = {one: np.eye(dim, dtype=np.int64)}
    frontier = [one]
    while frontier:
        new = []
        for h in frontier:
            for g, M in gens.items():
                gh = gl2_mul(k, g, h)
                val = (M @ table[h]) % lam.mod
                if gh in table:
                    if not np.array_equal(table[gh], val):
                        raise ValueError("generator images do not define a representation")
                else:
                    table[gh] = val
                    new.append(gh)
        frontier = new
    if len(table) != len(gl2(k)):
        raise ValueError("generators do not generate GL2(k)")
    rep = LocalRep(name, k, lam, dim, table)
    check_central(rep)
    return rep


def check_central(rep: LocalRep):
    I = np.eye(rep.dim, dtype=np.int64)
    for z in range(1, rep.k.q):
        if not np.array_equal(rep.rho(((z, 0), (0, z))) % rep.lam.mod, I):
            raise ValueError("nontrivial central character is not supported")


def unipotent(k: GF, lam_):
    """The unipotent subgroup of GL2(k) fixing the label lam_ (as a list of elements)."""
    if lam_ is INF:
        return [((1, b), (0, 1)) for b in range(k.q)]
    out = []
    for c in range(k.q):
        # conjugate n^-(c) to fix lam_: n(l) n^-(c) n(-l)
        g = gl2_mul(k, gl2_mul(k, ((1, lam_), (0, 1)), ((1, 0), (c, 1))), ((1, k.neg(lam_)), (0, 1)))
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# finite modules


@dataclass
class FinMod:
    """Lambda^gens / span(relations)."""

    lam: Lambda
    gens: int
    relations: np.ndarray

    def length(self) -> int:
        return sum(linalg.cokernel_invariants(self.relations, self.lam, self.gens))

    def order(self) -> int:
        return self.lam.p ** self.length()


@dataclass
class SubMod:
    """A submodule of a FinMod given by ambient generator columns."""

    ambient: FinMod
    basis: np.ndarray

    def length(self) -> int:
        return linalg.quotient_length(self.basis, self.ambient.relations, self.ambient.lam)


def invariants(M: FinMod, actions) -> SubMod:
    """Elements whose class is fixed by every action matrix."""
    return SubMod(M, linalg.quotient_invariants(M.gens, M.relations, list(actions), M.lam))


# ---------------------------------------------------------------------------
# coefficient systems


@dataclass
class CoeffSystem:
    spec: LocalFieldSpec
    lam: Lambda
    D: int
    e: int
    kind: str
    vdim: dict
    edim: dict
    r: dict  # (edge, vertex) -> matrix, all_plus convention
    reps: dict  # vertex -> LocalRep or None (trivial action)
    sign_convention: str = "all_plus"
    trivial_central_character: bool = True

    def __post_init__(self):
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise ValueError(f"unknown sign convention {self.sign_convention!r}")
        self.verts = sorted(self.vdim)
        self.edges = sorted(self.edim)

    @property
    def q(self):
        return self.spec.q

    def transition(self, eta: Edge, x: Vertex) -> np.ndarray:
        M = self.r[(eta, x)]
        if self.sign_convention == "negated_minus_orbit" and parity(x):
            return (-M) % self.lam.mod
        return M

    # -- chain complexes -------------------------------------------------

    def offsets(self, verts=None, edges=None):
        verts = self.verts if verts is None else verts
        edges = edges_within(verts) if edges is None else edges
        vo, eo, n0, n1 = {}, {}, 0, 0
        for v in verts:
            vo[v] = n0
            n0 += self.vdim[v]
        for eta in edges:
            eo[eta] = n1
            n1 += self.edim[eta]
        return vo, eo, n0, n1

    def boundary_matrix(self, verts=None) -> np.ndarray:
        verts = self.verts if verts is None else sorted(verts)
        edges = edges_within(verts)
        vo, eo, n0, n1 = self.offsets(verts, edges)
        d = np.zeros((n0, n1), dtype=np.int64)
        for eta in edges:
            for x in eta.vertices:
                M = self.transition(eta, x)
                d[vo[x]:vo[x] + self.vdim[x], eo[eta]:eo[eta] + self.edim[eta]] = M
        return d % self.lam.mod

    # -- actions -----------------------------------------------------------

    def local_perm(self, fn, x: Vertex) -> tuple:
        return local_perm(self.spec.k, fn, x)

    def vertex_action(self, fn, x: Vertex) -> np.ndarray:
        rep = self.reps.get(x)
        if rep is None:
            return np.eye(self.vdim[x], dtype=np.int64)
        return rep.rho(local_gl2(self.spec.k, fn, x))

    def edge_action(self, fn, eta: Edge) -> np.ndarray:
        y = fn(eta.head)
        eta2 = make_edge(fn(eta.tail), y)
        lhs = self.transition(eta2, y)
        rhs = (self.vertex_action(fn, eta.head) @ self.transition(eta, eta.head)) % self.lam.mod
        X = np.zeros((self.edim[eta2], self.edim[eta]), dtype=np.int64)
        s = linalg.snf(lhs, self.lam) if lhs.size else None
        for j in range(self.edim[eta]):
            col = linalg.solve(lhs, rhs[:, j], self.lam, s)
            if col is None:
                raise ValueError(f"no edge action at {eta}")
            X[:, j] = col
        return X

    def chain_action(self, fn, verts=None):
        """Matrices of fn on C_0 and C_1 of a window that fn preserves."""
        verts = self.verts if verts is None else sorted(verts)
        edges = edges_within(verts)
        vo, eo, n0, n1 = self.offsets(verts, edges)
        A0 = np.zeros((n0, n0), dtype=np.int64)
        A1 = np.zeros((n1, n1), dtype=np.int64)
        for x in verts:
            y = fn(x)
            A0[vo[y]:vo[y] + self.vdim[y], vo[x]:vo[x] + self.vdim[x]] = self.vertex_action(fn, x)
        for eta in edges:
            eta2 = make_edge(fn(eta.tail), fn(eta.head))
            A1[eo[eta2]:eo[eta2] + self.edim[eta2], eo[eta]:eo[eta] + self.edim[eta]] = self.edge_action(fn, eta)
        return A0 % self.lam.mod, A1 % self.lam.mod

    def to_manifest(self) -> dict:
        return {
            "ring": {"p": self.lam.p, "r": self.lam.r},
            "depth": self.D,
            "e": self.e,
            "kind": self.kind,
            "sign_convention": self.sign_convention,
            "vertex_dims": {repr(v): self.vdim[v] for v in self.verts},
            "edge_dims": {repr(eta): self.edim[eta] for eta in self.edges},
            "transitions": {f"{eta!r}->{x!r}": self.r[(eta, x)].tolist() for eta, x in sorted(self.r)},
        }


def build_system(kind: str, e: int, D: int, spec: LocalFieldSpec, lam: Lambda, rep: LocalRep | None = None,
                 sign_convention: str = "all_plus") -> CoeffSystem:
    """Systems on Z^(D)(sigma).

    kind: 'constant', 'steinberg', 'from_rep' (needs rep), 'zero',
    'edges_zero' (vertex modules Lambda, edge modules 0) or 'doubled'
    (constant, but F(x_plus) = Lambda^2 with r = (1, 0)^T).
    """
    k = spec.k
    if lam.p != spec.p:
        raise ValueError("coefficient ring and residue field need the same p")
    verts = ball(SIGMA, D, spec.q)
    edges = edges_within(verts)
    if kind == "constant":
        rep = trivial_rep(k, lam)
    elif kind == "steinberg":
        rep = steinberg_rep(k, lam)
    elif kind == "from_rep":
        if rep is None:
            raise ValueError("from_rep needs a representation")
        check_central(rep)
    if kind in ("constant", "steinberg", "from_rep"):
        if e != 1 and rep.name != "trivial":
            raise ValueError("systems from representations are built at level e = 1")
        E = rep.invariants_of(unipotent(k, INF))
        E = _reduce_basis(E, lam)
        vdim = {v: rep.dim for v in verts}
        edim = {eta: E.shape[1] for eta in edges}
        r = {}
        w = ((0, 1), (1, 0))
        for eta in edges:
            c = label(eta.tail, eta.head)
            g = gl2_mul(k, ((1, c), (0, 1)), w)
            r[(eta, eta.head)] = E
            r[(eta, eta.tail)] = (rep.rho(g) @ E) % lam.mod
        return CoeffSystem(spec, lam, D, e, kind, vdim, edim, r, {v: rep for v in verts}, sign_convention)
    if kind in ("zero", "edges_zero", "doubled"):
        vdim = {v: (0 if kind == "zero" else 1) for v in verts}
        edim = {eta: (1 if kind == "doubled" else 0) for eta in edges}
        if kind == "doubled":
            vdim[X_PLUS] = 2
        r = {}
        for eta in edges:
            for x in eta.vertices:
                M = np.zeros((vdim[x], edim[eta]), dtype=np.int64)
                if edim[eta] and vdim[x]:
                    M[0, 0] = 1
                r[(eta, x)] = M
        return CoeffSystem(spec, lam, D, e, kind, vdim, edim, r, {}, sign_convention)
    raise ValueError(f"unknown system kind {kind!r}")


def _reduce_basis(E: np.ndarray, lam: Lambda) -> np.ndarray:
    """A minimal set of generator columns spanning the same submodule (free case: a basis)."""
    cols = []
    for j in range(E.shape[1]):
        cand = cols + [E[:, j]]
        M = np.array(cand).T
        if linalg.length(M, lam) > (linalg.length(np.array(cols).T, lam) if cols else 0):
            cols.append(E[:, j])
    return np.array(cols, dtype=np.int64).T % lam.mod if cols else np.zeros((E.shape[0], 0), dtype=np.int64)


# ---------------------------------------------------------------------------
# homology


def homology(F: CoeffSystem, verts=None):
    """(H0, H1): cokernel and kernel of the boundary map on a window."""
    d = F.boundary_matrix(verts)
    H0 = FinMod(F.lam, d.shape[0], d)
    K = linalg.kernel(d, F.lam) if d.shape[1] else np.zeros((0, 0), dtype=np.int64)
    H1 = SubMod(FinMod(F.lam, d.shape[1], np.zeros((d.shape[1], 0), dtype=np.int64)), K)
    return H0, H1


def interior_vertices(F: CoeffSystem, margin: int) -> list:
    return [v for v in F.verts if min(distance(v, X_PLUS), distance(v, X_MINUS)) <= F.D - margin]


def interior_edges(F: CoeffSystem, margin: int) -> list:
    inner = set(interior_vertices(F, margin))
    return [eta for eta in F.edges if eta.tail in inner and eta.head in inner]


def edge_unipotent_maps(F: CoeffSystem, eta: Edge, e: int | None = None) -> list:
    """Generators of U^(e)_eta as tree maps (enough to see their action on neighbours of eta)."""
    e = F.e if e is None else e
    h = edge_frame(F.spec, eta)
    return [Conjugate(h, MatrixMap(g)) for g in iwahori_unipotent_gens(F.spec, e, e + 1)]


def vertex_unipotent_maps(F: CoeffSystem, x: Vertex, e: int | None = None) -> list:
    """Generators of N^(e)_x = {n(b) : b in pi^(m+e-1)} for x = (m, u)."""
    e = F.e if e is None else e
    h = frame(F.spec, x)
    from .tree import gmatrix

    return [Conjugate(h, MatrixMap(gmatrix(F.spec, [[1, {e - 1: c}], [0, 1]]))) for c in F.spec.k.prime_basis()]


def _module_invariants(F: CoeffSystem, x: Vertex, maps) -> np.ndarray:
    mats = [F.vertex_action(fn, x) for fn in maps]
    n = F.vdim[x]
    return linalg.quotient_invariants(n, np.zeros((n, 0), dtype=np.int64), mats, F.lam)


def check_C_axioms(F: CoeffSystem, e: int | None = None) -> dict:
    """Injectivity, image = U^(e)_eta-invariants and generation at interior simplices."""
    e = F.e if e is None else e
    lam = F.lam
    fails = []
    k = F.spec.k
    for eta in interior_edges(F, e + 1):
        for x in eta.vertices:
            M = F.transition(eta, x)
            if linalg.length(M, lam) != lam.r * F.edim[eta]:
                fails.append(("injective", eta, x))
                continue
            inv = _module_invariants(F, x, edge_unipotent_maps(F, eta, e))
            if not linalg.span_equal(M, inv, lam) if F.vdim[x] else False:
                fails.append(("image_invariants", eta, x))
            rep = F.reps.get(x)
            if rep is not None and F.vdim[x]:
                span = linalg.hstack([(rep.rho(g) @ M) % lam.mod for g in gl2(k)], F.vdim[x])
                if not linalg.span_equal(span, np.eye(F.vdim[x], dtype=np.int64), lam):
                    fails.append(("generation", eta, x))
    return {"ok": not fails, "failures": fails}


def check_hyp123(F: CoeffSystem, e: int | None = None) -> dict:
    """Injectivity, forward generation over child edges, image = N^(e)-invariants."""
    e = F.e if e is None else e
    lam, q = F.lam, F.q
    fails = []
    for mu in interior_edges(F, e + 1):
        top = mu.head
        for x in mu.vertices:
            if linalg.length(F.transition(mu, x), lam) != lam.r * F.edim[mu]:
                fails.append(("hyp1", mu, x))
        kids = [make_edge(top, c) for c in neighbors(top, q)[1:]]
        if all(k_ in F.edim for k_ in kids) and F.vdim[top]:
            span = linalg.hstack([F.transition(k_, top) for k_ in kids], F.vdim[top])
            if not linalg.span_equal(span, np.eye(F.vdim[top], dtype=np.int64), lam):
                fails.append(("hyp2", mu, top))
        if F.vdim[top]:
            inv = _module_invariants(F, top, vertex_unipotent_maps(F, top, e))
            if not linalg.span_equal(F.transition(mu, top), inv, lam):
                fails.append(("hyp3", mu, top))
    sub = opposite_unipotent_generation(F.reps.get(X_PLUS)) if F.reps.get(X_PLUS) else True
    if not sub:
        fails.append(("opposite_unipotent", None, X_PLUS))
    return {"ok": not fails, "failures": fails, "opposite_unipotent": sub}


def opposite_unipotent_generation(rep: LocalRep) -> bool:
    """W is spanned by the images of W^N(k) under the opposite unipotent group."""
    k, lam = rep.k, rep.lam
    E = rep.invariants_of(unipotent(k, INF))
    span = linalg.hstack([(rep.rho(((1, 0), (c, 1))) @ E) % lam.mod for c in range(k.q)], rep.dim)
    return linalg.span_equal(span, np.eye(rep.dim, dtype=np.int64), lam)


# ---------------------------------------------------------------------------
# hat actions and invariants


def hat_action(F: CoeffSystem, a) -> dict:
    """Matrices of a tree automorphism on every window simplex whose neighbours it sees.

    Certificate independence is automatic: only the permutation a induces on
    the neighbours of a vertex enters, and any certificate induces the same
    one.
    """
    if a.flavor == "hatU_sigma" and not F.trivial_central_character:
        raise ValueError("hat action of U-type groups needs a trivial central character")
    dom = set(a.verts)
    out = {}
    for x in F.verts:
        if all(y in dom for y in neighbors(x, F.q)) and x in dom:
            out[x] = F.vertex_action(a, x)
    for eta in F.edges:
        if eta.head in out and a(eta.head) in F.vdim and make_edge(a(eta.tail), a(eta.head)) in F.edim:
            out[eta] = F.edge_action(a, eta)
    return out


def h0_invariants(F: CoeffSystem, R: int, gens) -> SubMod:
    """Classes in H0(Z^(R)(sigma)) fixed by every generator (generators need depth >= R+1)."""
    verts = ball(SIGMA, R, F.q)
    d = F.boundary_matrix(verts)
    mats = [F.chain_action(g, verts)[0] for g in gens]
    return invariants(FinMod(F.lam, d.shape[0], d), mats)


def sigma_length(F: CoeffSystem) -> int:
    return linalg.length(F.transition(SIGMA, X_PLUS), F.lam)


def check_invariants_bijection(F: CoeffSystem, R: int) -> dict:
    """length H0(Z^(R))^(hat-U gens) against length F(sigma), plus injectivity of F(sigma) -> H0."""
    gens = hat_u_generators(F.spec, F.e, R + 1)
    inv = h0_invariants(F, R, gens)
    verts = ball(SIGMA, R, F.q)
    d = F.boundary_matrix(verts)
    vo, _, n0, _ = F.offsets(verts)
    emb = np.zeros((n0, F.edim[SIGMA]), dtype=np.int64)
    emb[vo[X_PLUS]:vo[X_PLUS] + F.vdim[X_PLUS]] = F.transition(SIGMA, X_PLUS)
    img = linalg.quotient_length(emb, d, F.lam)
    contained = all(linalg.in_span(linalg.hstack([inv.basis, d], n0), emb[:, j], F.lam)
                    for j in range(emb.shape[1]))
    return {
        "invariants": inv.length(),
        "sigma": sigma_length(F),
        "image_of_sigma": img,
        "contained": contained,
        "ok": inv.length() == sigma_length(F) == img and contained,
        "generators": len(gens),
    }


# ---------------------------------------------------------------------------
# support reduction


def chain_vector(F: CoeffSystem, chain: dict, verts=None) -> np.ndarray:
    vo, _, n0, _ = F.offsets(verts)
    c = np.zeros(n0, dtype=np.int64)
    for x, val in chain.items():
        c[vo[x]:vo[x] + F.vdim[x]] = val
    return c % F.lam.mod


def vector_chain(F: CoeffSystem, c: np.ndarray, verts=None) -> dict:
    verts = F.verts if verts is None else verts
    vo, _, _, _ = F.offsets(verts)
    return {x: c[vo[x]:vo[x] + F.vdim[x]] for x in verts if c[vo[x]:vo[x] + F.vdim[x]].any()}


@dataclass
class ReductionResult:
    ok: bool
    chain: dict
    steps: int
    witness: Vertex | None = None
    classes_preserved: bool = True


def _dist_sigma(v):
    return min(distance(v, X_PLUS), distance(v, X_MINUS))


def reduce_support(F: CoeffSystem, chain: dict, e: int | None = None) -> ReductionResult:
    """Push a 0-chain towards sigma one shell at a time.

    At the outer shell every c_z must be invariant under U^(e) of the edge
    {z^-, z} pointing to sigma; then c_z = r_z(f) for some f on that edge and
    c - d(f) has smaller support.  A vertex where invariance fails is
    returned as the witness.
    """
    e = F.e if e is None else e
    lam = F.lam
    d = F.boundary_matrix()
    s = linalg.snf(d, lam)
    c0 = chain_vector(F, chain)
    cur = {x: np.array(v) % lam.mod for x, v in chain.items() if np.array(v).any()}
    steps = 0
    while cur:
        n = max(_dist_sigma(x) for x in cur)
        if n == 0:
            break
        for z in sorted(x for x in cur if _dist_sigma(x) == n):
            zm = min(neighbors(z, F.q), key=_dist_sigma)
            eta = make_edge(zm, z)
            inv = _module_invariants(F, z, edge_unipotent_maps(F, eta, e))
            if not linalg.in_span(inv, cur[z], lam):
                return ReductionResult(False, cur, steps, z)
            f = linalg.solve(F.transition(eta, z), cur[z], lam)
            if f is None:
                return ReductionResult(False, cur, steps, z)
            del cur[z]
            new = (cur.get(zm, 0) - F.transition(eta, zm) @ f) % lam.mod
            if np.any(new):
                cur[zm] = new
            else:
                cur.pop(zm, None)
            steps += 1
            diff = (c0 - chain_vector(F, cur)) % lam.mod
            if not linalg.in_span(d, diff, lam, s):
                return ReductionResult(False, cur, steps, z, classes_preserved=False)
    return ReductionResult(True, cur, steps)


# ---------------------------------------------------------------------------
# roundtrip


def _window_embedding(F: CoeffSystem, small, big):
    """Inclusion C_0(small) -> C_0(big)."""
    vs, _, n_s, _ = F.offsets(sorted(small))
    vb, _, n_b, _ = F.offsets(sorted(big))
    M = np.zeros((n_b, n_s), dtype=np.int64)
    for x in small:
        for i in range(F.vdim[x]):
            M[vb[x] + i, vs[x] + i] = 1
    return M


def _hat_edge_generators(F: CoeffSystem, tau: Edge, rho: int) -> list:
    """Generators of hat-U^(e)_tau as tree maps: conjugates of the sigma generators by the frame of tau."""
    h = edge_frame(F.spec, tau)
    return [Conjugate(h, a) for a in hat_u_generators(F.spec, F.e, rho)]


def roundtrip(F: CoeffSystem, R: int | None = None, rho: int = 2) -> dict:
    """Rebuild the hat system from H0 of the window and compare with F.

    V = H0(Z^(R)(sigma)).  For each edge tau of the interior, the hat-U_tau
    invariants of H0(Z^(rho-1)(tau)) are mapped into V and compared with the
    image of F(tau) through the even vertex of tau; vertex modules are
    compared as sums over incident edges.  The sign convention of the hat
    system is checked at the odd vertex.
    """
    if not F.trivial_central_character:
        raise ValueError("roundtrip needs a trivial central character")
    lam, q = F.lam, F.q
    R = F.D if R is None else R
    if R > F.D:
        raise ValueError("window too large")
    Vverts = ball(SIGMA, R, q)
    dV = F.boundary_matrix(Vverts)
    vo, _, n0, _ = F.offsets(Vverts)
    report = {"edges": {}, "vertices": {}, "ok": True}

    def iota(x, M):
        out = np.zeros((n0, M.shape[1]), dtype=np.int64)
        out[vo[x]:vo[x] + F.vdim[x]] = M
        return out

    FH = {}
    for tau in edges_within(Vverts):
        if _dist_sigma(tau.head) + rho > R or _dist_sigma(tau.tail) + rho > R:
            continue
        small = ball(tau, rho - 1, q)
        d_small = F.boundary_matrix(small)
        gens = _hat_edge_generators(F, tau, rho)
        mats = [F.chain_action(g, small)[0] for g in gens]
        inv = invariants(FinMod(lam, d_small.shape[0], d_small), mats)
        img = (_window_embedding(F, small, Vverts) @ inv.basis) % lam.mod
        xp = tau.head if parity(tau.head) == 0 else tau.tail
        xm = tau.tail if xp == tau.head else tau.head
        ref = iota(xp, F.transition(tau, xp))
        other = iota(xm, F.transition(tau, xm))
        same = linalg.span_equal(linalg.hstack([img, dV], n0), linalg.hstack([ref, dV], n0), lam)
        inj = linalg.quotient_length(ref, dV, lam) == linalg.length(F.transition(tau, xp), lam)
        sign = all(linalg.in_span(dV, (ref[:, j] + other[:, j]) % lam.mod, lam) for j in range(ref.shape[1]))
        FH[tau] = img
        ok = same and inj and sign
        report["edges"][repr(tau)] = {"match": same, "injective": inj, "sign": sign}
        report["ok"] &= ok
    for x in Vverts:
        inc = [tau for tau in FH if x in tau.vertices]
        if len(inc) != q + 1:
            continue
        hat_x = linalg.hstack([FH[t] for t in inc] + [dV], n0)
        ref = linalg.hstack([iota(x, np.eye(F.vdim[x], dtype=np.int64)), dV], n0)
        same = linalg.span_equal(hat_x, ref, lam)
        inj = linalg.quotient_length(iota(x, np.eye(F.vdim[x], dtype=np.int64)), dV, lam) == lam.r * F.vdim[x]
        report["vertices"][repr(x)] = {"match": same, "injective": inj}
        report["ok"] &= same and inj
    report["checked_edges"] = len(report["edges"])
    report["checked_vertices"] = len(report["vertices"])
    return report


def roundtrip_trivial_rep(spec: LocalFieldSpec, lam: Lambda, D: int) -> dict:
    """V trivial: the hat system has V on every simplex with signed inclusions; H0 maps onto V isomorphically."""
    F = build_system("constant", 1, D, spec, lam, sign_convention="negated_minus_orbit")
    H0, _ = homology(F)
    d = F.boundary_matrix()
    summ = np.ones((1, d.shape[0]), dtype=np.int64)
    # the map to V sends a chain to the sum of its values; it kills boundaries
    kills = not ((summ @ d) % lam.mod).any()
    return {"H0_length": H0.length(), "V_length": lam.r, "well_defined": kills,
            "ok": kills and H0.length() == lam.r}


def transport(F: CoeffSystem, fn, src, dst) -> np.ndarray:
    """Matrix of fn from C_0 of the window src to C_0 of the window dst."""
    vs, _, ns, _ = F.offsets(sorted(src), [])
    vd, _, nd, _ = F.offsets(sorted(dst), [])
    M = np.zeros((nd, ns), dtype=np.int64)
    for x in src:
        y = fn(x)
        if y not in vd:
            raise ValueError(f"image {y} of {x} leaves the target window")
        M[vd[y]:vd[y] + F.vdim[y], vs[x]:vs[x] + F.vdim[x]] = F.vertex_action(fn, x)
    return M % F.lam.mod
