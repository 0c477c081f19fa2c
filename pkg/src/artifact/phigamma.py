"""
Duals of half-tree homology, the truncated etale pair, and the Iwasawa algebra of hat-N_{0,1} for Q_p.

Finite modules are Lambda^n / R; their duals are the row vectors y with
y R = 0, and a map with matrix M dualizes to y -> y M.  On the half-tree
window Z_+^(S)(x_plus):

  A_S = H0(Z_+^(S)),  B_S = A_S / F(sigma),  D = A^dual,  D' = B^dual.

t^m pushes chains from Z_+^(S) into Z_+^(S+m); psi is its dual.  The map
"restrict to t^m X_+ and pull back by t^-m" goes from B_(S+m) to B_S; phi is
its dual.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import linalg
from .coeff import CoeffSystem, FinMod, check_hyp123, transport
from .linalg import Lambda
from .localfield import LocalFieldSpec
from .locaut import MatrixMap, _classes, h_elementary, h_identity, h_perm, hat_n0_generators
from .tree import SIGMA, X_PLUS, ball, gmatrix, make_edge, mat_inv, neighbors, t_matrix


# ---------------------------------------------------------------------------
# duals


@dataclass
class DualModule:
    """Hom(M, Lambda) as rows y with y R = 0; pairing(x) evaluates every basis row on x."""

    module: FinMod
    basis: np.ndarray  # rows

    def length(self) -> int:
        return linalg.length(self.basis.T, self.module.lam) if self.basis.size else 0

    def pairing(self, x) -> np.ndarray:
        return (self.basis @ np.asarray(x)) % self.module.lam.mod


def dualize(M: FinMod) -> DualModule:
    R = M.relations
    if R.size:
        K = linalg.kernel(R.T, M.lam)
    else:
        K = np.eye(M.gens, dtype=np.int64)
    return DualModule(M, K.T % M.lam.mod)


def dual_map(M: np.ndarray):
    """The transpose action y -> y M."""
    return lambda y: (np.asarray(y) @ M)


# ---------------------------------------------------------------------------
# the truncated pair


def plus_window(q: int, S: int) -> list:
    return ball(X_PLUS, S, q, "forward")


def _sigma_column(F: CoeffSystem, verts) -> np.ndarray:
    vo, _, n0, _ = F.offsets(verts, [])
    M = np.zeros((n0, F.edim[SIGMA]), dtype=np.int64)
    M[vo[X_PLUS]:vo[X_PLUS] + F.vdim[X_PLUS]] = F.transition(SIGMA, X_PLUS)
    return M


def half_tree_modules(F: CoeffSystem, S: int):
    verts = plus_window(F.q, S)
    d = F.boundary_matrix(verts)
    A = FinMod(F.lam, d.shape[0], d)
    sig = _sigma_column(F, verts)
    B = FinMod(F.lam, d.shape[0], linalg.hstack([d, sig], d.shape[0]))
    return verts, A, B, sig


def t_push(F: CoeffSystem, m: int, S: int) -> np.ndarray:
    """t^m : C0(Z_+^(S)) -> C0(Z_+^(S+m))."""
    g = t_matrix(F.spec, m)
    return transport(F, MatrixMap(g), plus_window(F.q, S), plus_window(F.q, S + m))


def restrict_pull(F: CoeffSystem, m: int, S: int) -> np.ndarray:
    """C0(Z_+^(S+m)) -> C0(Z_+^(S)): restrict to t^m X_+, then pull back by t^-m."""
    src, dst = plus_window(F.q, S + m), plus_window(F.q, S)
    vs, _, ns, _ = F.offsets(src, [])
    vd, _, nd, _ = F.offsets(dst, [])
    g, gi = MatrixMap(t_matrix(F.spec, m)), MatrixMap(t_matrix(F.spec, -m))
    M = np.zeros((nd, ns), dtype=np.int64)
    for x in dst:
        y = g(x)
        M[vd[x]:vd[x] + F.vdim[x], vs[y]:vs[y] + F.vdim[y]] = F.vertex_action(gi, y)
    return M % F.lam.mod


@dataclass
class EtalePairTrunc:
    F: CoeffSystem
    D: int
    A: FinMod
    B: FinMod
    dual_A: DualModule
    dual_B: DualModule
    sigma: np.ndarray
    hyp: dict = field(default_factory=dict)

    def coker_length(self) -> int:
        """Length of the cokernel of the boundary from D' to D."""
        return self.dual_A.length() - self.dual_B.length()


def build_pair(F: CoeffSystem, D: int | None = None, check: bool = True) -> EtalePairTrunc:
    D = F.D if D is None else D
    if D > F.D:
        raise ValueError("pair depth exceeds the system window")
    hyp = check_hyp123(F) if check else {}
    if check and not hyp["ok"]:
        raise ValueError(f"hypotheses fail: {hyp['failures'][:3]}")
    _, A, B, sig = half_tree_modules(F, D)
    return EtalePairTrunc(F, D, A, B, dualize(A), dualize(B), sig, hyp)


def boundary_injective(pair: EtalePairTrunc) -> bool:
    """The dual of the surjection A -> B is injective: D' rows stay independent inside D."""
    yb = pair.dual_B.basis
    if not yb.size:
        return True
    lands_in_D = not ((yb @ pair.A.relations) % pair.A.lam.mod).any()
    return lands_in_D and linalg.length(yb.T, pair.A.lam) == pair.dual_B.length()


def support_decompose(F: CoeffSystem, c: np.ndarray, m: int, S: int) -> dict:
    """Move a 0-chain on Z_+^(S) to depth >= m with the forward generation property."""
    if m > S:
        raise ValueError("m exceeds the window")
    lam, q = F.lam, F.q
    verts = plus_window(q, S)
    vo, _, _, _ = F.offsets(verts, [])
    d = F.boundary_matrix(verts)
    s = linalg.snf(d, lam) if d.size else None
    c = np.asarray(c, dtype=np.int64) % lam.mod
    c0 = c.copy()
    moves = 0
    for depth in range(m):
        for y in [v for v in verts if v.m == depth]:
            val = c[vo[y]:vo[y] + F.vdim[y]]
            if not val.any():
                continue
            kids = [make_edge(y, z) for z in neighbors(y, q)[1:]]
            stack = linalg.hstack([F.transition(k, y) for k in kids], F.vdim[y])
            f = linalg.solve(stack, val, lam)
            if f is None:
                return {"ok": False, "witness": y, "chain": c}
            pos = 0
            for k in kids:
                n = F.edim[k]
                fk = f[pos:pos + n]
                pos += n
                z = k.head
                c[vo[y]:vo[y] + F.vdim[y]] -= F.transition(k, y) @ fk
                c[vo[z]:vo[z] + F.vdim[z]] -= F.transition(k, z) @ fk
            c %= lam.mod
            moves += 1
            if not linalg.in_span(d, (c - c0) % lam.mod, lam, s):
                return {"ok": False, "witness": y, "chain": c, "class_changed": True}
    deep = all(not c[vo[v]:vo[v] + F.vdim[v]].any() for v in verts if v.m < m)
    return {"ok": deep, "chain": c, "moves": moves, "witness": None}


def n_representatives(spec: LocalFieldSpec, m: int) -> list:
    """n(b) for b over O / pi^m."""
    out = []
    for raw in spec.all_classes(m):
        digs = spec.r_digits(raw, m)
        out.append(gmatrix(spec, [[1, {i: x for i, x in enumerate(digs) if x}], [0, 1]]))
    return out


def check_etale(pair: EtalePairTrunc, m: int) -> dict:
    """classet1 as an exact matrix identity and the two finite ingredients of classet2."""
    F, lam = pair.F, pair.A.lam
    if m == 0:
        return {"ok": True, "classet1": True, "decompose": True, "identity_off_ball": True, "vacuous": True}
    S = pair.D - m
    if S < m:
        raise ValueError("window margin insufficient for this m")
    _, A_S, B_S, _ = half_tree_modules(F, S)
    _, A_Sm, B_Sm, _ = half_tree_modules(F, pair.D)
    T = t_push(F, m, S)
    Phi = restrict_pull(F, m, S)
    mod = lam.mod
    # both maps respect the relations
    psi_ok = linalg.span_contains(A_Sm.relations, (T @ A_S.relations) % mod, lam)
    phi_ok = linalg.span_contains(B_S.relations, (Phi @ B_Sm.relations) % mod, lam)
    Dp = dualize(B_S).basis
    lhs = (Dp @ Phi @ T) % mod  # psi . boundary . phi on a basis of D'
    classet1 = psi_ok and phi_ok and np.array_equal(lhs, Dp % mod)
    # (i) every class is carried by depth >= m
    verts = plus_window(F.q, pair.D)
    vo, _, n0, _ = F.offsets(verts, [])
    decompose = True
    for v in verts:
        if v.m < m:
            for i in range(F.vdim[v]):
                c = np.zeros(n0, dtype=np.int64)
                c[vo[v] + i] = 1
                decompose &= support_decompose(F, c, m, pair.D)["ok"]
    # (ii) sum_n n t^m Phi t^-m n^-1 is the identity on chains off Z_+^(m-1)
    full = pair.D
    Tm = t_push(F, m, full - m)
    Pm = restrict_pull(F, m, full - m)
    E = np.zeros((n0, n0), dtype=np.int64)
    vw = plus_window(F.q, full)
    for n in n_representatives(F.spec, m):
        ninv = mat_inv(n)
        N = transport(F, MatrixMap(n), vw, vw)
        Ni = transport(F, MatrixMap(ninv), vw, vw)
        E = (E + N @ Tm @ Pm @ Ni) % mod
    off = [vo[v] + i for v in verts if v.m >= m for i in range(F.vdim[v])]
    ident = np.array_equal(E[:, off], np.eye(n0, dtype=np.int64)[:, off])
    return {
        "ok": bool(classet1 and decompose and ident),
        "classet1": bool(classet1),
        "decompose": bool(decompose),
        "identity_off_ball": bool(ident),
        "psi_well_defined": bool(psi_ok),
        "phi_well_defined": bool(phi_ok),
    }


# ---------------------------------------------------------------------------
# Nakayama bound and the Q_p fact


def _fixed_outside(a):
    dom = set(a.verts)
    return lambda v: a(v) if v in dom else v


def p_torsion_invariants(M: FinMod, actions) -> np.ndarray:
    """Generators of (M^G)[p]."""
    lam = M.lam
    I = linalg.quotient_invariants(M.gens, M.relations, list(actions), lam)
    big = linalg.hstack([(lam.p * I) % lam.mod, M.relations], M.gens)
    K = linalg.kernel(big, lam)
    z = K[: I.shape[1]]
    return (I @ z) % lam.mod


def _k_dim(cols, relations, lam) -> int:
    return linalg.quotient_length(cols, relations, lam) if cols.size else 0


def generator_bound(F: CoeffSystem, S: int | None = None, seed_rows: int = 64) -> dict:
    """n = dim_k F(x_plus)^(N_0, p=0), the dual count on the half-tree window, and a generating set of D."""
    S = F.D if S is None else S
    lam = F.lam
    W_rel = np.zeros((F.vdim[X_PLUS], 0), dtype=np.int64)
    gens_local = []
    for g in n_representatives(F.spec, 1):
        gens_local.append(F.vertex_action(MatrixMap(g), X_PLUS))
    Wp = p_torsion_invariants(FinMod(lam, F.vdim[X_PLUS], W_rel), gens_local)
    n = _k_dim(Wp, W_rel, lam)
    verts = plus_window(F.q, S)
    d = F.boundary_matrix(verts)
    A = FinMod(lam, d.shape[0], d)
    hat = [_fixed_outside(a) for a in hat_n0_generators(F.spec, F.e, S + 1)]
    mats = [F.chain_action(a, verts)[0] for a in hat]
    inv_p = p_torsion_invariants(A, mats)
    dual_count = _k_dim(inv_p, d, lam)
    sig_p = linalg.length(F.transition(SIGMA, X_PLUS) % lam.p, Lambda(lam.p, 1))
    Dual = dualize(A)
    witnesses = []
    if dual_count:
        for j in _independent_columns(inv_p, d, lam):
            v = inv_p[:, j]
            for y in Dual.basis:
                if (y @ v) % lam.mod:
                    witnesses.append(y)
                    break
    generated = _generates(Dual, witnesses, mats) if witnesses else Dual.length() == 0
    return {
        "n": n,
        "dual_count": dual_count,
        "sigma_mod_p": sig_p,
        "generators": [w.tolist() for w in witnesses],
        "generates": bool(generated),
        "ok": dual_count <= n and dual_count == sig_p and generated,
    }


def _independent_columns(cols, relations, lam) -> list:
    """Indices of columns that are independent modulo the relations."""
    keep, L = [], 0
    for j in range(cols.shape[1]):
        L2 = linalg.quotient_length(cols[:, keep + [j]], relations, lam)
        if L2 > L:
            keep.append(j)
            L = L2
    return keep


def _generates(Dual: DualModule, ys, mats) -> bool:
    lam = Dual.module.lam
    rows = [np.asarray(y) % lam.mod for y in ys]
    cur = linalg.length(np.array(rows).T, lam)
    while True:
        new = rows + [(r @ M) % lam.mod for r in rows for M in mats]
        basis = _row_basis(new, lam)
        L = linalg.length(np.array(basis).T, lam)
        if L == cur:
            break
        rows, cur = basis, L
    return cur == Dual.length()


def _row_basis(rows, lam):
    out, L = [], 0
    for r in rows:
        cand = out + [r]
        L2 = linalg.length(np.array(cand).T, lam)
        if L2 > L:
            out, L = cand, L2
    return out


def qp_fact_check(F: CoeffSystem, S: int | None = None) -> dict:
    """Length of F(sigma) against H0(Z_+^(S))^(N_0^(1)); expected equal when q = p."""
    S = F.D if S is None else S
    verts = plus_window(F.q, S)
    d = F.boundary_matrix(verts)
    gens = []
    for c in F.spec.k.prime_basis():
        for j in range(S + 1):
            gens.append(MatrixMap(gmatrix(F.spec, [[1, {j: c}], [0, 1]])))
    mats = [transport(F, g, verts, verts) for g in gens]
    inv = linalg.quotient_invariants(d.shape[0], d, mats, F.lam)
    got = linalg.quotient_length(inv, d, F.lam)
    sig = linalg.length(F.transition(SIGMA, X_PLUS), F.lam)
    exploratory = F.spec.q != F.spec.p
    return {"sigma": sig, "invariants": got, "equal": got == sig, "gap": got - sig, "exploratory": exploratory}


# ---------------------------------------------------------------------------
# Iwasawa algebra for F = Q_p


@dataclass(frozen=True)
class IwasawaTruncSpec:
    p: int
    K: int
    r: int = 2
    e: int = 1
    degree: int = 6

    def field(self) -> LocalFieldSpec:
        return LocalFieldSpec(self.p, 1, "mixed", max(self.K + 2, 4))


def generators(spec: IwasawaTruncSpec) -> list:
    """(k, i) for 0 <= k <= K and i in Z/p^k."""
    return [(k, i) for k in range(spec.K + 1) for i in range(spec.p**k)]


def _rule(spec: IwasawaTruncSpec, a, b):
    """Rewrite of the adjacent pair a.b (a on the left), or None if in order.

    Level ascending, then index ascending.  A pair at a higher level on the
    left moves right past the lower one and its index shifts by p^l when
    the indices agree mod p^l.
    """
    (k, i), (l, j) = a, b
    if k > l:
        if i % spec.p**l == j % spec.p**l:
            return (b, (k, (i + spec.p**l) % spec.p**k))
        return (b, a)
    if k == l and i > j:
        return (b, a)
    return None


def iwasawa_normal_form(word: dict, spec: IwasawaTruncSpec, corrected: bool = False) -> dict:
    """Normal form of a Lambda-combination of words {tuple of (k, i): coefficient}.

    corrected=True adds the terms U_a - U_a' that the literal swap drops
    when the indices shift (the form valid in the group algebra).
    """
    mod = spec.p**spec.r
    out: dict = {}
    todo = [(tuple(w), c % mod) for w, c in word.items()]
    for w, _ in todo:
        if len(w) > spec.degree:
            raise ValueError("degree bound exceeded")
        for k, i in w:
            if not 0 <= k <= spec.K or not 0 <= i < spec.p**k:
                raise ValueError(f"generator {(k, i)} outside the truncation")
    while todo:
        w, c = todo.pop()
        if not c:
            continue
        for pos in range(len(w) - 1):
            r = _rule(spec, w[pos], w[pos + 1])
            if r is not None:
                todo.append((w[:pos] + r + w[pos + 2:], c))
                if corrected and r[1] != w[pos]:
                    todo.append((w[:pos] + (w[pos],) + w[pos + 2:], c))
                    todo.append((w[:pos] + (r[1],) + w[pos + 2:], -c))
                break
        else:
            out[w] = (out.get(w, 0) + c) % mod
    return {w: c for w, c in sorted(out.items()) if c}


def all_normal_forms(w: tuple, spec: IwasawaTruncSpec, corrected: bool = False) -> set:
    """Normal forms reached by every choice of rewrite position (confluence probe)."""
    mod = spec.p**spec.r

    @lru_cache(maxsize=None)
    def nf(word):
        results = set()
        moved = False
        for pos in range(len(word) - 1):
            r = _rule(spec, word[pos], word[pos + 1])
            if r is None:
                continue
            moved = True
            parts = [(word[:pos] + r + word[pos + 2:], 1)]
            if corrected and r[1] != word[pos]:
                parts += [(word[:pos] + (word[pos],) + word[pos + 2:], 1), (word[:pos] + (r[1],) + word[pos + 2:], -1)]
            options = [[(f, c) for f in nf(wd)] for wd, c in parts]
            for combo in itertools.product(*options):
                acc: dict = {}
                for (form, c) in combo:
                    for mono, coef in form:
                        acc[mono] = (acc.get(mono, 0) + c * coef) % mod
                results.add(tuple(sorted((m_, c_) for m_, c_ in acc.items() if c_)))
        if not moved:
            results.add(((word, 1),))
        return frozenset(results)

    return set(nf(tuple(w)))


# -- the finite group algebra ---------------------------------------------


@lru_cache(maxsize=None)
def _group_data(spec: IwasawaTruncSpec):
    """Permutation images of the e_i^(k) on O / p^(K+1)."""
    fs = spec.field()
    prec = spec.K + 1
    e = spec.e
    gens = {}
    for k in range(spec.K + 1):
        cls, idx = _classes(fs, k)
        for i in range(spec.p**k):
            val = fs.r_shift(fs.r_one(prec), k + e - 1, prec)
            h = h_elementary(fs, e, spec.K, prec, k, idx[fs.r_trunc(i, k)], val)
            gens[(k, i)] = h_perm(h, prec)
    one = h_perm(h_identity(fs, e, spec.K, prec), prec)
    return gens, one


def compose(P, Q) -> tuple:
    """P after Q."""
    return tuple(P[j] for j in Q)


def word_product(g, h) -> tuple:
    """Product g.h read left to right: g acts first."""
    return compose(h, g)


class GroupAlgebra:
    """(Z/p^r)[G] for G the image of H_K on O/p^(K+1); elements are {perm: coefficient}.

    Products are read left to right (the left factor acts first); with the
    opposite order the index shift in the commutation relations changes sign.
    """

    def __init__(self, spec: IwasawaTruncSpec):
        self.spec = spec
        self.mod = spec.p**spec.r
        self.gens, self.one_perm = _group_data(spec)

    def one(self):
        return {self.one_perm: 1}

    def e(self, g):
        return {self.gens[g]: 1}

    def U(self, g):
        return self.add(self.one(), self.scale(self.e(g), -1))

    def add(self, a, b):
        out = dict(a)
        for k, v in b.items():
            out[k] = (out.get(k, 0) + v) % self.mod
        return {k: v for k, v in out.items() if v}

    def scale(self, a, c):
        return {k: (v * c) % self.mod for k, v in a.items() if (v * c) % self.mod}

    def mul(self, a, b):
        out: dict = {}
        for g, x in a.items():
            for h, y in b.items():
                gh = word_product(g, h)
                out[gh] = (out.get(gh, 0) + x * y) % self.mod
        return {k: v for k, v in out.items() if v}

    def power(self, a, n):
        out = self.one()
        for _ in range(n):
            out = self.mul(out, a)
        return out

    def evaluate(self, word: dict):
        total: dict = {}
        for w, c in word.items():
            term = self.one()
            for g in w:
                term = self.mul(term, self.U(g))
            total = self.add(total, self.scale(term, c))
        return total


def _commutation_instances(spec: IwasawaTruncSpec):
    for a in generators(spec):
        for b in generators(spec):
            if a[0] >= b[0] and a != b:
                yield a, b


def iwasawa_vs_group(spec: IwasawaTruncSpec, corrected: bool = False) -> dict:
    """Evaluate every commutation and quotient relation in the finite group algebra.

    The group-level relations e_a e_b = e_b e_a' are checked as well.  With
    corrected=False the commutation relations are read literally on the
    U-generators.
    """
    if spec.K > 2 or spec.p > 3 or spec.r > 2:
        raise ValueError("outside the cost cap K <= 2, p <= 3, r <= 2")
    GA = GroupAlgebra(spec)
    records = []
    for a, b in _commutation_instances(spec):
        (k, i), (l, j) = a, b
        shifted = (k, (i + spec.p**l) % spec.p**k) if i % spec.p**l == j % spec.p**l else a
        grp = word_product(GA.gens[a], GA.gens[b]) == word_product(GA.gens[b], GA.gens[shifted])
        lhs = GA.mul(GA.U(a), GA.U(b))
        rhs = GA.mul(GA.U(b), GA.U(shifted))
        if corrected:
            rhs = GA.add(rhs, GA.add(GA.U(a), GA.scale(GA.U(shifted), -1)))
        records.append({"relation": f"U{a}*U{b}=U{b}*U{shifted}", "group": grp,
                        "algebra": not GA.add(lhs, GA.scale(rhs, -1))})
    quotient = []
    for k in range(1, spec.K + 1):
        for j in range(spec.p ** (k - 1)):
            prod = GA.one()
            for i in range(spec.p**k):
                if (i - j) % spec.p ** (k - 1) == 0:
                    prod = GA.mul(prod, GA.add(GA.one(), GA.scale(GA.U((k, i)), -1)))
            rhs = GA.power(GA.add(GA.one(), GA.scale(GA.U((k - 1, j)), -1)), spec.p)
            quotient.append({"relation": f"prod(1-U({k},i))=(1-U({k - 1},{j}))^{spec.p}",
                             "algebra": not GA.add(prod, GA.scale(rhs, -1))})
    ok_comm = all(r["algebra"] for r in records)
    ok_group = all(r["group"] for r in records)
    ok_quot = all(r["algebra"] for r in quotient)
    return {
        "ok": ok_comm and ok_quot,
        "commutation": ok_comm,
        "group_relations": ok_group,
        "quotient": ok_quot,
        "records": records,
        "quotient_records": quotient,
        "group_order": _group_order(GA),
    }


def _group_order(GA: GroupAlgebra) -> int:
    seen = {GA.one_perm}
    frontier = [GA.one_perm]
    gens = list(GA.gens.values())
    while frontier:
        new = []
        for x in frontier:
            for g in gens:
                y = compose(g, x)
                if y not in seen:
                    seen.add(y)
                    new.append(y)
        frontier = new
    return len(seen)


def normal_form_agrees(word: dict, spec: IwasawaTruncSpec, corrected: bool = True) -> bool:
    """The word and its normal form have the same value in the group algebra."""
    GA = GroupAlgebra(spec)
    a = GA.evaluate(word)
    b = GA.evaluate(iwasawa_normal_form(word, spec, corrected))
    return not GA.add(a, GA.scale(b, -1))

