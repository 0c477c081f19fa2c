"""One test per acceptance criterion; each prints a PASS/FAIL line.

Two criteria disagree with exact computation and are strict xfails: the
index formula at (q, e, m) = (3, 2, 1) and the literal reading of the
Iwasawa commutation relations.  The companion tests below them check what
does hold.
"""
import time
from collections import deque

import pytest

from artifact.coeff import build_system, check_invariants_bijection, roundtrip
from artifact.hecke import kernel_window_check, packet_invariants, trivial_operator
from artifact.linalg import Lambda
from artifact.localfield import LocalFieldSpec
from artifact.locaut import check_propexp, closure_image_order, conjugate_index, hat_u_generators, is_p_power
from artifact.phigamma import (
    IwasawaTruncSpec,
    build_pair,
    check_etale,
    generator_bound,
    iwasawa_vs_group,
    qp_fact_check,
)
from artifact.tree import SIGMA, ball, distance, edges_within, neighbors

SYSTEMS = ("constant", "steinberg")


def field(q):
    return LocalFieldSpec({2: 2, 3: 3, 4: 2}[q], {2: 1, 3: 1, 4: 2}[q], "equal", 20)


def test_criterion_01_tree_metric(verdict):
    t0 = time.perf_counter()
    bad = []
    for q in (2, 3):
        verts = ball(SIGMA, 4, q)
        vs = set(verts)
        for a in verts:
            seen, dq = {a: 0}, deque([a])
            while dq:
                v = dq.popleft()
                for w in neighbors(v, q):
                    if w in vs and w not in seen:
                        seen[w] = seen[v] + 1
                        dq.append(w)
            bad += [(q, a, b) for b in verts if seen[b] != distance(a, b)]
    dt = time.perf_counter() - t0
    assert verdict(1, not bad and dt < 5, f"distance = BFS distance on Z^(4)(sigma), q in {{2,3}} ({dt:.1f}s)")


def test_criterion_02_pro_p(verdict):
    t0 = time.perf_counter()
    orders = {}
    for q in (2, 3):
        for e in (1, 2):
            for m in (1, 2):
                orders[(q, e, m)] = closure_image_order(hat_u_generators(field(q), e, m), m)
    dt = time.perf_counter() - t0
    ok = all(is_p_power(n, q) for (q, _, _), n in orders.items()) and dt < 60
    assert verdict(2, ok, f"closure orders are p-powers: {orders} ({dt:.1f}s)")


INDEX_CASES = [((2, 1, 1), 2), ((2, 1, 2), 8), ((3, 2, 1), 9)]


@pytest.mark.xfail(strict=True, reason="exhaustive index at (q,e,m)=(3,2,1) is 3, the product formula gives 9")
def test_criterion_03_index_formula(verdict):
    t0 = time.perf_counter()
    got = {c: conjugate_index(field(c[0]), c[1], c[2])["index"] for c, _ in INDEX_CASES}
    dt = time.perf_counter() - t0
    want = dict(INDEX_CASES)
    assert verdict(3, got == want and dt < 60, f"conjugate_index {got} against {want} ({dt:.1f}s)")


@pytest.mark.parametrize("case,index", INDEX_CASES[:2])
def test_criterion_03_index_formula_where_it_holds(case, index):
    q, e, m = case
    r = conjugate_index(field(q), e, m)
    assert r["index"] == r["formula"] == index


def test_criterion_03_index_at_q3_computed_value():
    r = conjugate_index(field(3), 2, 1)
    assert (r["index"], r["order"], r["formula"]) == (3, 81, 9)


def test_criterion_04_presentation(verdict):
    t0 = time.perf_counter()
    res = {e: check_propexp(LocalFieldSpec(2, 1, "mixed", 8), e, 1) for e in (1, 2)}
    dt = time.perf_counter() - t0
    ok = all(r["ok"] for r in res.values()) and dt < 120
    assert verdict(4, ok, f"H_1 / im(boundary) acts faithfully, p=q=2, e in {{1,2}} ({dt:.1f}s)")


@pytest.mark.xfail(strict=True, reason="U-generator commutation relations with an index shift fail literally")
def test_criterion_05_iwasawa_relations(verdict):
    t0 = time.perf_counter()
    r = iwasawa_vs_group(IwasawaTruncSpec(2, 1, 2))
    dt = time.perf_counter() - t0
    bad = [x["relation"] for x in r["records"] if not x["algebra"]]
    assert verdict(5, r["ok"] and dt < 30, f"commutation {r['commutation']} quotient {r['quotient']}; failing {bad}")


def test_criterion_05_what_holds():
    spec = IwasawaTruncSpec(2, 1, 2)
    r = iwasawa_vs_group(spec)
    assert r["quotient"] and r["group_relations"]
    assert iwasawa_vs_group(spec, corrected=True)["ok"]


def test_criterion_06_invariants_bijection(verdict):
    t0 = time.perf_counter()
    res = {}
    for kind in SYSTEMS:
        F = build_system(kind, 1, 4, field(2), Lambda(2, 1))
        r = check_invariants_bijection(F, 4 - 2)
        res[kind] = (r["invariants"], r["sigma"], r["ok"])
    dt = time.perf_counter() - t0
    ok = all(inv == sig and good for inv, sig, good in res.values()) and dt < 60
    assert verdict(6, ok, f"(length H0^hat-U, length F(sigma), ok) {res} ({dt:.1f}s)")


def test_criterion_07_roundtrip(verdict):
    t0 = time.perf_counter()
    res = {}
    for kind in SYSTEMS:
        r = roundtrip(build_system(kind, 1, 4, field(2), Lambda(2, 1)), 4, 2)
        res[kind] = (r["checked_edges"], r["checked_vertices"], r["ok"])
    dt = time.perf_counter() - t0
    ok = all(good and edges > 0 for edges, _, good in res.values()) and dt < 60
    assert verdict(7, ok, f"(edges, vertices, match) {res} ({dt:.1f}s)")


def test_criterion_08_hecke_dimension(verdict):
    t0 = time.perf_counter()
    op = trivial_operator(field(2), Lambda(2, 1))
    dims = {(ev, D): packet_invariants(op, ev, D)["length"] for ev in (0, 1) for D in (3, 4)}
    dt = time.perf_counter() - t0
    ok = set(dims.values()) == {2} and dt < 120
    assert verdict(8, ok, f"invariant length {dims} ({dt:.1f}s)")


def test_criterion_09_kernel(verdict):
    t0 = time.perf_counter()
    op = trivial_operator(field(2), Lambda(2, 1))
    edges = edges_within(ball(SIGMA, 2, 2))
    bad = [(ev, eta) for ev in (0, 1) for eta in edges if not kernel_window_check(op, ev, eta, 4)]
    dt = time.perf_counter() - t0
    ok = not bad and dt < 30
    assert verdict(9, ok, f"(T - lambda) b on one edge forces b = 0 for {len(edges)} edges ({dt:.1f}s)")


def test_criterion_10_etale(verdict):
    t0 = time.perf_counter()
    res = {}
    for kind in SYSTEMS:
        for m in (1, 2):
            F = build_system(kind, 1, m + 3, field(2), Lambda(2, 1))
            res[(kind, m)] = check_etale(build_pair(F), m)["ok"]
    dt = time.perf_counter() - t0
    ok = all(res.values()) and dt < 60
    assert verdict(10, ok, f"etale identities {res} ({dt:.1f}s)")


def test_criterion_11_nakayama(verdict):
    t0 = time.perf_counter()
    res = {}
    for kind in SYSTEMS:
        r = generator_bound(build_system(kind, 1, 4, field(2), Lambda(2, 1)), 3)
        res[kind] = (r["n"], len(r["generators"]), r["generates"])
    dt = time.perf_counter() - t0
    ok = all(v == (1, 1, True) for v in res.values()) and dt < 30
    assert verdict(11, ok, f"(n, generators, generates) {res} ({dt:.1f}s)")


def test_criterion_12_qp_fact(verdict):
    t0 = time.perf_counter()
    res = {}
    for kind in SYSTEMS:
        r = qp_fact_check(build_system(kind, 1, 4, field(2), Lambda(2, 1)), 3)
        res[kind] = r["equal"] and not r["exploratory"]
    # exploratory at q = 4: recorded, never asserted
    gaps = {}
    for kind in SYSTEMS:
        r = qp_fact_check(build_system(kind, 1, 3, field(4), Lambda(2, 1)), 2)
        gaps[kind] = (r["gap"], r["exploratory"])
    dt = time.perf_counter() - t0
    ok = all(res.values()) and dt < 60
    assert verdict(12, ok, f"equality at q=2 {res}; q=4 (gap, exploratory) {gaps} ({dt:.1f}s)")
