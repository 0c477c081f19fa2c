import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.coeff import FinMod, build_system
from artifact.linalg import Lambda
from artifact.localfield import LocalFieldSpec
from artifact.phigamma import (
    GroupAlgebra,
    IwasawaTruncSpec,
    all_normal_forms,
    boundary_injective,
    build_pair,
    check_etale,
    dualize,
    generator_bound,
    generators,
    half_tree_modules,
    iwasawa_normal_form,
    iwasawa_vs_group,
    n_representatives,
    normal_form_agrees,
    qp_fact_check,
    support_decompose,
)

Q2 = LocalFieldSpec(2, 1, "equal", 20)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 4), st.data())
def test_dual_has_the_same_length(n, k, data):
    lam = Lambda(2, 3)
    rel = np.array(data.draw(st.lists(st.integers(0, 7), min_size=n * k, max_size=n * k)), dtype=np.int64)
    M = FinMod(lam, n, rel.reshape(n, k))
    Dual = dualize(M)
    assert Dual.length() == M.length()
    assert not ((Dual.basis @ M.relations) % lam.mod).any()


def test_dual_small():
    lam = Lambda(2, 2)
    M = FinMod(lam, 1, np.array([[2]]))
    Dual = dualize(M)
    assert Dual.length() == 1
    assert Dual.pairing([1]).tolist() == [2]


@pytest.mark.parametrize("kind,a_len", [("constant", 1), ("steinberg", 16)])
def test_half_tree_modules(kind, a_len):
    # H0 of a finite subtree is its Euler characteristic; B drops F(sigma)
    F = build_system(kind, 1, 4, Q2, Lambda(2, 1))
    verts, A, B, _ = half_tree_modules(F, 3)
    assert len(verts) == 15
    assert A.length() == a_len and B.length() == a_len - 1


@pytest.mark.parametrize("kind", ["constant", "steinberg"])
def test_pair_structure(kind):
    F = build_system(kind, 1, 4, Q2, Lambda(2, 2))
    pair = build_pair(F)
    assert boundary_injective(pair)
    assert pair.coker_length() == 2
    with pytest.raises(ValueError):
        build_pair(F, 5)
    with pytest.raises(ValueError):
        build_pair(build_system("doubled", 1, 3, Q2, Lambda(2, 1)))


@pytest.mark.parametrize("kind", ["constant", "steinberg"])
def test_support_decompose(kind):
    F = build_system(kind, 1, 4, Q2, Lambda(2, 1))
    verts, A, _, _ = half_tree_modules(F, 3)
    vo = F.offsets(verts, [])[0]
    n = A.gens
    for v in verts[:4]:
        c = np.zeros(n, dtype=np.int64)
        c[vo[v]] = 1
        r = support_decompose(F, c, 2, 3)
        assert r["ok"]
    with pytest.raises(ValueError):
        support_decompose(F, c, 4, 3)


def test_n_representatives():
    assert len(n_representatives(Q2, 2)) == 4
    assert len(n_representatives(LocalFieldSpec(3, 1, "equal", 8), 1)) == 3


@pytest.mark.parametrize("kind", ["constant", "steinberg"])
def test_etale_identities(kind):
    F = build_system(kind, 1, 4, Q2, Lambda(2, 1))
    r = check_etale(build_pair(F), 1)
    assert r["ok"] and r["psi_well_defined"] and r["phi_well_defined"]
    assert check_etale(build_pair(F), 0)["vacuous"]
    with pytest.raises(ValueError):
        check_etale(build_pair(F), 3)


@pytest.mark.parametrize("kind", ["constant", "steinberg"])
def test_generator_bound(kind):
    F = build_system(kind, 1, 4, Q2, Lambda(2, 2))
    r = generator_bound(F, 3)
    assert r["ok"] and r["n"] == 1 and r["dual_count"] == 1 and r["generates"]
    assert len(r["generators"]) == 1


@pytest.mark.parametrize("p,f,exploratory", [(2, 1, False), (3, 1, False), (2, 2, True)])
@pytest.mark.parametrize("kind", ["constant", "steinberg"])
def test_qp_fact(p, f, exploratory, kind):
    F = build_system(kind, 1, 3, LocalFieldSpec(p, f, "equal", 20), Lambda(p, 1))
    r = qp_fact_check(F, 2)
    assert r["exploratory"] == exploratory
    if not exploratory:
        assert r["equal"] and r["gap"] == 0


# -- Iwasawa algebra --------------------------------------------------------

S21 = IwasawaTruncSpec(2, 1, 2)


def test_normal_form_examples():
    assert iwasawa_normal_form({((1, 0), (0, 0)): 1}, S21) == {((0, 0), (1, 1)): 1}
    assert iwasawa_normal_form({((1, 1), (0, 0)): 1}, S21) == {((0, 0), (1, 0)): 1}
    ordered = ((0, 0), (1, 0), (1, 1))
    assert iwasawa_normal_form({ordered: 3}, S21) == {ordered: 3}
    assert iwasawa_normal_form({ordered: 4}, S21) == {}
    with pytest.raises(ValueError):
        iwasawa_normal_form({((2, 0),): 1}, S21)
    with pytest.raises(ValueError):
        iwasawa_normal_form({((0, 0),) * 7: 1}, S21)


@pytest.mark.parametrize("spec", [IwasawaTruncSpec(2, 1, 2), IwasawaTruncSpec(3, 1, 1), IwasawaTruncSpec(2, 2, 1)],
                         ids=["p2K1", "p3K1", "p2K2"])
def test_rewriting_confluent_and_sound(spec):
    for n in (1, 2, 3):
        for w in itertools.product(generators(spec), repeat=n):
            assert len(all_normal_forms(w, spec, True)) == 1
            assert normal_form_agrees({w: 1}, spec)


@pytest.mark.parametrize("pk,order", [((2, 1), 8), ((3, 1), 81), ((2, 2), 128)])
def test_group_relations(pk, order):
    spec = IwasawaTruncSpec(*pk, r=2)
    r = iwasawa_vs_group(spec)
    assert r["group_order"] == order
    assert r["group_relations"] and r["quotient"]
    assert iwasawa_vs_group(spec, corrected=True)["ok"]


def test_group_algebra_basics():
    GA = GroupAlgebra(S21)
    # e at level k translates by p^k on O/p^(K+1), so it has order p^(K+1-k)
    for g in generators(S21):
        n = 2 ** (S21.K + 1 - g[0])
        assert GA.power(GA.e(g), n) == GA.one() and GA.power(GA.e(g), n // 2) != GA.one()
    with pytest.raises(ValueError):
        iwasawa_vs_group(IwasawaTruncSpec(5, 1))
