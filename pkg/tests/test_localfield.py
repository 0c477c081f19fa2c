import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import GF as SGF
from sympy import Poly, symbols

from artifact.localfield import (
    GF,
    LocalFieldSpec,
    PrecisionError,
    f_add,
    f_from_int,
    f_inv,
    f_make,
    f_mul,
    f_val,
    quotient_class,
    valuation,
)

FIELDS = [(2, 1), (3, 1), (2, 2), (5, 1), (3, 2)]


@pytest.mark.parametrize("p,f", FIELDS)
def test_residue_field_axioms(p, f):
    k = GF(p, f)
    q = k.q
    for a, b, c in itertools.product(range(q), repeat=3):
        assert k.mul(a, k.add(b, c)) == k.add(k.mul(a, b), k.mul(a, c))
    for a in range(1, q):
        assert k.mul(a, k.inv(a)) == 1
        assert k.pow(a, q - 1) == 1
    # the multiplicative group is cyclic of order q - 1
    orders = []
    for a in range(1, q):
        n, x = 1, a
        while x != 1:
            x, n = k.mul(x, a), n + 1
        orders.append(n)
    assert max(orders) == q - 1


def test_bad_specs():
    with pytest.raises(ValueError):
        LocalFieldSpec(4)
    with pytest.raises(ValueError):
        LocalFieldSpec(2, 2, "mixed")
    with pytest.raises(ValueError):
        LocalFieldSpec(2, 1, "Fp_t")


digits = st.lists(st.integers(0, 1), min_size=6, max_size=6)


@given(digits, digits)
def test_equal_char_mul_matches_polynomials(a, b):
    # F_2[[t]] mod t^6 against sympy polynomial arithmetic
    spec = LocalFieldSpec(2, 1, "equal", 6)
    t = symbols("t")
    pa = Poly(list(reversed(a)), t, domain=SGF(2))
    pb = Poly(list(reversed(b)), t, domain=SGF(2))
    prod = (pa * pb).all_coeffs()[::-1]
    want = [int(c) % 2 for c in prod][:6] + [0] * max(0, 6 - len(prod))
    got = spec.r_digits(spec.r_mul(spec.r_from_digits(a, 6), spec.r_from_digits(b, 6), 6), 6)
    assert got == want


@given(st.integers(0, 3**8 - 1), st.integers(0, 3**8 - 1))
def test_mixed_matches_integers(a, b):
    spec = LocalFieldSpec(3, 1, "mixed", 8)
    assert spec.r_mul(a, b, 8) == a * b % 3**8
    assert spec.r_add(a, b, 8) == (a + b) % 3**8
    assert spec.r_from_digits(spec.r_digits(a, 8), 8) == a


@settings(max_examples=60)
@given(st.sampled_from([(2, 1, "equal"), (2, 2, "equal"), (3, 1, "equal"), (2, 1, "mixed"), (3, 1, "mixed")]),
       st.data())
def test_unit_inverse(kind, data):
    p, f, k = kind
    spec = LocalFieldSpec(p, f, k, 7)
    ds = [data.draw(st.integers(1, spec.q - 1))] + data.draw(
        st.lists(st.integers(0, spec.q - 1), min_size=6, max_size=6))
    if k == "mixed":
        ds = [d % p for d in ds]
        ds[0] = ds[0] or 1
    a = spec.r_from_digits(ds, 7)
    assert spec.r_mul(a, spec.r_inv(a, 7), 7) == spec.r_one(7)


def test_valuation_and_classes():
    spec = LocalFieldSpec(2, 1, "equal", 10)
    x = spec.uniformizer() * spec.uniformizer()
    assert valuation(x) == 2
    assert valuation(spec.zero()) == 10
    assert quotient_class(x, 2) == (0, 0)
    with pytest.raises(PrecisionError):
        quotient_class(x, 11)
    assert len(list(spec.all_classes(3))) == 8
    assert len(set(LocalFieldSpec(2, 2, "equal", 4).all_classes(2))) == 16


def test_felem_arithmetic():
    spec = LocalFieldSpec(3, 1, "mixed", 10)
    x = f_from_int(spec, 18, 10)  # 2 * 3^2
    assert f_val(x) == 2
    y = f_inv(x)
    assert f_val(y) == -2
    one = f_mul(x, y)
    assert one.digits_to(one.prec) == {0: 1}
    z = f_add(x, f_make(spec, {2: 1}, 10))  # 3 * 3^2 = 3^3
    assert f_val(z) == 3
    with pytest.raises(PrecisionError):
        f_val(f_add(x, f_from_int(spec, -18, 10)))
    with pytest.raises(ValueError):
        f_from_int(spec, Fraction(1, 2), 10)


def test_felem_precision_propagates():
    spec = LocalFieldSpec(2, 1, "equal", 8)
    a = f_make(spec, {-1: 1, 0: 1}, 5)
    assert a.prec == 5 and a.val == -1
    b = f_mul(a, a)
    assert b.val == -2 and b.prec == 4
