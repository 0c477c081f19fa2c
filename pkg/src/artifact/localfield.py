"""
Truncated arithmetic in the ring of integers of a local field.

Two kinds of fields are supported:

* ``mixed``: F = Q_p. Elements of O/p^n are plain integers mod p^n.
* ``equal``: F = F_q((t)). Elements of O/t^n are tuples of n residue-field
  digits, where a residue-field element is an int 0..q-1 holding the base-p
  coefficients of a polynomial in the field generator.

OElem is an element of O known modulo the working precision N. FElem is
an element of F with capped absolute precision; it is what matrix entries
use when acting on the tree.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache


class PrecisionError(ArithmeticError):
    """Raised when a computation would need digits beyond the known precision."""


class AtLeast(int):
    """Valuation of a zero truncation: the true valuation is at least this."""

    def __repr__(self):
        return f"≥{int(self)}"

    __str__ = __repr__


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n**0.5) + 1))


# ---------------------------------------------------------------------------
# finite fields


def _poly_mulmod(a, b, modulus, p):
    f = len(modulus) - 1
    prod = [0] * (2 * f - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                prod[i + j] = (prod[i + j] + x * y) % p
    # reduce by the monic modulus
    for k in range(len(prod) - 1, f - 1, -1):
        c = prod[k]
        if c:
            for j in range(f + 1):
                prod[k - f + j] = (prod[k - f + j] - c * modulus[j]) % p
    return prod[:f]


def _irreducible(p: int, f: int) -> tuple:
    """Lexicographically first monic irreducible polynomial of degree f over F_p."""
    if f == 1:
        return (0, 1)
    for low in itertools.product(range(p), repeat=f):
        poly = tuple(low) + (1,)
        if poly[0] == 0:
            continue
        # no roots and no factor of degree <= f/2: brute force via the
        # multiplicative structure is simpler, so test x^(p^f) = x and
        # gcd-free condition by counting the order of x
        if _has_no_small_factor(poly, p):
            return poly
    raise ValueError("no irreducible polynomial found")


def _has_no_small_factor(poly, p):
    f = len(poly) - 1
    for d in range(1, f // 2 + 1):
        for low in itertools.product(range(p), repeat=d):
            g = list(low) + [1]
            if _poly_rem(list(poly), g, p) == [0] * d:
                return False
    return True


def _poly_rem(a, g, p):
    a = list(a)
    d = len(g) - 1
    for k in range(len(a) - 1, d - 1, -1):
        c = a[k]
        if c:
            for j in range(d + 1):
                a[k - d + j] = (a[k - d + j] - c * g[j]) % p
    return a[:d]


@lru_cache(maxsize=None)
def residue_field(p: int, f: int) -> "GF":
    return GF(p, f)


class GF:
    """The field with q = p^f elements, encoded as ints 0..q-1."""

    def __init__(self, p: int, f: int):
        if not _is_prime(p):
            raise ValueError(f"p must be prime, got {p}")
        if f < 1:
            raise ValueError("f must be >= 1")
        self.p, self.f, self.q = p, f, p**f
        self.modulus = _irreducible(p, f)
        q = self.q
        vecs = [self.to_vec(a) for a in range(q)]
        self.add_t = [[self.from_vec([(x + y) % p for x, y in zip(vecs[a], vecs[b])]) for b in range(q)] for a in range(q)]
        self.mul_t = [[self.from_vec(_poly_mulmod(vecs[a], vecs[b], self.modulus, p)) for b in range(q)] for a in range(q)]
        self.neg_t = [self.from_vec([(-x) % p for x in vecs[a]]) for a in range(q)]
        self.inv_t = [0] * q
        for a in range(1, q):
            self.inv_t[a] = next(b for b in range(1, q) if self.mul_t[a][b] == 1)

    def to_vec(self, a: int) -> list:
        return [(a // self.p**i) % self.p for i in range(self.f)]

    def from_vec(self, v) -> int:
        return sum(c * self.p**i for i, c in enumerate(v))

    def add(self, a, b):
        return self.add_t[a][b]

    def sub(self, a, b):
        return self.add_t[a][self.neg_t[b]]

    def mul(self, a, b):
        return self.mul_t[a][b]

    def neg(self, a):
        return self.neg_t[a]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in residue field")
        return self.inv_t[a]

    def pow(self, a, n):
        r = 1
        for _ in range(n):
            r = self.mul_t[r][a]
        return r

    def prime_basis(self):
        """An F_p-basis of the field: 1, x, ..., x^(f-1)."""
        return [self.p**i for i in range(self.f)]

    def __repr__(self):
        return f"GF({self.q})"


# ---------------------------------------------------------------------------
# field specs and raw arithmetic on O/pi^n


@dataclass(frozen=True)
class LocalFieldSpec:
    p: int
    f: int = 1
    kind: str = "mixed"
    N: int = 40

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"p must be prime, got {self.p}")
        if self.f < 1 or self.N < 1:
            raise ValueError("f and N must be positive")
        if self.kind not in ("mixed", "equal"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "mixed" and self.f != 1:
            raise ValueError("mixed characteristic is restricted to Q_p (f = 1)")

    @property
    def q(self) -> int:
        return self.p**self.f

    @property
    def k(self) -> GF:
        return residue_field(self.p, self.f)

    @property
    def mixed(self) -> bool:
        return self.kind == "mixed"

    def with_precision(self, N: int) -> "LocalFieldSpec":
        return LocalFieldSpec(self.p, self.f, self.kind, N)

    def to_dict(self) -> dict:
        return {"p": self.p, "f": self.f, "kind": self.kind, "N": self.N}

    # -- raw values of O/pi^n ------------------------------------------------

    def r_zero(self, n):
        return 0 if self.mixed else (0,) * n

    def r_one(self, n):
        if self.mixed:
            return 1 % self.p**n
        return ((1,) + (0,) * (n - 1)) if n else ()

    def r_from_digits(self, digits, n):
        """Raw value from a digit list (coefficient of pi^i at index i)."""
        digits = list(digits)[:n]
        if self.mixed:
            return sum(d * self.p**i for i, d in enumerate(digits)) % self.p**n
        return tuple(digits) + (0,) * (n - len(digits))

    def r_digits(self, a, n) -> list:
        if self.mixed:
            out = []
            for _ in range(n):
                a, d = divmod(a, self.p)
                out.append(d)
            return out
        return list(a[:n])

    def r_trunc(self, a, n):
        if self.mixed:
            return a % self.p**n
        return a[:n]

    def r_add(self, a, b, n):
        if self.mixed:
            return (a + b) % self.p**n
        add = self.k.add_t
        return tuple(add[x][y] for x, y in zip(a[:n], b[:n]))

    def r_neg(self, a, n):
        if self.mixed:
            return (-a) % self.p**n
        neg = self.k.neg_t
        return tuple(neg[x] for x in a[:n])

    def r_sub(self, a, b, n):
        return self.r_add(a, self.r_neg(b, n), n)

    def r_mul(self, a, b, n):
        if self.mixed:
            return (a * b) % self.p**n
        mul, add = self.k.mul_t, self.k.add_t
        out = [0] * n
        for i in range(n):
            x = a[i]
            if x:
                row = mul[x]
                for j in range(n - i):
                    y = b[j]
                    if y:
                        out[i + j] = add[out[i + j]][row[y]]
        return tuple(out)

    def r_val(self, a, n) -> int:
        """Valuation of a raw value; n if it is zero."""
        if self.mixed:
            if a == 0:
                return n
            v = 0
            while a % self.p == 0:
                a //= self.p
                v += 1
            return v
        for i in range(n):
            if a[i]:
                return i
        return n

    def r_shift(self, a, s, n):
        """pi^s * a, truncated to n digits."""
        if self.mixed:
            return (a * self.p**s) % self.p**n
        return ((0,) * s + tuple(a))[:n] + (0,) * max(0, n - s - len(a))

    def r_divpi(self, a, s):
        """Exact division by pi^s of a raw value divisible by pi^s."""
        if self.mixed:
            return a // self.p**s
        return tuple(a[s:])

    def r_inv(self, a, n):
        """Inverse of a unit of O/pi^n."""
        if n == 0:
            return self.r_zero(0)
        if self.mixed:
            return pow(a, -1, self.p**n)
        k = self.k
        if a[0] == 0:
            raise ZeroDivisionError("not a unit")
        inv0 = k.inv(a[0])
        out = [0] * n
        out[0] = inv0
        for i in range(1, n):
            s = 0
            for j in range(1, i + 1):
                if a[j] and out[i - j]:
                    s = k.add(s, k.mul(a[j], out[i - j]))
            out[i] = k.mul(k.neg(s), inv0)
        return tuple(out)

    # -- convenience constructors --------------------------------------------

    def elem(self, x) -> "OElem":
        """OElem from an int (Q_p) or from a digit sequence (either kind)."""
        if isinstance(x, int):
            if self.mixed:
                return OElem(self, x % self.p**self.N)
            return OElem(self, self.r_from_digits([x % self.p] if x % self.p else [], self.N))
        return OElem(self, self.r_from_digits(list(x), self.N))

    def zero(self) -> "OElem":
        return OElem(self, self.r_zero(self.N))

    def one(self) -> "OElem":
        return OElem(self, self.r_one(self.N))

    def uniformizer(self) -> "OElem":
        return OElem(self, self.r_shift(self.r_one(self.N), 1, self.N))

    def residue(self, c: int) -> "OElem":
        """The constant digit c (a Teichmuller-free lift for Q_p)."""
        return OElem(self, self.r_from_digits([c], self.N))

    def all_classes(self, m: int):
        """All raw values of O/pi^m, in digit-lexicographic order."""
        for digs in itertools.product(range(self.q), repeat=m):
            yield self.r_from_digits(list(reversed(digs)), m)


# ---------------------------------------------------------------------------
# elements of O


@dataclass(frozen=True)
class OElem:
    spec: LocalFieldSpec
    raw: object

    @property
    def digits(self) -> list:
        return self.spec.r_digits(self.raw, self.spec.N)

    def __add__(self, other):
        return arith("add", self, other)

    def __mul__(self, other):
        return arith("mul", self, other)

    def __neg__(self):
        return arith("neg", self)

    def __sub__(self, other):
        return arith("add", self, arith("neg", other))

    def __repr__(self):
        return f"OElem({self.digits})"


def arith(op: str, a: OElem, b: OElem | None = None) -> OElem:
    """Ring operation on OElems modulo the working precision."""
    s = a.spec
    if b is not None and b.spec != s:
        raise ValueError("operands have different field specs")
    if op == "add":
        return OElem(s, s.r_add(a.raw, b.raw, s.N))
    if op == "mul":
        return OElem(s, s.r_mul(a.raw, b.raw, s.N))
    if op == "neg":
        return OElem(s, s.r_neg(a.raw, s.N))
    raise ValueError(f"unknown op {op!r}")


def valuation(a: OElem) -> int:
    """Index of the lowest nonzero digit, or AtLeast(N) for zero."""
    v = a.spec.r_val(a.raw, a.spec.N)
    return AtLeast(v) if v >= a.spec.N else v


def quotient_class(a: OElem, m: int):
    """The class of a in O/pi^m, as a raw value."""
    if m > a.spec.N:
        raise PrecisionError(f"class mod pi^{m} needs more than {a.spec.N} digits")
    if m < 0:
        raise ValueError("m must be >= 0")
    return a.spec.r_trunc(a.raw, m)


# ---------------------------------------------------------------------------
# elements of F with capped absolute precision


@dataclass(frozen=True)
class FElem:
    """pi^val * unit, with unit known modulo pi^rel; unit None means zero mod pi^val."""

    spec: LocalFieldSpec
    val: int
    unit: object = None
    rel: int = 0

    @property
    def is_zero(self):
        return self.unit is None

    @property
    def prec(self) -> int:
        """Absolute precision: the element is known modulo pi^prec."""
        return self.val + self.rel

    def __add__(self, other):
        return f_add(self, other)

    def __sub__(self, other):
        return f_add(self, f_neg(other))

    def __mul__(self, other):
        return f_mul(self, other)

    def __neg__(self):
        return f_neg(self)

    def digits_to(self, m: int) -> dict:
        """Digits {exponent: digit} of the class modulo pi^m (nonzero digits only)."""
        if m > self.prec:
            raise PrecisionError(f"need precision {m}, have {self.prec}")
        if self.is_zero or m <= self.val:
            return {}
        ds = self.spec.r_digits(self.unit, m - self.val)
        return {self.val + i: d for i, d in enumerate(ds) if d}

    def __repr__(self):
        if self.is_zero:
            return f"FElem(0 mod pi^{self.val})"
        return f"FElem(pi^{self.val}*{self.spec.r_digits(self.unit, self.rel)})"


def f_make(spec: LocalFieldSpec, digits: dict, prec: int) -> FElem:
    """FElem from {exponent: digit}, known modulo pi^prec."""
    items = sorted((e, d) for e, d in digits.items() if d and e < prec)
    if not items:
        return FElem(spec, prec)
    lo = items[0][0]
    n = prec - lo
    ds = [0] * n
    if spec.mixed:
        raw = sum(d * spec.p ** (e - lo) for e, d in items) % spec.p**n
        return _normalize(spec, lo, raw, n)
    for e, d in items:
        ds[e - lo] = d
    return FElem(spec, lo, tuple(ds), n)


def f_from_int(spec: LocalFieldSpec, x, prec: int) -> FElem:
    """FElem from an int or Fraction with p-power denominator (Q_p only)."""
    if not spec.mixed:
        raise ValueError("integer constructor needs Q_p")
    x = Fraction(x)
    if x == 0:
        return FElem(spec, prec)
    p = spec.p
    num, den = x.numerator, x.denominator
    v = 0
    while den % p == 0:
        den //= p
        v -= 1
    if den != 1:
        raise ValueError("denominator must be a power of p")
    while num % p == 0:
        num //= p
        v += 1
    if v >= prec:
        return FElem(spec, prec)
    n = prec - v
    return FElem(spec, v, num % p**n, n)


def f_scalar(spec: LocalFieldSpec, c: int, exp: int, prec: int) -> FElem:
    """The element c * pi^exp for a residue digit c."""
    return f_make(spec, {exp: c}, prec)


def _normalize(spec, base, raw, n) -> FElem:
    """Element pi^base * raw, raw known mod pi^n, put into canonical form."""
    w = spec.r_val(raw, n)
    if w >= n:
        return FElem(spec, base + n)
    return FElem(spec, base + w, spec.r_divpi(raw, w), n - w)


def f_add(a: FElem, b: FElem) -> FElem:
    s = a.spec
    prec = min(a.prec, b.prec)
    nz = [x for x in (a, b) if not x.is_zero and x.val < prec]
    if not nz:
        return FElem(s, prec)
    base = min(x.val for x in nz)
    n = prec - base
    acc = s.r_zero(n)
    for x in nz:
        acc = s.r_add(acc, s.r_shift(s.r_trunc(x.unit, prec - x.val), x.val - base, n), n)
    return _normalize(s, base, acc, n)


def f_neg(a: FElem) -> FElem:
    if a.is_zero:
        return a
    return FElem(a.spec, a.val, a.spec.r_neg(a.unit, a.rel), a.rel)


def f_mul(a: FElem, b: FElem) -> FElem:
    s = a.spec
    if a.is_zero and b.is_zero:
        return FElem(s, a.val + b.val)
    if a.is_zero:
        return FElem(s, a.val + b.val)
    if b.is_zero:
        return FElem(s, a.val + b.val)
    n = min(a.rel, b.rel)
    return FElem(s, a.val + b.val, s.r_mul(s.r_trunc(a.unit, n), s.r_trunc(b.unit, n), n), n)


def f_inv(a: FElem) -> FElem:
    if a.is_zero:
        raise PrecisionError("cannot invert an element indistinguishable from zero")
    return FElem(a.spec, -a.val, a.spec.r_inv(a.unit, a.rel), a.rel)


def f_val(a: FElem) -> int:
    """Valuation; raises if the element is zero to its known precision."""
    if a.is_zero:
        raise PrecisionError(f"valuation unknown: element is 0 mod pi^{a.val}")
    return a.val


def f_is_integral(a: FElem) -> bool:
    return a.is_zero and a.val >= 0 or not a.is_zero and a.val >= 0


# ---------------------------------------------------------------------------
# extensions and traces


@dataclass(frozen=True)
class ExtensionData:
    """F = F_{q^a}((t)) over E = F_q((s)) with s = t^ram, or the trivial Q_p/Q_p."""

    F: LocalFieldSpec
    E: LocalFieldSpec
    ram: int = 1
    embed: tuple = field(default=(), compare=False)
    trace_res: tuple = field(default=(), compare=False)

    @property
    def degree(self) -> int:
        return self.ram * (self.F.f // self.E.f)


def make_extension(F: LocalFieldSpec, E: LocalFieldSpec, ram: int = 1) -> ExtensionData:
    """Build inclusion and trace tables for the residue fields."""
    if F.p != E.p or F.kind != E.kind:
        raise ValueError("F and E must share p and kind")
    if F.mixed:
        if ram != 1:
            raise ValueError("only the trivial extension is supported for Q_p")
        return ExtensionData(F, E, 1, (0, *range(1, E.q)), tuple(range(F.q)))
    if F.f % E.f:
        raise ValueError("residue degree of E must divide that of F")
    kF, kE = F.k, E.k
    a = F.f // E.f
    # root of E's modulus polynomial in F's residue field gives the inclusion
    mod = kE.modulus
    root = None
    for beta in range(kF.q):
        val, pw = 0, 1
        for c in mod:
            # c is an F_p coefficient, which is the int c in both fields
            val = kF.add(val, kF.mul(c % kF.p, pw))
            pw = kF.mul(pw, beta)
        if val == 0 and (E.f == 1 or beta not in range(kF.p)):
            root = beta
            break
    if E.f == 1:
        embed = tuple(range(E.q))
    else:
        embed = []
        for x in range(kE.q):
            acc, pw = 0, 1
            for c in kE.to_vec(x):
                acc = kF.add(acc, kF.mul(c, pw))
                pw = kF.mul(pw, root)
            embed.append(acc)
        embed = tuple(embed)
    back = {v: i for i, v in enumerate(embed)}
    tr = []
    for y in range(kF.q):
        acc, cur = 0, y
        for _ in range(a):
            acc = kF.add(acc, cur)
            cur = kF.pow(cur, kE.q)
        tr.append(back[acc])
    return ExtensionData(F, E, ram, embed, tuple(tr))


def trace_residue(ext: ExtensionData, y: int) -> int:
    return ext.trace_res[y]


def trace_to_subfield(ext: ExtensionData, a: OElem) -> OElem:
    """trace_{F/E}: sum_j a_j t^j -> sum_{j = 0 mod e} e * Tr(a_j) s^(j/e)."""
    F, E = ext.F, ext.E
    if a.spec != F:
        raise ValueError("element does not belong to F")
    if F.mixed:
        return OElem(E, E.r_trunc(a.raw, E.N))
    known = -(-F.N // ext.ram)
    if E.N > known:
        raise PrecisionError(f"trace known to {known} digits, E needs {E.N}")
    ds = a.digits
    out = [0] * E.N
    kE = E.k
    for j in range(0, F.N, ext.ram):
        if j // ext.ram < E.N:
            t = ext.trace_res[ds[j]]
            acc = 0
            for _ in range(ext.ram):
                acc = kE.add(acc, t)
            out[j // ext.ram] = acc
    return OElem(E, E.r_from_digits(out, E.N))


def trace_digits(ext: ExtensionData, digits: dict) -> dict:
    """Trace of a finite digit expansion {exp: digit} of F, as {exp: digit} of E."""
    kE = ext.E.k
    out = {}
    for j, d in digits.items():
        if j % ext.ram == 0:
            t = ext.trace_res[d]
            acc = 0
            for _ in range(ext.ram):
                acc = kE.add(acc, t)
            if acc:
                out[j // ext.ram] = kE.add(out.get(j // ext.ram, 0), acc)
    return {k: v for k, v in out.items() if v}


def embed_digits(ext: ExtensionData, digits: dict) -> dict:
    """Inclusion E -> F on finite digit expansions: s^j -> t^(ram*j)."""
    return {ext.ram * j: ext.embed[d] for j, d in digits.items() if d}
