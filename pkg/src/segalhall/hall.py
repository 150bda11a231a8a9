"""Hall algebra of a finitary proto-exact instance.

Structure constants are computed by two independent routes that the test
suite compares but this module never conflates: direct counting of
admissible subobject sites, and the automorphism/extension formula
|Aut V| / (|Aut U| |Aut W|) * |Ext^1(W,U)_V| / |Hom(W,U)|.  The product is
the bilinear extension of 1_U * 1_W = sum_V c^V_{U,W} 1_V, where c^V_{U,W}
counts subobjects of V isomorphic to U with quotient isomorphic to W; the
sum is graded, supported in size |U| + |W|.

The numerical coproduct is deliberately not given by a formula.  It is
computed from the conflation groupoid by linearized pull-push along the
face maps of the S-construction (pull along the middle face, push along the
outer pair), so coassociativity is a genuine machine check rather than an
identity built into the code.

Coefficients are exact rationals at a fixed instance; symbolic behavior in
q is recovered by interpolating structure constants across a family of
instances (hall_polynomial), with a holdout prime guarding against
overfitting the degree bound.
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

from . import budget
from .groupoids import (
    LinFunction,
    lin_pullback,
    lin_pushforward,
    pair_into_product,
    product_groupoid,
)
from .sconstruction import s_construction
from .util import frac_kernel_basis, frac_rank


def _size_sum(a, b):
    if isinstance(a, tuple):
        return tuple(x + y for x, y in zip(a, b))
    return a + b


def _size_le(a, b) -> bool:
    if isinstance(a, tuple):
        return all(x <= y for x, y in zip(a, b))
    return a <= b


def _size_nonzero(s) -> bool:
    return any(s) if isinstance(s, tuple) else s != 0


def _size_sort(s):
    return s if isinstance(s, tuple) else (s,)


# -- elements ------------------------------------------------------------------


class HallElement:
    """Finitely supported rational combination of iso classes of one instance.

    Supports +, -, scalar .scale, and * (the Hall product).  Zero
    coefficients are pruned so equality is support-wise.
    """

    __slots__ = ("instance", "coeffs")

    def __init__(self, instance, coeffs=None):
        self.instance = instance
        clean = {}
        for k, v in (coeffs or {}).items():
            v = Fraction(v)
            if v:
                clean[k] = v
        self.coeffs = clean

    def __add__(self, other: "HallElement") -> "HallElement":
        if self.instance is not other.instance:
            raise ValueError("elements live over different instances")
        vals = dict(self.coeffs)
        for k, v in other.coeffs.items():
            vals[k] = vals.get(k, Fraction(0)) + v
        return HallElement(self.instance, vals)

    def __sub__(self, other: "HallElement") -> "HallElement":
        return self + other.scale(-1)

    def __neg__(self) -> "HallElement":
        return self.scale(-1)

    def scale(self, c) -> "HallElement":
        c = Fraction(c)
        return HallElement(self.instance,
                           {k: c * v for k, v in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, HallElement):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other):
        return (isinstance(other, HallElement)
                and self.instance is other.instance
                and self.coeffs == other.coeffs)

    def __bool__(self):
        return bool(self.coeffs)

    def terms(self):
        """(key, coefficient) pairs in the deterministic basis order."""
        inst = self.instance
        return sorted(
            self.coeffs.items(),
            key=lambda kv: (_size_sort(inst.size_of_key(kv[0])),
                            inst.format_key(kv[0])),
        )

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(
            f"{v}*[{self.instance.format_key(k)}]" for k, v in self.terms()
        )


def delta(inst, key) -> HallElement:
    """The basis element 1_key.  Round-trips the key to catch foreign keys."""
    if inst.iso_key(inst.object_of_key(key)) != key:
        raise ValueError(f"{key!r} is not a canonical iso key of {inst.name}")
    return HallElement(inst, {key: Fraction(1)})


def hall_unit(inst) -> HallElement:
    return HallElement(inst, {inst.zero_key(): Fraction(1)})


def basis_keys(inst, cap):
    """Iso-class keys with size under the cap, deterministically ordered."""
    seen = set()
    out = []
    for s in inst.sizes_upto(cap):
        for o in inst.enumerate_objects(s):
            k = inst.iso_key(o)
            if k not in seen:
                seen.add(k)
                out.append(k)
    out.sort(key=lambda k: (_size_sort(inst.size_of_key(k)),
                            inst.format_key(k)))
    return out


# -- structure constants ---------------------------------------------------------

# memoized constants; distinct (U, W, V) computations are independent, so a
# single map guarded by a lock keeps results schedule-independent
_CONST_MEMO: dict = {}
_MEMO_LOCK = threading.Lock()


def _memo_get(key):
    with _MEMO_LOCK:
        return _CONST_MEMO.get(key)


def _memo_put(key, val):
    with _MEMO_LOCK:
        _CONST_MEMO[key] = val
    return val


def structure_constant_count(inst, U_key, W_key, V_key) -> int:
    """c^V_{U,W} = #{U' subobject of V : U' iso U, V/U' iso W}.

    Counts admissible sites directly; instances may expose a site_count
    fast path that avoids materializing inclusion data.
    """
    memo_key = ("count", inst, U_key, W_key, V_key)
    got = _memo_get(memo_key)
    if got is not None:
        return got
    su, sw = inst.size_of_key(U_key), inst.size_of_key(W_key)
    if _size_sum(su, sw) != inst.size_of_key(V_key):
        return _memo_put(memo_key, 0)
    fast = getattr(inst, "site_count", None)
    if fast is not None:
        return _memo_put(memo_key, fast(U_key, W_key, V_key))
    V = inst.object_of_key(V_key)
    n = sum(
        1
        for s in inst.admissible_subobjects(V)
        if s.sub_key == U_key and s.quot_key == W_key
    )
    return _memo_put(memo_key, n)


def structure_constant_autext(inst, U_key, W_key, V_key) -> int:
    """c^V_{U,W} by the automorphism/extension formula
    (|Aut V| / (|Aut U| |Aut W|)) * |Ext^1(W,U)_V| / |Hom(W,U)|.

    Requires the instance to enumerate extension classes; the rational must
    reduce to an integer, anything else signals an implementation bug.
    """
    memo_key = ("autext", inst, U_key, W_key, V_key)
    got = _memo_get(memo_key)
    if got is not None:
        return got
    try:
        exts = inst.ext1_classes(W_key, U_key)
        hom = inst.hom_count(W_key, U_key)
    except NotImplementedError as e:
        raise ValueError(
            f"{inst.name} does not expose the Ext/Hom data needed by the "
            "automorphism formula"
        ) from e
    ext_v = sum(1 for e in exts if e.middle_key == V_key)
    val = Fraction(
        inst.aut_order(V_key) * ext_v,
        inst.aut_order(U_key) * inst.aut_order(W_key) * hom,
    )
    if val.denominator != 1:
        raise ArithmeticError(
            f"automorphism formula gave the non-integer {val} at "
            f"(U, W, V) = ({inst.format_key(U_key)}, {inst.format_key(W_key)}, "
            f"{inst.format_key(V_key)})"
        )
    return _memo_put(memo_key, int(val))


_CLASS_KEYS_CACHE: dict = {}


def _class_keys(inst, size):
    key = (inst, size)
    got = _CLASS_KEYS_CACHE.get(key)
    if got is None:
        got = tuple(dict.fromkeys(
            inst.iso_key(o) for o in inst.enumerate_objects(size)
        ))
        _CLASS_KEYS_CACHE[key] = got
    return got


def multiply(a: HallElement, b: HallElement) -> HallElement:
    """Bilinear extension of 1_U * 1_W = sum_V c^V_{U,W} 1_V.

    The target classes are enumerated at the summed size; an enumeration too
    large for the installed work budget aborts loudly rather than truncating.
    """
    if a.instance is not b.instance:
        raise ValueError("elements live over different instances")
    inst = a.instance
    out: dict = {}
    for u, cu in a.coeffs.items():
        su = inst.size_of_key(u)
        for w, cw in b.coeffs.items():
            target = _size_sum(su, inst.size_of_key(w))
            for vk in _class_keys(inst, target):
                c = structure_constant_count(inst, u, w, vk)
                if c:
                    out[vk] = out.get(vk, Fraction(0)) + cu * cw * c
    return HallElement(inst, out)


# -- numerical coproduct ---------------------------------------------------------

_SPAN_CACHE: dict = {}


def _conflation_span(inst, cap):
    """S_{<=2} at the given cap with the product target X_1 x X_1 and the
    outer-face pairing (d_2, d_0) into it.  Cached per (instance, cap)."""
    key = (inst, cap)
    got = _SPAN_CACHE.get(key)
    if got is None:
        S = s_construction(inst, cap, n_max=2)
        X1 = S.level(1)
        P, _, _ = product_groupoid(X1, X1, name="X1xX1")
        outer = pair_into_product(S.face(2, 2), S.face(2, 0), P)
        got = (S, P, outer)
        _SPAN_CACHE[key] = got
    return got


def comultiply(inst, v_key) -> dict:
    """Coproduct coefficients of delta_v: a map (sub key, quot key) -> Q.

    Computed from the span X_1 <- X_2 -> X_1 x X_1: pull delta_v back along
    the middle face, push forward along the outer pair.  The pushforward
    weights are automorphism-order ratios, so coefficients are genuinely
    rational (the class of a line inside the plane contributes 1/2 over F_2).
    """
    size = inst.size_of_key(v_key)
    S, P, outer = _conflation_span(inst, size)
    X1 = S.level(1)
    target = next(
        (D for D in X1.objects if inst.iso_key(D.entry(0, 1)) == v_key), None
    )
    if target is None:
        raise ValueError(
            f"{inst.format_key(v_key)} not found at level 1 under its own size"
        )
    phi = lin_pullback(S.face(2, 1), LinFunction.delta(X1, target))
    psi = lin_pushforward(outer, phi)
    out: dict = {}
    for rep, val in psi.values.items():
        a, b = rep
        k = (inst.iso_key(a.entry(0, 1)), inst.iso_key(b.entry(0, 1)))
        out[k] = out.get(k, Fraction(0)) + val
    return {k: v for k, v in out.items() if v}


def counit(inst, coeffs: dict) -> HallElement:
    """(epsilon x id) applied to coproduct coefficients: keeps the W leg of
    pairs whose U leg is the zero class."""
    zero = inst.zero_key()
    vals: dict = {}
    for (u, w), c in coeffs.items():
        if u == zero:
            vals[w] = vals.get(w, Fraction(0)) + c
    return HallElement(inst, vals)


# -- Hall polynomials -------------------------------------------------------------


class NotPolynomialError(ValueError):
    pass


@dataclass(frozen=True)
class HallPolynomial:
    """Integer polynomial in q with interpolation provenance.

    coeffs is ascending; primes are the interpolation nodes and holdout the
    verification prime none of the coefficients were fitted against.
    """

    coeffs: tuple
    primes: tuple
    holdout: int

    def __call__(self, q: int) -> int:
        return sum(c * q**i for i, c in enumerate(self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if not c:
                continue
            if i == 0:
                parts.append(str(c))
            else:
                var = "q" if i == 1 else f"q^{i}"
                parts.append(var if c == 1 else f"{c}*{var}")
        return " + ".join(parts) or "0"

    def to_json(self) -> dict:
        return {
            "coefficients": list(self.coeffs),
            "primes": list(self.primes),
            "holdout_prime": self.holdout,
        }


def _poly_mul_linear(p, root):
    """p(x) * (x - root), p ascending."""
    out = [Fraction(0)] * (len(p) + 1)
    for i, c in enumerate(p):
        out[i + 1] += c
        out[i] -= c * root
    return out


def _interpolate(xs, ys):
    n = len(xs)
    acc = [Fraction(0)] * n
    for i in range(n):
        num = [Fraction(1)]
        den = Fraction(1)
        for j in range(n):
            if j != i:
                num = _poly_mul_linear(num, xs[j])
                den *= xs[i] - xs[j]
        scale = Fraction(ys[i]) / den
        for k in range(len(num)):
            acc[k] += scale * num[k]
    while len(acc) > 1 and acc[-1] == 0:
        acc.pop()
    return acc


def hall_polynomial(family: Callable[[int], Any], U_key, W_key, V_key,
                    primes=(2, 3, 5), holdout: int = 7) -> HallPolynomial:
    """Interpolate q -> c^V_{U,W} over instances family(p) for p in primes.

    The keys must be meaningful across the whole family (dimensions,
    partitions).  Interpolation is exact Lagrange over Q; the result must
    have integer coefficients and must reproduce the brute-force count at
    the holdout prime, otherwise the constant is not a polynomial at this
    degree bound and NotPolynomialError is raised.
    """
    primes = tuple(primes)
    if holdout in primes:
        raise ValueError("holdout prime must not be an interpolation node")
    values = [
        structure_constant_count(family(p), U_key, W_key, V_key)
        for p in primes
    ]
    coeffs = _interpolate(primes, values)
    if any(c.denominator != 1 for c in coeffs):
        raise NotPolynomialError(
            "not polynomial at this degree bound: interpolation over primes "
            f"{primes} has non-integer coefficients {coeffs}"
        )
    poly = HallPolynomial(tuple(int(c) for c in coeffs), primes, holdout)
    for p, v in zip(primes, values):
        assert poly(p) == v
    brute = structure_constant_count(family(holdout), U_key, W_key, V_key)
    if poly(holdout) != brute:
        raise NotPolynomialError(
            "not polynomial at this degree bound: holdout prime "
            f"{holdout} gives {brute}, interpolant gives {poly(holdout)}"
        )
    return poly


# -- generated subalgebras ---------------------------------------------------------


def _generator_sizes(inst, generators):
    sizes = []
    for g in generators:
        if g.instance is not inst:
            raise ValueError("generator lives over a different instance")
        support_sizes = {inst.size_of_key(k) for k in g.coeffs}
        if len(support_sizes) != 1:
            raise ValueError("generators must be homogeneous and nonzero")
        s = support_sizes.pop()
        if not _size_nonzero(s):
            raise ValueError("generators must have nonzero size")
        sizes.append(s)
    return sizes


def _words_of_size(sizes, target):
    """Ordered generator-index words whose sizes sum exactly to target.
    Generator sizes are nonzero, so the recursion terminates."""
    out = []

    def extend(word, acc):
        budget.tick()
        if acc == target:
            out.append(tuple(word))
            return
        for i, s in enumerate(sizes):
            nxt = _size_sum(acc, s)
            if _size_le(nxt, target):
                word.append(i)
                extend(word, nxt)
                word.pop()

    zero = tuple(0 for _ in target) if isinstance(target, tuple) else 0
    extend([], zero)
    return out


def evaluate_word(inst, generators, word) -> HallElement:
    out = hall_unit(inst)
    for i in word:
        out = multiply(out, generators[i])
    return out


def subalgebra_component_dim(inst, generators, size_key) -> int:
    """Dimension over Q of the span of all generator words of total size
    size_key, by exact row reduction in the Hall basis.

    The empty word contributes the unit when size_key is the zero size.
    """
    sizes = _generator_sizes(inst, generators)
    words = _words_of_size(sizes, size_key)
    if not words:
        return 0
    elements = [evaluate_word(inst, generators, w) for w in words]
    support = sorted(
        {k for e in elements for k in e.coeffs},
        key=lambda k: (_size_sort(inst.size_of_key(k)), inst.format_key(k)),
    )
    rows = [
        [e.coeffs.get(k, Fraction(0)) for k in support] for e in elements
    ]
    return frac_rank(rows)


def word_relation_space(inst, generators, words):
    """Integer-normalized basis of the relation space
    {(c_i) : sum_i c_i * (product of word_i) = 0}."""
    elements = [evaluate_word(inst, generators, w) for w in words]
    support = sorted(
        {k for e in elements for k in e.coeffs},
        key=lambda k: (_size_sort(inst.size_of_key(k)), inst.format_key(k)),
    )
    rows = [
        [e.coeffs.get(k, Fraction(0)) for e in elements] for k in support
    ]
    return frac_kernel_basis(rows)


# -- functoriality ----------------------------------------------------------------


@dataclass
class InducedMapReport:
    """Verification record for a map of Hall algebras induced by an
    inclusion of instances.

    algebra_hom / coalgebra_hom are True or False only when the matching
    certificate (IKEO resp. CULF) was presented and passed; without a
    passing certificate the property is None and a warning explains why.
    """

    algebra_hom: Optional[bool] = None
    coalgebra_hom: Optional[bool] = None
    warnings: list = field(default_factory=list)
    details: list = field(default_factory=list)
    checked_products: int = 0
    checked_coproducts: int = 0

    def to_json(self) -> dict:
        return {
            "algebra_hom": self.algebra_hom,
            "coalgebra_hom": self.coalgebra_hom,
            "warnings": list(self.warnings),
            "details": list(self.details),
            "checked_products": self.checked_products,
            "checked_coproducts": self.checked_coproducts,
        }


def _certificate_warning(kind, report):
    if report is None:
        return f"no {kind} certificate; property not asserted"
    first = report.failures()[0]
    return (f"{kind} certificate failed; property not asserted "
            f"(witness {list(first.label)}: {first.detail})")


def induced_algebra_map(sub_inst, amb_inst, cap, culf=None, ikeo=None,
                        key_map=None):
    """Linear map H(sub) -> H(ambient) sending 1_U to 1_{key_map(U)},
    with certificate-gated verification.

    The algebra-homomorphism property is brute-force checked on all basis
    pairs under the cap only when a passing IKEO certificate is presented;
    the coalgebra property likewise requires a passing CULF certificate.
    A missing or failed certificate downgrades the claim to a warning, and
    the raw map is returned regardless.
    """
    key_map = key_map or (lambda k: k)

    def push(a: HallElement) -> HallElement:
        if a.instance is not sub_inst:
            raise ValueError("element does not live over the sub-instance")
        vals: dict = {}
        for k, v in a.coeffs.items():
            kk = key_map(k)
            vals[kk] = vals.get(kk, Fraction(0)) + v
        return HallElement(amb_inst, vals)

    report = InducedMapReport()
    keys = basis_keys(sub_inst, cap)

    if ikeo is not None and ikeo.ok:
        report.algebra_hom = True
        for u in keys:
            su = sub_inst.size_of_key(u)
            for w in keys:
                if not _size_le(_size_sum(su, sub_inst.size_of_key(w)), cap):
                    continue
                lhs = push(multiply(delta(sub_inst, u), delta(sub_inst, w)))
                rhs = multiply(push(delta(sub_inst, u)),
                               push(delta(sub_inst, w)))
                report.checked_products += 1
                if lhs != rhs:
                    report.algebra_hom = False
                    report.details.append(
                        "product mismatch at "
                        f"({sub_inst.format_key(u)}, {sub_inst.format_key(w)})"
                    )
    else:
        report.warnings.append(_certificate_warning("IKEO", ikeo))

    if culf is not None and culf.ok:
        report.coalgebra_hom = True
        for v in keys:
            sub_co = comultiply(sub_inst, v)
            amb_co = comultiply(amb_inst, key_map(v))
            mapped: dict = {}
            for (a, b), c in sub_co.items():
                kk = (key_map(a), key_map(b))
                mapped[kk] = mapped.get(kk, Fraction(0)) + c
            report.checked_coproducts += 1
            if mapped != amb_co:
                report.coalgebra_hom = False
                report.details.append(
                    f"coproduct mismatch at {sub_inst.format_key(v)}"
                )
    else:
        report.warnings.append(_certificate_warning("CULF", culf))

    return push, report


# -- exports ----------------------------------------------------------------------


def multiplication_table(inst, cap) -> dict:
    """Products of all basis pairs whose total size stays under the cap.

    Pairs beyond the cap are omitted rather than silently truncated.
    """
    keys = basis_keys(inst, cap)
    table: dict = {}
    for u in keys:
        su = inst.size_of_key(u)
        for w in keys:
            if not _size_le(_size_sum(su, inst.size_of_key(w)), cap):
                continue
            prod = multiply(delta(inst, u), delta(inst, w))
            table[(u, w)] = prod
    return table


def multiplication_table_csv(inst, cap) -> str:
    keys = basis_keys(inst, cap)
    table = multiplication_table(inst, cap)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["U\\W"] + [inst.format_key(w) for w in keys])
    for u in keys:
        row = [inst.format_key(u)]
        for w in keys:
            prod = table.get((u, w))
            if prod is None:
                row.append("")
            else:
                row.append(";".join(
                    f"{inst.format_key(v)}:{c}" for v, c in prod.terms()
                ))
        writer.writerow(row)
    return buf.getvalue()


def multiplication_table_json(inst, cap) -> dict:
    table = multiplication_table(inst, cap)
    products: dict = {}
    for (u, w), prod in sorted(
        table.items(),
        key=lambda kv: (inst.format_key(kv[0][0]), inst.format_key(kv[0][1])),
    ):
        cell = {inst.format_key(v): c for v, c in prod.terms()}
        products.setdefault(inst.format_key(u), {})[inst.format_key(w)] = cell
    return {
        "instance": inst.name,
        "basis": [inst.format_key(k) for k in basis_keys(inst, cap)],
        "products": products,
    }
