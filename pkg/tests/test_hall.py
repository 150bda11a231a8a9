"""Hall products and coproducts: frozen small-instance oracles, the two
structure-constant routes, polynomiality, and induced maps."""

import math
from fractions import Fraction

import pytest

from segalhall.groupoids import LinFunction, lin_pullback, lin_pushforward_via_fibers
from segalhall.hall import (
    HallPolynomial,
    NotPolynomialError,
    basis_keys,
    comultiply,
    counit,
    delta,
    hall_polynomial,
    hall_unit,
    induced_algebra_map,
    multiplication_table,
    multiplication_table_csv,
    multiplication_table_json,
    multiply,
    structure_constant_autext,
    structure_constant_count,
    subalgebra_component_dim,
    word_relation_space,
    _conflation_span,
    _generator_sizes,
    _words_of_size,
)
from segalhall.instances import (
    A2_QUIVER,
    D4_SINK_QUIVER,
    RestrictedInstance,
    instance_nil_jordan_fq,
    instance_rep_f1,
    instance_rep_fq,
    instance_vect_f1,
    instance_vect_fq,
)
from segalhall.sconstruction import induced_inclusion, s_construction
from segalhall.simplicial import check_culf, check_ikeo


@pytest.fixture(scope="module")
def vect2():
    return instance_vect_fq(2)


@pytest.fixture(scope="module")
def f1():
    return instance_vect_f1()


@pytest.fixture(scope="module")
def rep2():
    return instance_rep_fq(A2_QUIVER, 2)


@pytest.fixture(scope="module")
def jordan2():
    return instance_nil_jordan_fq(2)


def size_sum(a, b):
    if isinstance(a, tuple):
        return tuple(x + y for x, y in zip(a, b))
    return a + b


def class_keys(inst, size):
    return list(dict.fromkeys(
        inst.iso_key(o) for o in inst.enumerate_objects(size)
    ))


def qbinom(n, k, q):
    """Gaussian binomial via the product formula; independent of the
    pivot-column census the instances use for counting."""
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    assert num % den == 0
    return num // den


# -- products against closed forms ----------------------------------------------


def test_quantum_binomial_products():
    for q in (2, 3, 4, 5):
        inst = instance_vect_fq(q)
        for n in range(7):
            for m in range(7 - n):
                prod = multiply(delta(inst, n), delta(inst, m))
                assert prod == delta(inst, n + m).scale(qbinom(n + m, n, q))


def test_f1_binomial_products(f1):
    for n in range(9):
        for m in range(9 - n):
            prod = multiply(delta(f1, n), delta(f1, m))
            assert prod == delta(f1, n + m).scale(math.comb(n + m, n))


def test_site_census_matches_product_formula():
    for q in (2, 3, 5):
        inst = instance_vect_fq(q)
        for n in range(5):
            for d in range(n + 1):
                assert inst.site_count(d, n - d, n) == qbinom(n, d, q)


def test_unit_acts_as_identity(vect2, rep2, jordan2):
    for inst, key in ((vect2, 2), (jordan2, (2, 1))):
        x = delta(inst, key)
        assert multiply(hall_unit(inst), x) == x
        assert multiply(x, hall_unit(inst)) == x
    for key in class_keys(rep2, (1, 1)):
        x = delta(rep2, key)
        assert multiply(hall_unit(rep2), x) == x
        assert multiply(x, hall_unit(rep2)) == x


def test_product_grading(vect2):
    prod = multiply(delta(vect2, 1), delta(vect2, 1))
    assert set(prod.coeffs) == {2}
    assert prod.coeffs[2] == 3


def test_element_arithmetic(vect2):
    a, b = delta(vect2, 1), delta(vect2, 2)
    x = 2 * a + b - a
    assert x.coeffs == {1: Fraction(1), 2: Fraction(1)}
    assert (x - x).coeffs == {}
    assert not (x - x)
    assert (a * 3).coeffs == {1: Fraction(3)}
    assert x * b == multiply(x, b)
    assert [k for k, _ in x.terms()] == [1, 2]
    assert "[1]" in repr(a)


def test_delta_rejects_foreign_key(rep2, jordan2):
    # rows ((1,),(1,)) lie in the orbit of the canonical ((0,),(1,))
    non_canonical = ((1, 2), (((1,), (1,)),))
    assert rep2.iso_key(rep2.object_of_key(non_canonical)) != non_canonical
    with pytest.raises(ValueError):
        delta(rep2, non_canonical)
    good = class_keys(rep2, (1, 1))
    assert all(delta(rep2, k).coeffs for k in good)
    assert delta(jordan2, (2, 1)).coeffs


def test_instance_mismatch_errors(vect2, jordan2):
    with pytest.raises(ValueError):
        multiply(delta(vect2, 1), delta(instance_vect_fq(2), 1))
    with pytest.raises(ValueError):
        delta(vect2, 1) + delta(jordan2, (1,))


# -- the two structure-constant routes --------------------------------------------


def sweep_count_vs_autext(inst, cap):
    keys = basis_keys(inst, cap)
    checked = 0
    for u in keys:
        su = inst.size_of_key(u)
        for w in keys:
            target = size_sum(su, inst.size_of_key(w))
            for v in class_keys(inst, target):
                assert structure_constant_count(inst, u, w, v) == \
                    structure_constant_autext(inst, u, w, v)
                checked += 1
    return checked


def test_count_equals_autext_vect():
    assert sweep_count_vs_autext(instance_vect_fq(2), 2) >= 9
    assert sweep_count_vs_autext(instance_vect_fq(3), 2) >= 9


def test_count_equals_autext_rep(rep2):
    assert sweep_count_vs_autext(rep2, (1, 1)) >= 25


def test_count_equals_autext_jordan(jordan2):
    assert sweep_count_vs_autext(jordan2, 2) >= 16


def test_autext_frozen_jordan_values(jordan2):
    # q + 1 invariant lines in the square-zero plane, one in the regular
    # nilpotent; both routes, frozen at q = 2 and 3
    for q, inst in ((2, jordan2), (3, instance_nil_jordan_fq(3))):
        for route in (structure_constant_count, structure_constant_autext):
            assert route(inst, (1,), (1,), (1, 1)) == q + 1
            assert route(inst, (1,), (1,), (2,)) == 1


def test_autext_formula_outside_linear_scope(f1, vect2):
    # pointed sets do enumerate their (split) conflations, but the
    # orbit-counting identity behind the Aut/Ext/Hom formula needs linear
    # Hom and Ext; over F_1 the two routes genuinely disagree
    assert structure_constant_count(f1, 1, 1, 2) == 2
    assert structure_constant_autext(f1, 1, 1, 2) == 1
    even = RestrictedInstance(vect2, lambda k: k % 2 == 0, name="even")
    with pytest.raises(ValueError):
        structure_constant_autext(even, 2, 2, 4)


def test_autext_zero_sub_is_iso_indicator(vect2, jordan2):
    assert structure_constant_autext(vect2, 0, 2, 2) == 1
    assert structure_constant_autext(jordan2, (), (2,), (1, 1)) == 0


# -- Hall polynomials --------------------------------------------------------------


def test_hall_polynomial_jordan_pair():
    p1 = hall_polynomial(instance_nil_jordan_fq, (1,), (1,), (1, 1))
    assert p1.coeffs == (1, 1)
    assert str(p1) == "q + 1"
    assert p1.primes == (2, 3, 5) and p1.holdout == 7
    p2 = hall_polynomial(instance_nil_jordan_fq, (1,), (1,), (2,))
    assert p2.coeffs == (1,)
    assert p2.degree == 0
    for q in (2, 3, 5, 7):
        assert p1(q) == structure_constant_count(
            instance_nil_jordan_fq(q), (1,), (1,), (1, 1))


def test_hall_polynomial_subspace_family():
    poly = hall_polynomial(instance_vect_fq, 2, 2, 4,
                           primes=(2, 3, 5, 7, 11), holdout=13)
    assert poly.coeffs == (1, 1, 2, 1, 1)
    # a genuine polynomial also evaluates correctly off the node set,
    # prime powers included
    assert poly(4) == qbinom(4, 2, 4)
    assert poly.to_json()["holdout_prime"] == 13


def test_hall_polynomial_degree_bound_failure():
    # three nodes bound the degree at two; the constant has degree four,
    # so the holdout prime must expose the misfit
    with pytest.raises(NotPolynomialError) as exc:
        hall_polynomial(instance_vect_fq, 2, 2, 4)
    assert "not polynomial at this degree bound" in str(exc.value)


def test_hall_polynomial_rejects_holdout_node():
    with pytest.raises(ValueError):
        hall_polynomial(instance_nil_jordan_fq, (1,), (1,), (1, 1),
                        primes=(2, 3, 5), holdout=5)


def test_hall_polynomial_str_and_call():
    p = HallPolynomial((1, 0, 2), (2, 3, 5), 7)
    assert str(p) == "2*q^2 + 1"
    assert p(3) == 19


# -- numerical coproduct ------------------------------------------------------------


def test_coproduct_of_plane_over_f2(vect2):
    # hand-derived: the plane splits as 0+V, V+0 (weight |Aut V|/|Aut V| = 1)
    # and line+line, whose flag has the 2-element unipotent stabilizer,
    # giving weight 1/2
    co = comultiply(vect2, 2)
    assert co == {(0, 2): Fraction(1), (1, 1): Fraction(1, 2),
                  (2, 0): Fraction(1)}


def test_coproduct_pushforward_routes_agree(vect2):
    # closed-form pushforward vs explicit homotopy fibers
    S, P, outer = _conflation_span(vect2, 2)
    X1 = S.level(1)
    target = next(D for D in X1.objects if vect2.iso_key(D.entry(0, 1)) == 2)
    phi = lin_pullback(S.face(2, 1), LinFunction.delta(X1, target))
    psi = lin_pushforward_via_fibers(outer, phi)
    out = {}
    for rep, val in psi.values.items():
        a, b = rep
        k = (vect2.iso_key(a.entry(0, 1)), vect2.iso_key(b.entry(0, 1)))
        out[k] = out.get(k, Fraction(0)) + val
    assert {k: v for k, v in out.items() if v} == comultiply(vect2, 2)


def test_coproduct_of_rep_classes(rep2):
    # arrow 1 -> 2: S_2 includes into P with quotient S_1, S_1 does not
    s1 = class_keys(rep2, (1, 0))[0]
    s2 = class_keys(rep2, (0, 1))[0]
    proj = next(k for k in class_keys(rep2, (1, 1)) if any(any(r) for r in k[1][0]))
    zero = rep2.zero_key()
    co = comultiply(rep2, proj)
    assert co == {(zero, proj): Fraction(1), (proj, zero): Fraction(1),
                  (s2, s1): Fraction(1)}


def test_counit_both_legs(vect2, rep2, f1):
    for inst, cap in ((vect2, 2), (rep2, (1, 1)), (f1, 2)):
        for v in basis_keys(inst, cap):
            co = comultiply(inst, v)
            assert counit(inst, co) == delta(inst, v)
            swapped = {(w, u): c for (u, w), c in co.items()}
            assert counit(inst, swapped) == delta(inst, v)


def coassoc_check(inst, v_key):
    co = comultiply(inst, v_key)
    left, right = {}, {}
    for (a, b), c in co.items():
        for (x, y), d in comultiply(inst, a).items():
            k = (x, y, b)
            left[k] = left.get(k, Fraction(0)) + c * d
        for (x, y), d in comultiply(inst, b).items():
            k = (a, x, y)
            right[k] = right.get(k, Fraction(0)) + c * d
    assert {k: v for k, v in left.items() if v} == \
        {k: v for k, v in right.items() if v}


def test_coassociativity(vect2, f1, rep2, jordan2):
    # caps chosen so no level groupoid carries automorphism classes in the
    # hundreds (component sweeps on the product groupoid are quadratic in
    # class size); dim 3 over F_2 already means |GL_3| = 168
    for inst, cap in ((vect2, 2), (f1, 3), (rep2, (1, 1)), (jordan2, 2),
                      (instance_vect_fq(3), 1)):
        for v in basis_keys(inst, cap):
            coassoc_check(inst, v)


# -- associativity sweeps -----------------------------------------------------------


def assoc_triples(inst, cap):
    keys = basis_keys(inst, cap)
    checked = 0
    for a in keys:
        da = delta(inst, a)
        for b in keys:
            ab = multiply(da, delta(inst, b))
            for c in keys:
                dc = delta(inst, c)
                lhs = multiply(ab, dc)
                rhs = multiply(da, multiply(delta(inst, b), dc))
                assert lhs == rhs
                checked += 1
    return checked


def test_associativity_vect():
    assert assoc_triples(instance_vect_fq(2), 2) == 27
    assert assoc_triples(instance_vect_fq(3), 2) == 27


def test_associativity_f1(f1):
    assert assoc_triples(f1, 2) == 27


def test_associativity_rep(rep2):
    assert assoc_triples(rep2, (1, 1)) == 125


def test_associativity_jordan(jordan2):
    assert assoc_triples(jordan2, 2) == 64


# -- generated subalgebras ----------------------------------------------------------


def simple_generators(inst):
    return [delta(inst, k) for k in basis_keys(inst, 1)
            if any(inst.size_of_key(k))]


def test_serre_relation_kernel():
    # frozen: E1E1E2 = (q+1)[A], E1E2E1 = (q+1)[A] + [B],
    # E2E1E1 = (q+1)[A] + (q+1)[B] with A the split class of dimension
    # (2,1), B the class with one nonzero arrow entry; kernel (q, -(q+1), 1)
    for q in (2, 3):
        inst = instance_rep_fq(A2_QUIVER, q)
        e1 = delta(inst, class_keys(inst, (1, 0))[0])
        e2 = delta(inst, class_keys(inst, (0, 1))[0])
        split = next(k for k in class_keys(inst, (2, 1))
                     if not any(any(r) for r in k[1][0]))
        other = next(k for k in class_keys(inst, (2, 1))
                     if any(any(r) for r in k[1][0]))
        words = [multiply(multiply(e1, e1), e2),
                 multiply(multiply(e1, e2), e1),
                 multiply(multiply(e2, e1), e1)]
        assert words[0].coeffs == {split: q + 1}
        assert words[1].coeffs == {split: q + 1, other: 1}
        assert words[2].coeffs == {split: q + 1, other: q + 1}
        basis = word_relation_space(inst, [e1, e2],
                                    [(0, 0, 1), (0, 1, 0), (1, 0, 0)])
        assert basis == ((q, -(q + 1), 1),)


def test_subalgebra_component_dims_rep_fq(rep2):
    gens = simple_generators(rep2)
    for key in ((1, 0), (1, 1), (2, 1), (2, 2)):
        assert subalgebra_component_dim(rep2, gens, key) == \
            len(class_keys(rep2, key))


def test_subalgebra_component_unreachable_size(vect2):
    assert subalgebra_component_dim(vect2, [delta(vect2, 2)], 3) == 0
    assert subalgebra_component_dim(vect2, [delta(vect2, 2)], 4) == 1


def test_generator_validation(vect2, jordan2):
    with pytest.raises(ValueError):
        _generator_sizes(vect2, [delta(vect2, 1) + delta(vect2, 2)])
    with pytest.raises(ValueError):
        _generator_sizes(vect2, [hall_unit(vect2)])
    with pytest.raises(ValueError):
        _generator_sizes(vect2, [delta(jordan2, (1,))])


def test_word_enumeration():
    assert _words_of_size([1, 2], 4) == [
        (0, 0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1)]
    assert _words_of_size([(1, 0), (0, 1)], (1, 1)) == [(0, 1), (1, 0)]


# -- the F_1 quiver dichotomy -------------------------------------------------------

# Over F_1 every indecomposable of a tree quiver is thin (morphisms are
# injective away from the basepoint, so two elements never merge), and each
# one is an iterated commutator of simples: bracketing a leaf simple onto a
# connected support grows it by one vertex, split summands cancelling.  The
# simples therefore generate every graded component, and the deficit the
# missing thick indecomposable leaves behind is a relation, not a gap.


def test_d4_f1_simples_generate_center_weight_two():
    inst = instance_rep_f1(D4_SINK_QUIVER)
    gens = simple_generators(inst)
    target = (1, 1, 1, 2)
    dim = subalgebra_component_dim(inst, gens, target)
    classes = len(class_keys(inst, target))
    assert dim == 14
    assert classes == 14
    assert dim == classes


def test_d4_missing_class_appears_as_extra_relation():
    # over F_q the same dimension vector has one extra class, the rep
    # wanting three distinct lines in a plane; a 2-element pointed set has
    # only two, so over F_1 that class is gone from the target and the 60
    # generator words pick up exactly one relation beyond the 45 = 60 - 15
    # that hold with the extra class present
    inst = instance_rep_f1(D4_SINK_QUIVER)
    gens = simple_generators(inst)
    target = (1, 1, 1, 2)
    words = _words_of_size(_generator_sizes(inst, gens), target)
    assert len(words) == 60
    relations = word_relation_space(inst, gens, words)
    assert len(relations) == 46
    over_f2 = instance_rep_fq(D4_SINK_QUIVER, 2)
    assert len(class_keys(over_f2, target)) == 15
    assert len(class_keys(inst, target)) == 14


def test_a2_f1_simples_surject_below_two_two():
    inst = instance_rep_f1(A2_QUIVER)
    gens = simple_generators(inst)
    expected = {(0, 1): 1, (1, 0): 1, (0, 2): 1, (2, 0): 1,
                (1, 1): 2, (1, 2): 2, (2, 1): 2, (2, 2): 3}
    for key, classes in expected.items():
        assert len(class_keys(inst, key)) == classes
        assert subalgebra_component_dim(inst, gens, key) == classes


# -- induced maps -------------------------------------------------------------------


def test_serre_inclusion_induces_verified_bialgebra_map(rep2):
    sub = RestrictedInstance(rep2, lambda k: k[0][1] == 0,
                             name="rep_a2_vertex1")
    amb_s = s_construction(rep2, cap=(1, 1), n_max=3)
    sub_s = s_construction(sub, cap=(1, 1), n_max=3)
    F = induced_inclusion(sub_s, amb_s)
    culf = check_culf(F, n_max=3)
    ikeo = check_ikeo(F, n_max=3)
    assert culf.ok and ikeo.ok
    push, report = induced_algebra_map(sub, rep2, (1, 1),
                                       culf=culf, ikeo=ikeo)
    assert report.algebra_hom is True
    assert report.coalgebra_hom is True
    assert report.warnings == []
    assert report.checked_products > 0 and report.checked_coproducts > 0
    s1 = class_keys(sub, (1, 0))[0]
    assert push(delta(sub, s1)) == delta(rep2, s1)


def test_even_inclusion_verified_algebra_hom_with_culf_warning(vect2):
    sub = RestrictedInstance(vect2, lambda k: k % 2 == 0, name="vect_f2_even")
    amb_s = s_construction(vect2, cap=2, n_max=2)
    sub_s = s_construction(sub, cap=2, n_max=2)
    F = induced_inclusion(sub_s, amb_s)
    culf = check_culf(F, n_max=2)
    ikeo = check_ikeo(F, n_max=2)
    assert ikeo.ok and not culf.ok
    push, report = induced_algebra_map(sub, vect2, 4, culf=culf, ikeo=ikeo)
    assert report.algebra_hom is True
    assert report.checked_products == 6
    assert report.coalgebra_hom is None
    assert any("CULF" in w and "witness" in w for w in report.warnings)
    # the even product really is the ambient one where defined
    assert push(multiply(delta(sub, 2), delta(sub, 2))) == \
        multiply(delta(vect2, 2), delta(vect2, 2))


def test_even_subcategory_coproduct_differs_from_ambient(vect2):
    # the failed CULF certificate is not pedantry: the plane's middle term
    # line+line needs the odd class the subcategory lacks
    sub = RestrictedInstance(vect2, lambda k: k % 2 == 0, name="vect_f2_even")
    sub_co = comultiply(sub, 2)
    amb_co = comultiply(vect2, 2)
    assert sub_co == {(0, 2): Fraction(1), (2, 0): Fraction(1)}
    assert amb_co[(1, 1)] == Fraction(1, 2)
    assert (1, 1) not in sub_co


def test_induced_map_without_certificates_warns(rep2):
    sub = RestrictedInstance(rep2, lambda k: k[0][1] == 0,
                             name="rep_a2_vertex1")
    push, report = induced_algebra_map(sub, rep2, (1, 1))
    assert report.algebra_hom is None and report.coalgebra_hom is None
    assert len(report.warnings) == 2
    assert all("no" in w and "certificate" in w for w in report.warnings)


# -- exports ------------------------------------------------------------------------


def test_multiplication_table_respects_cap(vect2):
    table = multiplication_table(vect2, 2)
    assert (1, 1) in table
    assert (1, 2) not in table and (2, 2) not in table
    assert table[(1, 1)].coeffs == {2: Fraction(3)}


def test_csv_export_is_deterministic(vect2):
    a = multiplication_table_csv(vect2, 2)
    b = multiplication_table_csv(instance_vect_fq(2), 2)
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "U\\W,0,1,2"
    assert "2:3" in a


def test_json_export_shape(vect2):
    doc = multiplication_table_json(vect2, 2)
    assert doc["basis"] == ["0", "1", "2"]
    assert doc["products"]["1"]["1"] == {"2": Fraction(3)}
    assert "2" not in doc["products"]["2"]


def test_structure_constant_memo_is_stable(vect2):
    first = structure_constant_count(vect2, 1, 1, 2)
    again = structure_constant_count(vect2, 1, 1, 2)
    assert first == again == 3
