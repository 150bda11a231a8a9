"""Finite groupoids, functors between them, homotopy pullbacks, and the
linearization calculus (pullback and pushforward of Q-valued functions).

A groupoid here is an explicit finite gadget: a tuple of hashable objects
plus a hom function producing the (finite) set of morphisms between any two
objects.  Morphisms are `Mor` records carrying source, target and a hashable
data payload; composition and identities are supplied by the groupoid.

Two facts are used as implementations and re-verified in the test suite
against first-principles definitions:

- a functor between finite groupoids is an equivalence iff it induces a
  bijection on iso classes and a bijection on each automorphism group,
- the pushforward of phi along F, defined by summing phi over homotopy
  fibers weighted by 1/|Aut|, evaluates at y to
  |Aut(y)| * sum_{[x] : F(x) ~ y} phi(x) / |Aut(x)|.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable

from . import budget


@dataclass(frozen=True)
class Mor:
    src: Any
    tgt: Any
    data: Any


class FiniteGroupoid:
    """Explicit finite groupoid with lazily computed, memoized hom-sets.

    Parameters
    ----------
    objects: iterable of hashable objects.
    hom_fn: (x, y) -> iterable of Mor.  Called once per ordered pair.
    compose_fn: (g, f) -> Mor for composable f, g (g after f).
    identity_fn: x -> Mor.
    sig_fn: optional iso-invariant signature; objects with different
        signatures are never isomorphic, which prunes component searches.
    """

    def __init__(self, objects, hom_fn, compose_fn, identity_fn,
                 sig_fn=None, name: str = ""):
        self.objects = tuple(objects)
        budget.tick(len(self.objects))
        self._object_set = set(self.objects)
        self._hom_fn = hom_fn
        self._compose_fn = compose_fn
        self._identity_fn = identity_fn
        self._sig_fn = sig_fn or (lambda x: 0)
        self.name = name
        self._hom_cache: dict[tuple, tuple] = {}
        self._components = None
        self._comp_rep_of: dict | None = None

    # -- raw category structure --------------------------------------------

    def hom(self, x, y):
        key = (x, y)
        got = self._hom_cache.get(key)
        if got is None:
            if self._sig_fn(x) != self._sig_fn(y):
                got = ()
            else:
                got = tuple(self._hom_fn(x, y))
            budget.tick(1 + len(got))
            self._hom_cache[key] = got
        return got

    def compose(self, g: Mor, f: Mor) -> Mor:
        if f.tgt != g.src:
            raise ValueError("morphisms not composable")
        return self._compose_fn(g, f)

    def identity(self, x) -> Mor:
        return self._identity_fn(x)

    def inverse(self, f: Mor) -> Mor:
        idx = self.identity(f.src)
        for u in self.hom(f.tgt, f.src):
            if self.compose(u, f) == idx:
                return u
        raise ValueError(f"no inverse found for {f}; not a groupoid?")

    def sig(self, x):
        return self._sig_fn(x)

    # -- isomorphism structure ----------------------------------------------

    def find_iso(self, x, y):
        h = self.hom(x, y)
        return h[0] if h else None

    def aut_order(self, x) -> int:
        return len(self.hom(x, x))

    def _compute_components(self):
        reps_by_sig: dict[Any, list] = {}
        rep_of = {}
        members: dict[Any, list] = {}
        for x in self.objects:
            bucket = reps_by_sig.setdefault(self._sig_fn(x), [])
            for r in bucket:
                if self.find_iso(x, r) is not None:
                    rep_of[x] = r
                    members[r].append(x)
                    break
            else:
                bucket.append(x)
                rep_of[x] = x
                members[x] = [x]
        comps = tuple(
            Component(rep=r, members=tuple(ms), aut_order=self.aut_order(r))
            for r, ms in members.items()
        )
        self._components = comps
        self._comp_rep_of = rep_of

    def components(self) -> tuple["Component", ...]:
        if self._components is None:
            self._compute_components()
        return self._components

    def component_rep(self, x):
        if self._comp_rep_of is None:
            self._compute_components()
        got = self._comp_rep_of.get(x)
        if got is None:
            if x not in self._object_set:
                raise KeyError(f"{x!r} is not an object here")
            raise AssertionError("component map incomplete")
        return got

    def cardinality(self) -> Fraction:
        """Groupoid cardinality: sum over iso classes of 1/|Aut|."""
        return sum(
            (Fraction(1, c.aut_order) for c in self.components()),
            Fraction(0),
        )

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<FiniteGroupoid{tag}: {len(self.objects)} objects>"


@dataclass(frozen=True)
class Component:
    rep: Any
    members: tuple
    aut_order: int


def validate_groupoid(G: FiniteGroupoid, max_objects: int = 36) -> None:
    """Exhaustively check groupoid axioms; test-support, O(n^2 * hom^3)."""
    objs = G.objects[:max_objects]
    for x in objs:
        idx = G.identity(x)
        assert idx.src == x and idx.tgt == x
        assert idx in G.hom(x, x)
    for x, y in itertools.product(objs, repeat=2):
        for f in G.hom(x, y):
            assert f.src == x and f.tgt == y
            assert G.compose(f, G.identity(x)) == f
            assert G.compose(G.identity(y), f) == f
            inv = G.inverse(f)
            assert G.compose(inv, f) == G.identity(x)
            assert G.compose(f, inv) == G.identity(y)
        for z in objs:
            for f in G.hom(x, y):
                for g in G.hom(y, z):
                    gf = G.compose(g, f)
                    assert gf in G.hom(x, z)


class Functor:
    def __init__(self, src: FiniteGroupoid, tgt: FiniteGroupoid,
                 obj_map: Callable, mor_map: Callable, name: str = ""):
        self.src = src
        self.tgt = tgt
        self._obj_map = obj_map
        self._mor_map = mor_map
        self.name = name

    def obj(self, x):
        return self._obj_map(x)

    def mor(self, f: Mor) -> Mor:
        return self._mor_map(f)

    def __repr__(self):
        return f"<Functor {self.name or '?'}>"


def identity_functor(G: FiniteGroupoid) -> Functor:
    return Functor(G, G, lambda x: x, lambda f: f, name="id")


def compose_functors(G: Functor, F: Functor) -> Functor:
    if F.tgt is not G.src:
        raise ValueError("functors not composable")
    return Functor(F.src, G.tgt, lambda x: G.obj(F.obj(x)),
                   lambda f: G.mor(F.mor(f)),
                   name=f"{G.name}.{F.name}")


def validate_functor(F: Functor, max_objects: int = 24) -> None:
    objs = F.src.objects[:max_objects]
    for x in objs:
        assert F.obj(x) in F.tgt._object_set or F.obj(x) in F.tgt.objects
        assert F.mor(F.src.identity(x)) == F.tgt.identity(F.obj(x))
    for x, y, z in itertools.product(objs, repeat=3):
        for f in F.src.hom(x, y):
            Ff = F.mor(f)
            assert Ff.src == F.obj(x) and Ff.tgt == F.obj(y)
            for g in F.src.hom(y, z):
                assert F.mor(F.src.compose(g, f)) == F.tgt.compose(F.mor(g), Ff)


# -- equivalence testing -----------------------------------------------------


@dataclass
class EquivalenceReport:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def is_equivalence(F: Functor) -> EquivalenceReport:
    """Decide whether F is an equivalence of finite groupoids.

    Criterion: F induces a bijection on iso classes and, for one
    representative x of each source class, a bijection Aut(x) -> Aut(Fx).
    """
    src, tgt = F.src, F.tgt
    hit: dict[Any, Any] = {}
    for comp in src.components():
        y = tgt.component_rep(F.obj(comp.rep))
        if y in hit:
            return EquivalenceReport(
                False,
                f"not injective on iso classes: {hit[y]!r} and {comp.rep!r} "
                f"both land in the class of {y!r}",
            )
        hit[y] = comp.rep
    missed = [c.rep for c in tgt.components() if c.rep not in hit]
    if missed:
        return EquivalenceReport(
            False,
            f"not essentially surjective: nothing maps to {missed[0]!r} "
            f"({len(missed)} classes missed)",
        )
    for comp in src.components():
        x = comp.rep
        auts = src.hom(x, x)
        images = {F.mor(u).data for u in auts}
        n_tgt = tgt.aut_order(F.obj(x))
        if len(images) != len(auts) or len(auts) != n_tgt:
            return EquivalenceReport(
                False,
                f"automorphisms at {x!r}: |Aut| = {len(auts)}, image size "
                f"{len(images)}, target |Aut| = {n_tgt}",
            )
    return EquivalenceReport(True)


def is_equivalence_witness_style(F: Functor) -> bool:
    """First-principles check: essential surjectivity plus full faithfulness
    on all object pairs.  Quadratic; used to cross-validate is_equivalence."""
    src, tgt = F.src, F.tgt
    for y in tgt.objects:
        if not any(tgt.find_iso(F.obj(x), y) for x in src.objects):
            return False
    for x, y in itertools.product(src.objects, repeat=2):
        imgs = [F.mor(f) for f in src.hom(x, y)]
        if len(set(m.data for m in imgs)) != len(imgs):
            return False
        if len(imgs) != len(tgt.hom(F.obj(x), F.obj(y))):
            return False
    return True


# -- standard constructions --------------------------------------------------


def iso_comma(F: Functor, G: Functor, name: str = ""):
    """Homotopy pullback of A --F--> C <--G-- B as the iso-comma groupoid.

    Objects are triples (a, b, gamma) with gamma: F(a) -> G(b) in C.
    Morphisms (a,b,gamma) -> (a',b',gamma') are pairs (u, v) satisfying
    G(v) . gamma = gamma' . F(u).  Returns (P, to_A, to_B).
    """
    A, B, C = F.src, G.src, F.tgt
    objects = []
    for a in A.objects:
        Fa = F.obj(a)
        for b in B.objects:
            for gamma in C.hom(Fa, G.obj(b)):
                objects.append((a, b, gamma))

    def hom_fn(p, p2):
        (a, b, gamma), (a2, b2, gamma2) = p, p2
        homB = B.hom(b, b2)
        index: dict[Any, list] = {}
        for v in homB:
            m = C.compose(G.mor(v), gamma)
            index.setdefault(m.data, []).append(v)
        out = []
        for u in A.hom(a, a2):
            m2 = C.compose(gamma2, F.mor(u))
            for v in index.get(m2.data, ()):
                out.append(Mor(p, p2, (u, v)))
        return out

    def compose_fn(g2, g1):
        (u2, v2), (u1, v1) = g2.data, g1.data
        return Mor(g1.src, g2.tgt, (A.compose(u2, u1), B.compose(v2, v1)))

    def identity_fn(p):
        return Mor(p, p, (A.identity(p[0]), B.identity(p[1])))

    P = FiniteGroupoid(
        objects, hom_fn, compose_fn, identity_fn,
        sig_fn=lambda p: (A.sig(p[0]), B.sig(p[1])),
        name=name or f"({F.name} || {G.name})",
    )
    to_A = Functor(P, A, lambda p: p[0], lambda m: m.data[0], name="pr_A")
    to_B = Functor(P, B, lambda p: p[1], lambda m: m.data[1], name="pr_B")
    return P, to_A, to_B


def product_groupoid(A: FiniteGroupoid, B: FiniteGroupoid, name: str = ""):
    """Cartesian product A x B with componentwise structure.

    Returns (P, pr_A, pr_B).  Component representatives are pairs of the
    factor representatives, so |Aut(a, b)| = |Aut a| * |Aut b|.
    """
    objects = [(a, b) for a in A.objects for b in B.objects]

    def hom_fn(p, p2):
        return [
            Mor(p, p2, (u, v))
            for u in A.hom(p[0], p2[0])
            for v in B.hom(p[1], p2[1])
        ]

    def compose_fn(g, f):
        return Mor(f.src, g.tgt, (A.compose(g.data[0], f.data[0]),
                                  B.compose(g.data[1], f.data[1])))

    def identity_fn(p):
        return Mor(p, p, (A.identity(p[0]), B.identity(p[1])))

    P = FiniteGroupoid(
        objects, hom_fn, compose_fn, identity_fn,
        sig_fn=lambda p: (A.sig(p[0]), B.sig(p[1])),
        name=name or f"({A.name} x {B.name})",
    )
    pr_A = Functor(P, A, lambda p: p[0], lambda m: m.data[0], name="pr_1")
    pr_B = Functor(P, B, lambda p: p[1], lambda m: m.data[1], name="pr_2")
    return P, pr_A, pr_B


def pair_into_product(F: Functor, G: Functor, P: FiniteGroupoid) -> Functor:
    """The functor (F, G): X -> P where P = product_groupoid(F.tgt, G.tgt)."""
    if F.src is not G.src:
        raise ValueError("functors must share a source")
    return Functor(F.src, P, lambda x: (F.obj(x), G.obj(x)),
                   lambda m: Mor((F.obj(m.src), G.obj(m.src)),
                                 (F.obj(m.tgt), G.obj(m.tgt)),
                                 (F.mor(m), G.mor(m))),
                   name=f"({F.name}, {G.name})")


def unit_groupoid(obj, aut=None, compose=None, identity_data=None):
    """One-object groupoid; trivial automorphisms unless aut is given."""
    if aut is None:
        ident = Mor(obj, obj, identity_data if identity_data is not None else "id")
        return FiniteGroupoid(
            (obj,), lambda x, y: (ident,), lambda g, f: ident,
            lambda x: ident, name="unit",
        )
    raise NotImplementedError


def constant_functor(G: FiniteGroupoid, tgt: FiniteGroupoid, obj) -> Functor:
    ident = tgt.identity(obj)
    return Functor(G, tgt, lambda x: obj, lambda f: ident, name=f"const_{obj!r}")


def homotopy_fiber(F: Functor, y, name: str = "") -> FiniteGroupoid:
    """Homotopy fiber of F over y: objects (a, gamma: F(a) -> y)."""
    A, B = F.src, F.tgt
    objects = []
    for a in A.objects:
        for gamma in B.hom(F.obj(a), y):
            objects.append((a, gamma))

    def hom_fn(p, p2):
        (a, gamma), (a2, gamma2) = p, p2
        out = []
        for u in A.hom(a, a2):
            if B.compose(gamma2, F.mor(u)) == gamma:
                out.append(Mor(p, p2, u))
        return out

    return FiniteGroupoid(
        objects, hom_fn,
        lambda g, f: Mor(f.src, g.tgt, A.compose(g.data, f.data)),
        lambda p: Mor(p, p, A.identity(p[0])),
        sig_fn=lambda p: A.sig(p[0]),
        name=name or f"fib_{F.name}",
    )


def chain_fiber_product(groupoids, right_functors, left_functors, name: str = ""):
    """Iterated homotopy fiber product G_1 x_{B_1} G_2 x_{B_2} ... x G_n.

    right_functors[i]: G_i -> B_i and left_functors[i]: G_{i+1} -> B_i are the
    comparison legs.  Objects are (x_1..x_n, gamma_1..gamma_{n-1}) with
    gamma_i : R_i(x_i) -> L_i(x_{i+1}).  Returns (P, projections).
    """
    n = len(groupoids)
    assert len(right_functors) == len(left_functors) == n - 1
    objects = []

    def extend(prefix_objs, prefix_gammas, i):
        if i == n:
            objects.append((tuple(prefix_objs), tuple(prefix_gammas)))
            return
        for x in groupoids[i].objects:
            if i == 0:
                extend([x], [], 1)
            else:
                R = right_functors[i - 1]
                L = left_functors[i - 1]
                B = R.tgt
                for gamma in B.hom(R.obj(prefix_objs[-1]), L.obj(x)):
                    extend(prefix_objs + [x], prefix_gammas + [gamma], i + 1)

    extend([], [], 0)

    def hom_fn(p, p2):
        (xs, gammas), (xs2, gammas2) = p, p2
        # iterate over morphisms componentwise, filtering connector squares
        cands = [groupoids[i].hom(xs[i], xs2[i]) for i in range(n)]
        out = []
        for combo in itertools.product(*cands):
            ok = True
            for i in range(n - 1):
                R, L = right_functors[i], left_functors[i]
                B = R.tgt
                lhs = B.compose(gammas2[i], R.mor(combo[i]))
                rhs = B.compose(L.mor(combo[i + 1]), gammas[i])
                if lhs != rhs:
                    ok = False
                    break
            if ok:
                out.append(Mor(p, p2, combo))
        return out

    def compose_fn(g, f):
        return Mor(f.src, g.tgt, tuple(
            groupoids[i].compose(g.data[i], f.data[i]) for i in range(n)
        ))

    def identity_fn(p):
        return Mor(p, p, tuple(groupoids[i].identity(p[0][i]) for i in range(n)))

    P = FiniteGroupoid(
        objects, hom_fn, compose_fn, identity_fn,
        sig_fn=lambda p: tuple(groupoids[i].sig(p[0][i]) for i in range(n)),
        name=name or "chain_fp",
    )
    projections = [
        Functor(P, groupoids[i], (lambda i: lambda p: p[0][i])(i),
                (lambda i: lambda m: m.data[i])(i), name=f"pr_{i}")
        for i in range(n)
    ]
    return P, projections


class _NonCommutingSquare(Exception):
    pass


def cartesian_square_report(apex: FiniteGroupoid, left: Functor, top: Functor,
                            F: Functor, G: Functor) -> EquivalenceReport:
    """Is the strictly commuting square with corner legs left: apex -> A,
    top: apex -> B homotopy cartesian over A --F--> C <--G-- B?

    Builds the iso-comma groupoid and tests the canonical comparison functor
    (which uses identity connecting isos, valid because the square commutes
    strictly) for being an equivalence.  Strict commutation is asserted on
    every object up front and on every morphism the comparison actually
    evaluates; a failure is reported as not Cartesian rather than raised, so
    corrupted inputs yield check failures instead of crashes.  (Exhaustive
    morphism sweeps are intractable on levels with large isomorphism
    classes, which is why the morphism check is pay-as-you-go.)
    """
    C = F.tgt
    for w in apex.objects:
        if F.obj(left.obj(w)) != G.obj(top.obj(w)):
            return EquivalenceReport(
                False, f"square does not commute on object {w!r}"
            )
    P, _, _ = iso_comma(F, G)

    def obj_map(w):
        a = left.obj(w)
        b = top.obj(w)
        return (a, b, C.identity(F.obj(a)))

    def mor_map(m):
        u, v = left.mor(m), top.mor(m)
        if F.mor(u) != G.mor(v):
            raise _NonCommutingSquare(
                f"square does not commute on morphism {m!r}")
        return Mor(obj_map(m.src), obj_map(m.tgt), (u, v))

    cmp = Functor(apex, P, obj_map, mor_map, name="compare")
    try:
        return is_equivalence(cmp)
    except _NonCommutingSquare as e:
        return EquivalenceReport(False, str(e))


# -- linearization -----------------------------------------------------------


class LinFunction:
    """Finitely supported Q-valued function on the iso classes of a groupoid.

    Values are stored on component representatives.  The zero function is
    the empty dict.
    """

    def __init__(self, groupoid: FiniteGroupoid, values=None):
        self.groupoid = groupoid
        vals = {}
        for x, v in (values or {}).items():
            v = Fraction(v)
            if v:
                r = groupoid.component_rep(x)
                vals[r] = vals.get(r, Fraction(0)) + v
        self.values = {k: v for k, v in vals.items() if v}

    @staticmethod
    def delta(groupoid: FiniteGroupoid, x) -> "LinFunction":
        return LinFunction(groupoid, {x: Fraction(1)})

    def __call__(self, x) -> Fraction:
        return self.values.get(self.groupoid.component_rep(x), Fraction(0))

    def __add__(self, other):
        assert self.groupoid is other.groupoid
        vals = dict(self.values)
        for k, v in other.values.items():
            vals[k] = vals.get(k, Fraction(0)) + v
        return LinFunction(self.groupoid, vals)

    def scale(self, c) -> "LinFunction":
        c = Fraction(c)
        return LinFunction(
            self.groupoid, {k: c * v for k, v in self.values.items()}
        )

    def __eq__(self, other):
        return (
            isinstance(other, LinFunction)
            and self.groupoid is other.groupoid
            and self.values == other.values
        )

    def __repr__(self):
        if not self.values:
            return "0"
        return " + ".join(f"{v}*[{k!r}]" for k, v in self.values.items())


def lin_pullback(F: Functor, phi: LinFunction) -> LinFunction:
    """(F^* phi)(x) = phi(F x)."""
    assert phi.groupoid is F.tgt
    vals = {}
    for comp in F.src.components():
        v = phi(F.obj(comp.rep))
        if v:
            vals[comp.rep] = v
    return LinFunction(F.src, vals)


def lin_pushforward(F: Functor, phi: LinFunction) -> LinFunction:
    """Integration over homotopy fibers, in closed form.

    (F_* phi)(y) = |Aut(y)| * sum over source classes [x] with F(x) ~ y of
    phi(x) / |Aut(x)|.  Equality with the homotopy-fiber definition is a
    theorem for finite groupoids; lin_pushforward_via_fibers below computes
    the definition directly and the test suite compares the two.
    """
    assert phi.groupoid is F.src
    src, tgt = F.src, F.tgt
    vals: dict[Any, Fraction] = {}
    for comp in src.components():
        v = phi.values.get(comp.rep)
        if not v:
            continue
        y = tgt.component_rep(F.obj(comp.rep))
        vals[y] = vals.get(y, Fraction(0)) + v * Fraction(
            tgt.aut_order(y), comp.aut_order
        )
    return LinFunction(tgt, vals)


def lin_pushforward_via_fibers(F: Functor, phi: LinFunction) -> LinFunction:
    """(F_* phi)(y) = sum over pi_0 of the homotopy fiber over y of
    phi(a) / |Aut_fib(a, gamma)|.  Quadratic in the fiber size."""
    assert phi.groupoid is F.src
    vals = {}
    for comp in F.tgt.components():
        y = comp.rep
        fib = homotopy_fiber(F, y)
        total = Fraction(0)
        for fc in fib.components():
            a = fc.rep[0]
            val = phi(a)
            if val:
                total += val / fc.aut_order
        if total:
            vals[y] = total
    return LinFunction(F.tgt, vals)


def groupoid_cardinality(G: FiniteGroupoid) -> Fraction:
    return G.cardinality()
