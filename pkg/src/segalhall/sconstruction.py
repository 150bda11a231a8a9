"""Waldhausen S-construction of a proto-exact instance.

The level-n groupoid consists of triangular flag diagrams (W_ij) over
0 <= i < j <= n: the top row is a chain of inflations
W_01 >--> W_02 >--> ... >--> W_0n and each subsequent row presents the
quotients of the row above by its first entry.  Diagonal entries W_ii = 0
are implicit; elementary squares touching the diagonal state that the
vertical composite kills the incoming horizontal inflation, and one-step
size additivity then forces every kernel to be exactly the incoming image,
which makes all sub-rectangles biCartesian.

Enumeration works with canonical representatives throughout.  An inflation
between canonical representatives factors uniquely as a site inclusion
preceded by an automorphism of the subobject, and a deflation with a
prescribed kernel factors uniquely as a site projection followed by an
automorphism of the quotient.  Levels are therefore parameterized
bijectively (no quotienting by diagram isomorphism happens anywhere), and
groupoid cardinalities come out on the nose.

Diagram morphisms are componentwise isomorphisms commuting with all
structure maps.  The top-row components determine everything below by
descending through the (epi) presentations, so hom-sets are enumerated by
running over top-row automorphism tuples and propagating downward.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from . import budget
from .groupoids import FiniteGroupoid, Functor, Mor
from .simplicial import SimplicialMap, TruncatedSimplicialGroupoid


@lru_cache(maxsize=None)
def _pairs(n: int):
    return tuple((i, j) for i in range(n + 1) for j in range(i + 1, n + 1))


@lru_cache(maxsize=None)
def _hpairs(n: int):
    return tuple(p for p in _pairs(n) if p[1] < n)


@lru_cache(maxsize=None)
def _vpairs(n: int):
    return tuple(p for p in _pairs(n) if p[0] + 1 < p[1])


@lru_cache(maxsize=None)
def _index(pairs: tuple) -> dict:
    return {p: k for k, p in enumerate(pairs)}


@dataclass(frozen=True)
class FlagDiagram:
    """Entries and structure maps of one flag, aligned with _pairs(n).

    hmaps[(i,j)] is the inflation W_ij >--> W_i,j+1 (stored for j < n);
    vmaps[(i,j)] is the deflation W_ij ->> W_i+1,j (stored for i+1 < j).
    The missing maps into and out of diagonal zeros are recovered as zero
    morphisms where needed.
    """

    n: int
    entries: tuple
    hmaps: tuple
    vmaps: tuple

    def entry(self, i: int, j: int):
        return self.entries[_index(_pairs(self.n))[(i, j)]]

    def hmap(self, i: int, j: int) -> Mor:
        return self.hmaps[_index(_hpairs(self.n))[(i, j)]]

    def vmap(self, i: int, j: int) -> Mor:
        return self.vmaps[_index(_vpairs(self.n))[(i, j)]]

    def __repr__(self):
        if self.n == 0:
            return "<Flag []>"
        top = ", ".join(repr(self.entry(0, j)) for j in range(1, self.n + 1))
        return f"<Flag n={self.n} top=[{top}]>"


# -- composite structure maps ------------------------------------------------


def _hcomp(inst, D: FlagDiagram, i: int, j: int, k: int) -> Mor:
    """Composite horizontal W_ij -> W_ik for i < j <= k."""
    f = inst.identity(D.entry(i, j))
    for c in range(j, k):
        f = inst.compose(D.hmap(i, c), f)
    return f


def _vcomp(inst, D: FlagDiagram, i: int, k: int, j: int) -> Mor:
    """Composite vertical W_ij -> W_kj for i <= k < j."""
    f = inst.identity(D.entry(i, j))
    for r in range(i, k):
        f = inst.compose(D.vmap(r, j), f)
    return f


def _size_sum(a, b):
    if isinstance(a, tuple):
        return tuple(x + y for x, y in zip(a, b))
    return a + b


def validate_flag_diagram(inst, D: FlagDiagram) -> None:
    """Assert the flag axioms.

    Canonical entries, typed rows and columns, commuting elementary squares
    (zero composites along the diagonal), and one-step size additivity.
    Together these force each row pair to be a conflation, hence every
    sub-rectangle to be biCartesian.
    """
    n = D.n
    for (i, j) in _pairs(n):
        W = D.entry(i, j)
        assert W == inst.object_of_key(inst.iso_key(W)), \
            f"entry ({i},{j}) is not a canonical representative"
    for (i, j) in _hpairs(n):
        h = D.hmap(i, j)
        assert h.src == D.entry(i, j) and h.tgt == D.entry(i, j + 1)
        assert inst.is_inflation(h), f"hmap ({i},{j}) is not an inflation"
    for (i, j) in _vpairs(n):
        v = D.vmap(i, j)
        assert v.src == D.entry(i, j) and v.tgt == D.entry(i + 1, j)
        assert inst.is_deflation(v), f"vmap ({i},{j}) is not a deflation"
    for i in range(n):
        for j in range(i + 1, n):
            lhs = inst.compose(D.vmap(i, j + 1), D.hmap(i, j))
            if i + 1 == j:
                rhs = inst.zero_morphism(D.entry(i, j), D.entry(j, j + 1))
            else:
                rhs = inst.compose(D.hmap(i + 1, j), D.vmap(i, j))
            assert lhs == rhs, f"square ({i},{j}) does not commute"
            sz = inst.size_of_key(inst.iso_key(D.entry(i, j + 1)))
            expected = _size_sum(
                inst.size_of_key(inst.iso_key(D.entry(i, j))),
                inst.size_of_key(inst.iso_key(D.entry(j, j + 1))))
            assert sz == expected, f"size additivity fails at ({i},{j})"


# -- enumeration ---------------------------------------------------------------


def _chain_comp(inst, entries, maps, a: int, b: int) -> Mor:
    f = inst.identity(entries[a])
    for c in range(a, b):
        f = inst.compose(maps[c], f)
    return f


def _inflation_chains(inst, V, length: int):
    """All chains W_0 >--> ... >--> W_length = V between canonical reps.

    Factoring as (site inclusion) after (subobject automorphism) hits every
    inflation exactly once.
    """
    if length == 0:
        yield (V,), ()
        return
    for site in inst.admissible_subobjects(V):
        sub = inst.object_of_key(site.sub_key)
        for alpha in inst.automorphisms(sub):
            step = inst.compose(site.incl, alpha)
            for objs, maps in _inflation_chains(inst, sub, length - 1):
                budget.tick()
                yield objs + (V,), maps + (step,)


def _base_site(inst, entries, maps, j: int):
    """The unique site of entries[j] whose subobject is the chain image."""
    k = _chain_comp(inst, entries, maps, 0, j)
    key0 = inst.iso_key(entries[0])
    for site in inst.admissible_subobjects(entries[j]):
        if site.sub_key != key0:
            continue
        # same size and containment force equality of images
        if inst.lift_through_inflation(site.incl, k) is not None:
            return site
    raise AssertionError("no presentation site found; flag axioms violated")


def _row_attachments(inst, entries, maps):
    """Ways to hang the next quotient row under an inflation chain.

    Yields (row_entries, row_hmaps, presentations); presentations[t] is the
    deflation entries[t+1] ->> row_entries[t].  Derived horizontals are
    forced by descending through the presentations.
    """
    m = len(entries) - 1
    bases = [_base_site(inst, entries, maps, j) for j in range(1, m + 1)]
    quots = [inst.object_of_key(b.quot_key) for b in bases]
    auts = [inst.automorphisms(Q) for Q in quots]
    for betas in itertools.product(*auts):
        budget.tick()
        ps = tuple(inst.compose(beta, site.proj)
                   for beta, site in zip(betas, bases))
        hs = []
        for t in range(m - 1):
            h = inst.descend_through_deflation(
                ps[t], inst.compose(ps[t + 1], maps[t + 1]))
            # the composite kills ker ps[t] = im(chain), so descent exists
            assert h is not None and inst.is_inflation(h)
            hs.append(h)
        yield tuple(quots), tuple(hs), ps


def _lower_rows(inst, entries, maps):
    if len(entries) == 1:
        yield (), ()
        return
    for quots, qmaps, ps in _row_attachments(inst, entries, maps):
        for rows, stacks in _lower_rows(inst, quots, qmaps):
            yield ((quots, qmaps),) + rows, (ps,) + stacks


def _assemble(n, top_entries, top_maps, rows, stacks) -> FlagDiagram:
    row_entries = [top_entries] + [r[0] for r in rows]
    row_hmaps = [top_maps] + [r[1] for r in rows]
    entries = tuple(row_entries[i][j - i - 1] for (i, j) in _pairs(n))
    hmaps = tuple(row_hmaps[i][j - i - 1] for (i, j) in _hpairs(n))
    vmaps = tuple(stacks[i][j - i - 2] for (i, j) in _vpairs(n))
    return FlagDiagram(n, entries, hmaps, vmaps)


def enumerate_flag_diagrams(inst, n: int, cap):
    """All level-n flags whose total object W_0n fits under the size cap."""
    if n == 0:
        return (FlagDiagram(0, (), (), ()),)
    out = []
    for size in inst.sizes_upto(cap):
        for V in inst.enumerate_objects(size):
            for objs, maps in _inflation_chains(inst, V, n - 1):
                for rows, stacks in _lower_rows(inst, objs, maps):
                    out.append(_assemble(n, objs, maps, rows, stacks))
    return tuple(out)


# -- diagram morphisms ---------------------------------------------------------


def _diagram_isos(inst, D: FlagDiagram, E: FlagDiagram):
    if D.n != E.n or D.entries != E.entries:
        return
    n = D.n
    if n == 0:
        yield Mor(D, E, ())
        return
    tops = [inst.automorphisms(D.entry(0, j)) for j in range(1, n + 1)]
    for cand in itertools.product(*tops):
        budget.tick()
        comps = {(0, j): cand[j - 1] for j in range(1, n + 1)}
        if _propagate(inst, D, E, comps):
            yield Mor(D, E, tuple(comps[p] for p in _pairs(n)))


def _propagate(inst, D: FlagDiagram, E: FlagDiagram, comps: dict) -> bool:
    """Extend top-row components downward; False if any square fails."""
    n = D.n
    for j in range(1, n):
        lhs = inst.compose(comps[(0, j + 1)], D.hmap(0, j))
        rhs = inst.compose(E.hmap(0, j), comps[(0, j)])
        if lhs != rhs:
            return False
    for i in range(1, n):
        for j in range(i + 1, n + 1):
            down = inst.compose(E.vmap(i - 1, j), comps[(i - 1, j)])
            phi = inst.descend_through_deflation(D.vmap(i - 1, j), down)
            if phi is None:
                return False
            comps[(i, j)] = phi
        for j in range(i + 1, n):
            lhs = inst.compose(comps[(i, j + 1)], D.hmap(i, j))
            rhs = inst.compose(E.hmap(i, j), comps[(i, j)])
            if lhs != rhs:
                return False
    return True


def _level_groupoid(inst, n: int, cap, name: str) -> FiniteGroupoid:
    objs = enumerate_flag_diagrams(inst, n, cap)

    def hom_fn(D, E):
        return _diagram_isos(inst, D, E)

    def compose_fn(g, f):
        comps = tuple(inst.compose(cg, cf) for cg, cf in zip(g.data, f.data))
        return Mor(f.src, g.tgt, comps)

    def identity_fn(D):
        return Mor(D, D, tuple(inst.identity(W) for W in D.entries))

    return FiniteGroupoid(objs, hom_fn, compose_fn, identity_fn,
                          sig_fn=lambda D: D.entries, name=name)


# -- face and degeneracy functors ----------------------------------------------


def _face_diagram(inst, D: FlagDiagram, k: int) -> FlagDiagram:
    """Delete vertex k; new structure maps are composites of old ones."""
    n = D.n

    def psi(v):
        return v if v < k else v + 1

    entries = tuple(D.entry(psi(i), psi(j)) for (i, j) in _pairs(n - 1))
    hmaps = tuple(_hcomp(inst, D, psi(i), psi(j), psi(j + 1))
                  for (i, j) in _hpairs(n - 1))
    vmaps = tuple(_vcomp(inst, D, psi(i), psi(i + 1), psi(j))
                  for (i, j) in _vpairs(n - 1))
    return FlagDiagram(n - 1, entries, hmaps, vmaps)


def _face_functor(inst, src: FiniteGroupoid, tgt: FiniteGroupoid,
                  n: int, k: int) -> Functor:
    idx = _index(_pairs(n))

    def psi(v):
        return v if v < k else v + 1

    def obj_map(D):
        return _face_diagram(inst, D, k)

    def mor_map(m):
        comps = tuple(m.data[idx[(psi(i), psi(j))]] for (i, j) in _pairs(n - 1))
        return Mor(obj_map(m.src), obj_map(m.tgt), comps)

    return Functor(src, tgt, obj_map, mor_map, name=f"d_{k}")


def _degeneracy_diagram(inst, D: FlagDiagram, k: int) -> FlagDiagram:
    """Repeat vertex k; inserts a zero entry at (k, k+1)."""
    n = D.n
    zero = inst.object_of_key(inst.zero_key())

    def sig(v):
        return v if v <= k else v - 1

    entries = tuple(zero if sig(i) == sig(j) else D.entry(sig(i), sig(j))
                    for (i, j) in _pairs(n + 1))
    hmaps = []
    for (i, j) in _hpairs(n + 1):
        si, sj, sj1 = sig(i), sig(j), sig(j + 1)
        if si == sj:
            hmaps.append(inst.zero_morphism(zero, D.entry(si, sj1)))
        elif sj == sj1:
            hmaps.append(inst.identity(D.entry(si, sj)))
        else:
            hmaps.append(D.hmap(si, sj))
    vmaps = []
    for (i, j) in _vpairs(n + 1):
        si, si1, sj = sig(i), sig(i + 1), sig(j)
        if si1 == sj:
            vmaps.append(inst.zero_morphism(D.entry(si, sj), zero))
        elif si == si1:
            vmaps.append(inst.identity(D.entry(si, sj)))
        else:
            vmaps.append(D.vmap(si, sj))
    return FlagDiagram(n + 1, entries, tuple(hmaps), tuple(vmaps))


def _degeneracy_functor(inst, src: FiniteGroupoid, tgt: FiniteGroupoid,
                        n: int, k: int) -> Functor:
    idx = _index(_pairs(n))
    zero = inst.object_of_key(inst.zero_key())

    def sig(v):
        return v if v <= k else v - 1

    def obj_map(D):
        return _degeneracy_diagram(inst, D, k)

    def mor_map(m):
        comps = tuple(
            inst.identity(zero) if sig(i) == sig(j)
            else m.data[idx[(sig(i), sig(j))]]
            for (i, j) in _pairs(n + 1))
        return Mor(obj_map(m.src), obj_map(m.tgt), comps)

    return Functor(src, tgt, obj_map, mor_map, name=f"s_{k}")


# -- the truncated simplicial groupoid -----------------------------------------


def s_construction(inst, cap, n_max: int = 3,
                   name: str = "") -> TruncatedSimplicialGroupoid:
    """Levels S_0 .. S_{n_max} with all faces and degeneracies.

    Face maps delete a flag vertex (d_0 keeps the quotient, d_n the
    subobject, inner faces compose), degeneracies insert zero entries.
    Raises budget.BudgetExceeded when the cap makes a level too large for
    the installed work budget.
    """
    if not 0 <= n_max <= 4:
        raise ValueError("n_max must be between 0 and 4")
    label = name or f"S({inst.name})"
    levels = [
        _level_groupoid(inst, n, cap, name=f"{label}_{n}")
        for n in range(n_max + 1)
    ]
    faces = {}
    for n in range(1, n_max + 1):
        for k in range(n + 1):
            faces[(n, k)] = _face_functor(inst, levels[n], levels[n - 1], n, k)
    degeneracies = {}
    for n in range(n_max):
        for k in range(n + 1):
            degeneracies[(n, k)] = _degeneracy_functor(
                inst, levels[n], levels[n + 1], n, k)
    return TruncatedSimplicialGroupoid(levels, faces, degeneracies, name=label)


def induced_inclusion(sub_s: TruncatedSimplicialGroupoid,
                      amb_s: TruncatedSimplicialGroupoid,
                      name: str = "") -> SimplicialMap:
    """Levelwise inclusion induced by a subcategory inclusion.

    Flags over a restricted instance are literally flags over the ambient
    instance, so every level map is the identity on diagrams; the ambient
    construction must have been built with a cap at least as permissive.
    """
    top = min(sub_s.top, amb_s.top)
    levels = []
    for n in range(top + 1):
        tgt_objects = set(amb_s.level(n).objects)
        for D in sub_s.level(n).objects:
            if D not in tgt_objects:
                raise ValueError(
                    f"level {n} flag missing from ambient construction; "
                    "was the ambient cap large enough?")
        levels.append(Functor(sub_s.level(n), amb_s.level(n),
                              lambda D: D, lambda m: m,
                              name=f"incl_{n}"))
    return SimplicialMap(sub_s, amb_s, levels, name=name or "inclusion")
