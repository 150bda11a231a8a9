"""Truncated simplicial groupoids and the Segal-type condition checkers.

A truncated simplicial groupoid stores levels X_0 .. X_N as FiniteGroupoids
together with strict face and degeneracy functors.  All conditions below
(1-Segal, 2-Segal, unitality, CULF, IKEO, relative 2-Segal) are families of
squares required to be homotopy Cartesian; each checker builds the canonical
comparison functor into the iso-comma pullback and tests it for being an
equivalence, reporting a verdict per square.

The square families:

- 1-Segal: for n >= 2 and 0 <= i <= n, the square with corners
  X_n, X_{i..n}, X_{0..i}, X_{i} is Cartesian.
- 2-Segal: for n >= 3 and 0 <= i < j <= n, the square with corners
  X_n, X_{i..j}, X_{0..i,j..n}, X_{i,j} is Cartesian.
- unital: for n >= 2 and 0 <= i <= n-1, the square with corners
  X_{n-1}, X_n (via s_i), X_{i} and X_{i,i+1} is Cartesian.
- CULF (for a simplicial map F: Y -> X): for n >= 1 the naturality square of
  the long edge restriction X_n -> X_1 is Cartesian.
- IKEO: F_0 is an equivalence and for n >= 1 the naturality square of the
  comparison into the edgewise fiber product X_1 x_{X_0} ... x_{X_0} X_1
  is Cartesian.
- relative 2-Segal (F: Y -> X with X 2-Segal): Y is 1-Segal and for n >= 2,
  0 <= i < j <= n the outer square with corners Y_n, Y_{0..i,j..n},
  X_{i..j}, X_{i,j} is Cartesian.

All restrictions are computed by composing face functors, so strictness of
the stored simplicial identities is what makes every comparison square
commute on the nose; validate_simplicial_identities checks that assumption
exhaustively and the square builders re-assert it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .groupoids import (
    FiniteGroupoid,
    Functor,
    cartesian_square_report,
    chain_fiber_product,
    compose_functors,
    identity_functor,
    is_equivalence,
)


class TruncatedSimplicialGroupoid:
    def __init__(self, levels, faces, degeneracies, name: str = ""):
        """levels: X_0..X_N; faces[(n,i)]: X_n -> X_{n-1} for 0 <= i <= n;
        degeneracies[(n,i)]: X_n -> X_{n+1} for 0 <= i <= n."""
        self.levels = tuple(levels)
        self.faces = dict(faces)
        self.degeneracies = dict(degeneracies)
        self.name = name
        self._restrictions: dict = {}
        for n in range(1, self.top + 1):
            for i in range(n + 1):
                if (n, i) not in self.faces:
                    raise ValueError(f"missing face ({n},{i})")
        for n in range(self.top):
            for i in range(n + 1):
                if (n, i) not in self.degeneracies:
                    raise ValueError(f"missing degeneracy ({n},{i})")

    @property
    def top(self) -> int:
        return len(self.levels) - 1

    def level(self, n: int) -> FiniteGroupoid:
        if not 0 <= n <= self.top:
            raise ValueError(f"level {n} not stored (top is {self.top})")
        return self.levels[n]

    def face(self, n: int, i: int) -> Functor:
        return self.faces[(n, i)]

    def degeneracy(self, n: int, i: int) -> Functor:
        return self.degeneracies[(n, i)]

    def restriction(self, n: int, vertices) -> Functor:
        """Functor X_n -> X_{m} induced by a vertex subset of size m+1,
        i.e. by the injective monotone map picking out those vertices."""
        vertices = tuple(vertices)
        if not vertices or list(vertices) != sorted(set(vertices)):
            raise ValueError("vertices must be a nonempty strictly increasing tuple")
        if vertices[-1] > n:
            raise ValueError("vertex out of range")
        key = (n, vertices)
        got = self._restrictions.get(key)
        if got is not None:
            return got
        F = identity_functor(self.level(n))
        lvl = n
        missing = [v for v in range(n + 1) if v not in vertices]
        for j in sorted(missing, reverse=True):
            # dropping the largest remaining vertex first keeps lower indices stable
            F = compose_functors(self.face(lvl, j), F)
            lvl -= 1
        F.name = f"restr{list(vertices)}"
        self._restrictions[key] = F
        return F

    def __repr__(self):
        sizes = ", ".join(str(len(L.objects)) for L in self.levels)
        return f"<TruncatedSimplicialGroupoid {self.name!r}: sizes [{sizes}]>"


def all_morphisms(G: FiniteGroupoid):
    """Iterate all morphisms, visiting only signature-compatible pairs."""
    buckets: dict = {}
    for x in G.objects:
        buckets.setdefault(G.sig(x), []).append(x)
    for xs in buckets.values():
        for x in xs:
            for y in xs:
                yield from G.hom(x, y)


def functors_agree(F: Functor, G: Functor, on_morphisms: bool = True) -> bool:
    if F.src is not G.src:
        raise ValueError("different sources")
    for x in F.src.objects:
        if F.obj(x) != G.obj(x):
            return False
    if on_morphisms:
        for m in all_morphisms(F.src):
            if F.mor(m) != G.mor(m):
                return False
    return True


def validate_simplicial_identities(X: TruncatedSimplicialGroupoid,
                                   on_morphisms: bool = True) -> None:
    """Assert d_i d_j = d_{j-1} d_i, the s s and mixed d s identities, all
    strictly (object- and morphism-wise).  Raises AssertionError on failure."""
    c = compose_functors
    for n in range(2, X.top + 1):
        for j in range(n + 1):
            for i in range(j):
                lhs = c(X.face(n - 1, i), X.face(n, j))
                rhs = c(X.face(n - 1, j - 1), X.face(n, i))
                assert functors_agree(lhs, rhs, on_morphisms), f"dd failure n={n} i={i} j={j}"
    for n in range(X.top - 1):
        for j in range(n + 1):
            for i in range(j + 1):
                lhs = c(X.degeneracy(n + 1, j + 1), X.degeneracy(n, i))
                rhs = c(X.degeneracy(n + 1, i), X.degeneracy(n, j))
                assert functors_agree(lhs, rhs, on_morphisms), f"ss failure n={n} i={i} j={j}"
    for n in range(X.top):
        for j in range(n + 1):
            for i in range(n + 2):
                ds = c(X.face(n + 1, i), X.degeneracy(n, j))
                if i == j or i == j + 1:
                    assert functors_agree(ds, identity_functor(X.level(n)), on_morphisms), \
                        f"ds != id at n={n} i={i} j={j}"
                elif i < j:
                    rhs = c(X.degeneracy(n - 1, j - 1), X.face(n, i))
                    assert functors_agree(ds, rhs, on_morphisms), f"ds failure n={n} i={i} j={j}"
                else:
                    rhs = c(X.degeneracy(n - 1, j), X.face(n, i - 1))
                    assert functors_agree(ds, rhs, on_morphisms), f"ds failure n={n} i={i} j={j}"


class SimplicialMap:
    """Strictly simplicial levelwise functor Y -> X on the stored levels."""

    def __init__(self, src: TruncatedSimplicialGroupoid,
                 tgt: TruncatedSimplicialGroupoid, levels, name: str = ""):
        self.src = src
        self.tgt = tgt
        self.level_maps = tuple(levels)
        self.name = name
        if len(self.level_maps) > min(src.top, tgt.top) + 1:
            raise ValueError("more level maps than stored levels")

    @property
    def top(self) -> int:
        return len(self.level_maps) - 1

    def level(self, n: int) -> Functor:
        return self.level_maps[n]

    def validate(self, on_morphisms: bool = True) -> None:
        """Check strict commutation with all faces and degeneracies."""
        c = compose_functors
        for n in range(1, self.top + 1):
            for i in range(n + 1):
                lhs = c(self.level(n - 1), self.src.face(n, i))
                rhs = c(self.tgt.face(n, i), self.level(n))
                assert functors_agree(lhs, rhs, on_morphisms), \
                    f"map does not commute with face ({n},{i})"
        for n in range(self.top):
            for i in range(n + 1):
                lhs = c(self.level(n + 1), self.src.degeneracy(n, i))
                rhs = c(self.tgt.degeneracy(n, i), self.level(n))
                assert functors_agree(lhs, rhs, on_morphisms), \
                    f"map does not commute with degeneracy ({n},{i})"


# -- reports -----------------------------------------------------------------


@dataclass
class CheckEntry:
    label: tuple
    ok: bool
    detail: str = ""


@dataclass
class CheckReport:
    kind: str
    entries: list = field(default_factory=list)

    def add(self, label, ok, detail=""):
        self.entries.append(CheckEntry(tuple(label), bool(ok), detail))

    def finish(self) -> "CheckReport":
        self.entries.sort(key=lambda e: e.label)
        return self

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.ok]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "ok": self.ok,
            "squares": [
                {"label": list(e.label), "ok": e.ok, "detail": e.detail}
                for e in self.entries
            ],
        }

    def __str__(self):
        lines = [f"[{self.kind}] {'PASS' if self.ok else 'FAIL'}"]
        for e in self.entries:
            mark = "ok " if e.ok else "FAIL"
            msg = f" -- {e.detail}" if (e.detail and not e.ok) else ""
            lines.append(f"  {mark} {e.label}{msg}")
        return "\n".join(lines)


def report_to_json_str(report: CheckReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True, indent=2)


# -- condition checkers -------------------------------------------------------


def _require_levels(X: TruncatedSimplicialGroupoid, n_max: int):
    if n_max > X.top:
        raise ValueError(
            f"check needs levels up to {n_max} but only {X.top} are stored"
        )


def check_1segal(X: TruncatedSimplicialGroupoid, n_max: int) -> CheckReport:
    _require_levels(X, n_max)
    rep = CheckReport("1segal")
    for n in range(2, n_max + 1):
        for i in range(n + 1):
            left = X.restriction(n, tuple(range(0, i + 1)))
            top = X.restriction(n, tuple(range(i, n + 1)))
            F = X.restriction(i, (i,))       # X_{0..i} -> X_{i}
            G = X.restriction(n - i, (0,))   # X_{i..n} -> X_{i}
            res = cartesian_square_report(X.level(n), left, top, F, G)
            rep.add((n, i), res.ok, res.reason)
    return rep.finish()


def check_2segal(X: TruncatedSimplicialGroupoid, n_max: int) -> CheckReport:
    """All (n,i,j) polygonal subdivision squares, 3 <= n <= n_max.

    Squares with j = i+1 or (i,j) = (0,n) are Cartesian for formal reasons
    and are skipped to keep reports readable."""
    _require_levels(X, n_max)
    rep = CheckReport("2segal")
    for n in range(3, n_max + 1):
        for i in range(n + 1):
            for j in range(i + 2, n + 1):
                if (i, j) == (0, n):
                    continue
                top = X.restriction(n, tuple(range(i, j + 1)))          # -> X_{j-i}
                left = X.restriction(n, tuple(range(0, i + 1)) + tuple(range(j, n + 1)))
                F = X.restriction(j - i, (0, j - i))                     # X_{j-i} -> X_1
                G = X.restriction(n - (j - i) + 1, (i, i + 1))           # -> X_1
                res = cartesian_square_report(X.level(n), left, top, G, F)
                rep.add((n, i, j), res.ok, res.reason)
    return rep.finish()


def check_unital(X: TruncatedSimplicialGroupoid, n_max: int) -> CheckReport:
    _require_levels(X, n_max)
    rep = CheckReport("unital")
    for n in range(2, n_max + 1):
        for i in range(n):
            apex = X.level(n - 1)
            left = X.restriction(n - 1, (i,))       # -> X_0
            top = X.degeneracy(n - 1, i)            # -> X_n
            F = X.degeneracy(0, 0)                  # X_0 -> X_1
            G = X.restriction(n, (i, i + 1))        # X_n -> X_1
            res = cartesian_square_report(apex, left, top, F, G)
            rep.add((n, i), res.ok, res.reason)
    return rep.finish()


def check_culf(F: SimplicialMap, n_max: int) -> CheckReport:
    Y, X = F.src, F.tgt
    _require_levels(Y, n_max)
    _require_levels(X, n_max)
    if n_max > F.top:
        raise ValueError("map not defined up to requested level")
    rep = CheckReport("culf")
    for n in range(1, n_max + 1):
        left = Y.restriction(n, (0, n))
        res = cartesian_square_report(
            Y.level(n), left, F.level(n), F.level(1), X.restriction(n, (0, n))
        )
        rep.add((n,), res.ok, res.reason)
    return rep.finish()


def _edgewise_chain(X: TruncatedSimplicialGroupoid, n: int):
    """X_1 x_{X_0} ... x_{X_0} X_1 (n factors) plus the strict comparison
    functor from X_n built from the inert edge restrictions."""
    X1, X0 = X.level(1), X.level(0)
    to_end = X.restriction(1, (1,))    # X_1 -> X_0, target vertex
    to_start = X.restriction(1, (0,))  # X_1 -> X_0, source vertex
    P, projections = chain_fiber_product(
        [X1] * n, [to_end] * (n - 1), [to_start] * (n - 1)
    )
    edge = [X.restriction(n, (i, i + 1)) for i in range(n)]

    def obj_map(x):
        xs = tuple(e.obj(x) for e in edge)
        gammas = tuple(
            X0.identity(to_end.obj(xs[i])) for i in range(n - 1)
        )
        for i in range(n - 1):
            if to_end.obj(xs[i]) != to_start.obj(xs[i + 1]):
                raise AssertionError("edge restrictions do not match on vertices")
        return (xs, gammas)

    def mor_map(m):
        return type(m)(obj_map(m.src), obj_map(m.tgt),
                       tuple(e.mor(m) for e in edge))

    cmp = Functor(X.level(n), P, obj_map, mor_map, name=f"edges_{n}")
    return P, projections, cmp


def check_ikeo(F: SimplicialMap, n_max: int) -> CheckReport:
    Y, X = F.src, F.tgt
    _require_levels(Y, n_max)
    _require_levels(X, n_max)
    if n_max > F.top:
        raise ValueError("map not defined up to requested level")
    rep = CheckReport("ikeo")
    res0 = is_equivalence(F.level(0))
    rep.add((0,), res0.ok, res0.reason)
    for n in range(1, n_max + 1):
        PY, _, cmpY = _edgewise_chain(Y, n)
        PX, _, cmpX = _edgewise_chain(X, n)
        F1, F0 = F.level(1), F.level(0)

        def chain_obj(p):
            xs, gammas = p
            return (tuple(F1.obj(x) for x in xs),
                    tuple(F0.mor(g) for g in gammas))

        def chain_mor(m):
            return type(m)(chain_obj(m.src), chain_obj(m.tgt),
                           tuple(F1.mor(u) for u in m.data))

        Fchain = Functor(PY, PX, chain_obj, chain_mor, name=f"F^x{n}")
        res = cartesian_square_report(Y.level(n), cmpY, F.level(n), Fchain, cmpX)
        rep.add((n,), res.ok, res.reason)
    return rep.finish()


def check_relative_2segal(F: SimplicialMap, n_max: int) -> CheckReport:
    """Y is 1-Segal and the outer (i,j) squares over X are Cartesian."""
    Y, X = F.src, F.tgt
    _require_levels(Y, n_max)
    _require_levels(X, n_max)
    if n_max > F.top:
        raise ValueError("map not defined up to requested level")
    rep = CheckReport("relative-2segal")
    for e in check_1segal(Y, n_max).entries:
        rep.add(("1segal",) + e.label, e.ok, e.detail)
    for n in range(2, n_max + 1):
        for i in range(n + 1):
            for j in range(i + 1, n + 1):
                left = compose_functors(
                    F.level(j - i), Y.restriction(n, tuple(range(i, j + 1)))
                )
                top = Y.restriction(n, tuple(range(0, i + 1)) + tuple(range(j, n + 1)))
                A_to_C = X.restriction(j - i, (0, j - i))
                B_to_C = compose_functors(F.level(1),
                                          Y.restriction(n - (j - i) + 1, (i, i + 1)))
                res = cartesian_square_report(Y.level(n), left, top, A_to_C, B_to_C)
                rep.add(("square", n, i, j), res.ok, res.reason)
    return rep.finish()
