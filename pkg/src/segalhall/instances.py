"""Finitary proto-exact instances.

Each instance is a capability record describing a finitary proto-exact
category concretely enough for the simplicial machinery downstream:
canonical object representatives per size, isomorphism keys, morphism
composition, inclusion/projection data for every admissible subobject, and
(for the exact instances) extension classes via the standard two-term
resolution.

Instances provided:

- vect_fq(q): finite dimensional F_q-vector spaces,
- vect_f1(): finite pointed sets with partial injections,
- rep_fq(quiver, q): representations of an acyclic quiver over F_q,
- rep_f1(quiver): representations of an acyclic quiver in pointed sets,
- nil_jordan(q): nilpotent F_q[x]-modules, keyed by partitions.

Conventions.  Morphisms are groupoids.Mor records whose data payload is
instance specific (a Matrix, a tuple of Matrices, or an image tuple for
pointed maps).  A Site records one admissible subobject U' of V as a pair
(incl, proj) with incl an inflation out of the canonical representative of
[U'] and proj a deflation onto the canonical representative of [V/U'];
structure constants count sites with given sub and quotient keys.

For quiver representations, the orientation of Ext is fixed by the
resolution: an arrow i -> j makes Ext^1 from S_i to S_j one dimensional,
i.e. ext1_classes(S_i, S_j) contains a nonsplit class whose middle term is
the projective cover of S_i.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from . import budget
from .fields import (
    FiniteField,
    Matrix,
    all_matrices,
    general_linear,
    gl_order,
    subspaces,
)
from .groupoids import Mor


@dataclass(frozen=True)
class Site:
    """One admissible subobject of a fixed V, as a conflation
    U_rep --incl--> V --proj--> W_rep with canonical-representative ends."""

    sub_key: Any
    quot_key: Any
    incl: Mor
    proj: Mor


@dataclass(frozen=True)
class ExtClass:
    """One element of Ext^1(W, U): a conflation U -> middle -> W."""

    middle_key: Any
    incl: Mor
    proj: Mor


class ProtoExactInstance:
    """Base capability record; concrete instances override the primitives."""

    name = "abstract"

    # -- object layer ------------------------------------------------------

    def zero_key(self):
        raise NotImplementedError

    def sizes_upto(self, cap):
        raise NotImplementedError

    def size_of_key(self, key):
        raise NotImplementedError

    def enumerate_objects(self, size):
        """Canonical representatives of all iso classes of the given size."""
        raise NotImplementedError

    def iso_key(self, obj):
        raise NotImplementedError

    def object_of_key(self, key):
        raise NotImplementedError

    def format_key(self, key) -> str:
        return repr(key)

    # -- morphism layer ----------------------------------------------------

    def compose(self, g: Mor, f: Mor) -> Mor:
        if f.tgt != g.src:
            raise ValueError("not composable")
        return Mor(f.src, g.tgt, self._compose_data(g.data, f.data))

    def _compose_data(self, g, f):
        """Compose raw morphism payloads."""
        raise NotImplementedError

    def identity(self, obj) -> Mor:
        raise NotImplementedError

    def zero_morphism(self, A, B) -> Mor:
        raise NotImplementedError

    def hom_set(self, A, B):
        raise NotImplementedError

    def automorphisms(self, obj):
        raise NotImplementedError

    def aut_order(self, key) -> int:
        return len(self.automorphisms(self.object_of_key(key)))

    def is_inflation(self, f: Mor) -> bool:
        raise NotImplementedError

    def is_deflation(self, f: Mor) -> bool:
        raise NotImplementedError

    def is_iso(self, f: Mor) -> bool:
        return self.is_inflation(f) and self.is_deflation(f)

    # -- exact structure ----------------------------------------------------

    def admissible_subobjects(self, V):
        raise NotImplementedError

    def lift_through_inflation(self, i: Mor, f: Mor) -> Optional[Mor]:
        """g with i . g = f, or None."""
        raise NotImplementedError

    def descend_through_deflation(self, p: Mor, f: Mor) -> Optional[Mor]:
        """g with g . p = f, or None."""
        raise NotImplementedError

    def ext1_classes(self, W_key, U_key):
        raise NotImplementedError

    def hom_count(self, A_key, B_key) -> int:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# vect over F_q


class VectFqInstance(ProtoExactInstance):
    """Finite dimensional F_q vector spaces.  Objects are the ints n >= 0
    standing for F_q^n; morphism data is a Matrix."""

    def __init__(self, q: int):
        self.field = FiniteField(q)
        self.q = q
        self.name = f"vect_fq({q})"

    def zero_key(self):
        return 0

    def sizes_upto(self, cap):
        return list(range(cap + 1))

    def size_of_key(self, key):
        return key

    def enumerate_objects(self, size):
        return (size,)

    def iso_key(self, obj):
        return obj

    def object_of_key(self, key):
        return key

    def format_key(self, key):
        return str(key)

    def _compose_data(self, g, f):
        return g * f

    def identity(self, obj):
        return Mor(obj, obj, Matrix.identity(self.field, obj))

    def zero_morphism(self, A, B):
        return Mor(A, B, Matrix.zero(self.field, B, A))

    def hom_set(self, A, B):
        return tuple(Mor(A, B, m) for m in all_matrices(self.field, B, A))

    def automorphisms(self, obj):
        return tuple(Mor(obj, obj, g) for g in general_linear(self.field, obj))

    def aut_order(self, key):
        return gl_order(key, self.q)

    def is_inflation(self, f):
        return f.data.rank() == f.data.ncols

    def is_deflation(self, f):
        return f.data.rank() == f.data.nrows

    def admissible_subobjects(self, V):
        n = V
        out = []
        for d in range(n + 1):
            for B in subspaces(self.field, n, d):
                budget.tick()
                incl_mat = B.transpose()                      # F^d -> F^n
                proj_mat = incl_mat.transpose().kernel().transpose()
                out.append(Site(d, n - d,
                                Mor(d, n, incl_mat),
                                Mor(n, n - d, proj_mat)))
        return tuple(out)

    def lift_through_inflation(self, i, f):
        sol = i.data.solve_right(f.data)
        if sol is None or i.data * sol != f.data:
            return None
        return Mor(f.src, i.src, sol)

    def descend_through_deflation(self, p, f):
        sol = p.data.solve_left(f.data)
        if sol is None or sol * p.data != f.data:
            return None
        return Mor(p.tgt, f.tgt, sol)

    def ext1_classes(self, W_key, U_key):
        # Ext^1 vanishes; the split conflation is the single class
        U, W = U_key, W_key
        F = self.field
        incl = Matrix.blocks(F, [[Matrix.identity(F, U)], [Matrix.zero(F, W, U)]])
        proj = Matrix.blocks(F, [[Matrix.zero(F, W, U), Matrix.identity(F, W)]])
        return (ExtClass(U + W, Mor(U, U + W, incl), Mor(U + W, W, proj)),)

    def hom_count(self, A_key, B_key):
        return self.q ** (A_key * B_key)

    def site_count(self, U_key, W_key, V_key) -> int:
        """Number of U-dimensional subspaces of F_q^V with W-dimensional
        quotient, counted by pivot-column census over reduced row echelon
        forms: each choice of pivot columns contributes q^(#free entries),
        a free entry being a post-pivot non-pivot column in its row."""
        if U_key + W_key != V_key:
            return 0
        n, d = V_key, U_key
        total = 0
        for pivots in itertools.combinations(range(n), d):
            pivot_set = set(pivots)
            free = sum(
                1
                for p in pivots
                for c in range(p + 1, n)
                if c not in pivot_set
            )
            total += self.q ** free
        return total


# ---------------------------------------------------------------------------
# vect over F_1 (pointed sets)


def _pointed_maps(n, m):
    """All partial injections {1..n} -> {1..m} as image tuples (0 = basepoint)."""
    for img in itertools.product(range(m + 1), repeat=n):
        nz = [x for x in img if x]
        if len(nz) == len(set(nz)):
            yield img


class VectF1Instance(ProtoExactInstance):
    """Finite pointed sets with basepoint-preserving maps injective away
    from the basepoint.  Objects are ints n (the set {0,1..n}, 0 based)."""

    def __init__(self):
        self.name = "vect_f1"
        self.field = None

    def zero_key(self):
        return 0

    def sizes_upto(self, cap):
        return list(range(cap + 1))

    def size_of_key(self, key):
        return key

    def enumerate_objects(self, size):
        return (size,)

    def iso_key(self, obj):
        return obj

    def object_of_key(self, key):
        return key

    def format_key(self, key):
        return str(key)

    def _compose_data(self, g, f):
        return tuple(g[x - 1] if x else 0 for x in f)

    def identity(self, obj):
        return Mor(obj, obj, tuple(range(1, obj + 1)))

    def zero_morphism(self, A, B):
        return Mor(A, B, (0,) * A)

    def hom_set(self, A, B):
        return tuple(Mor(A, B, img) for img in _pointed_maps(A, B))

    def automorphisms(self, obj):
        return tuple(
            Mor(obj, obj, tuple(p))
            for p in itertools.permutations(range(1, obj + 1))
        )

    def aut_order(self, key):
        out = 1
        for i in range(2, key + 1):
            out *= i
        return out

    def is_inflation(self, f):
        return all(x != 0 for x in f.data)

    def is_deflation(self, f):
        return set(x for x in f.data if x) == set(range(1, f.tgt + 1))

    def admissible_subobjects(self, V):
        out = []
        for r in range(V + 1):
            for S in itertools.combinations(range(1, V + 1), r):
                budget.tick()
                comp = [x for x in range(1, V + 1) if x not in S]
                relabel = {x: i + 1 for i, x in enumerate(comp)}
                proj = tuple(relabel.get(x, 0) for x in range(1, V + 1))
                out.append(Site(r, V - r, Mor(r, V, S), Mor(V, V - r, proj)))
        return tuple(out)

    def lift_through_inflation(self, i, f):
        back = {x: k + 1 for k, x in enumerate(i.data)}
        lift = []
        for x in f.data:
            if x == 0:
                lift.append(0)
            elif x in back:
                lift.append(back[x])
            else:
                return None
        return Mor(f.src, i.src, tuple(lift))

    def descend_through_deflation(self, p, f):
        out = [None] * p.tgt
        for v in range(1, p.src + 1):
            c = p.data[v - 1]
            if c == 0:
                if f.data[v - 1] != 0:
                    return None
            else:
                if out[c - 1] is not None and out[c - 1] != f.data[v - 1]:
                    return None
                out[c - 1] = f.data[v - 1]
        if any(x is None for x in out):
            return None
        g = Mor(p.tgt, f.tgt, tuple(out))
        nz = [x for x in g.data if x]
        if len(nz) != len(set(nz)):
            return None
        return g

    def ext1_classes(self, W_key, U_key):
        # conflations split: V = U wedge W, one class
        U, W = U_key, W_key
        V = U + W
        incl = tuple(range(1, U + 1))
        proj = tuple([0] * U + list(range(1, W + 1)))
        return (ExtClass(V, Mor(U, V, incl), Mor(V, W, proj)),)

    def hom_count(self, A_key, B_key):
        return sum(1 for _ in _pointed_maps(A_key, B_key))


# ---------------------------------------------------------------------------
# quivers


@dataclass(frozen=True)
class Quiver:
    vertices: tuple
    arrows: tuple  # of (source, target, name)
    involution: Any = None  # optional (vertex_map dict, arrow_map dict)
    nilpotent: bool = False

    def __post_init__(self):
        names = [a[2] for a in self.arrows]
        if len(names) != len(set(names)):
            raise ValueError("duplicate arrow names")
        for s, t, _ in self.arrows:
            if s not in self.vertices or t not in self.vertices:
                raise ValueError("arrow endpoint not a vertex")
        if not self.nilpotent and self.has_cycle():
            raise ValueError("cyclic quiver requires the nilpotent flag")
        if self.involution is not None:
            vmap, amap = self.involution
            for v in self.vertices:
                if vmap[vmap[v]] != v:
                    raise ValueError("vertex involution is not an involution")
            arr = {a[2]: a for a in self.arrows}
            for s, t, nm in self.arrows:
                s2, t2, _ = arr[amap[nm]]
                if (s2, t2) != (vmap[t], vmap[s]):
                    raise ValueError("arrow involution must reverse arrows")
                if amap[amap[nm]] != nm:
                    raise ValueError("arrow involution is not an involution")

    def has_cycle(self) -> bool:
        adj = {v: [] for v in self.vertices}
        for s, t, _ in self.arrows:
            adj[s].append(t)
        state = {v: 0 for v in self.vertices}

        def dfs(v):
            state[v] = 1
            for w in adj[v]:
                if state[w] == 1 or (state[w] == 0 and dfs(w)):
                    return True
            state[v] = 2
            return False

        return any(state[v] == 0 and dfs(v) for v in self.vertices)

    def vertex_index(self, v) -> int:
        return self.vertices.index(v)

    @staticmethod
    def from_json(data) -> "Quiver":
        if isinstance(data, str):
            data = json.loads(data)
        vertices = tuple(data["vertices"])
        arrows = tuple((a["from"], a["to"], a["name"]) for a in data["arrows"])
        inv = None
        if data.get("involution"):
            inv = (dict(data["involution"]["vertices"]),
                   dict(data["involution"]["arrows"]))
        return Quiver(vertices, arrows, inv, bool(data.get("nilpotent", False)))

    def to_json(self) -> dict:
        out = {
            "vertices": list(self.vertices),
            "arrows": [{"from": s, "to": t, "name": n} for s, t, n in self.arrows],
            "nilpotent": self.nilpotent,
        }
        if self.involution:
            out["involution"] = {
                "vertices": dict(self.involution[0]),
                "arrows": dict(self.involution[1]),
            }
        return out


A2_QUIVER = Quiver(("1", "2"), (("1", "2", "a"),))

D4_SINK_QUIVER = Quiver(
    ("1", "2", "3", "0"),
    (("1", "0", "a1"), ("2", "0", "a2"), ("3", "0", "a3")),
)


# ---------------------------------------------------------------------------
# quiver representations over F_q


class RepFqInstance(ProtoExactInstance):
    """Representations of an acyclic quiver over F_q.

    An object is (dimv, mats): the dimension vector (following the quiver's
    vertex order) and one Matrix per arrow, of shape d_target x d_source.
    Canonical representatives are the lexicographically least points of the
    GL-product orbits; orbit transporters are cached so that inclusions out
    of canonical representatives can be produced for every site.
    """

    def __init__(self, quiver: Quiver, q: int):
        if quiver.has_cycle():
            raise ValueError(
                "cyclic quiver: use nil_jordan for the one-loop quiver"
            )
        self.quiver = quiver
        self.field = FiniteField(q)
        self.q = q
        self.name = f"rep_fq({q})"
        self._canon: dict = {}   # raw encoding -> (canonical obj, transporter)
        self._orbits: dict = {}  # canonical encoding -> all encodings in orbit
        self._classes: dict = {}  # dimv -> tuple of canonical objects
        self._auts: dict = {}

    # encoding helpers -------------------------------------------------------

    def _encode(self, obj):
        dimv, mats = obj
        return (dimv, tuple(m.rows for m in mats))

    def _gl_generators(self, n):
        F = self.field
        gens = []
        if n == 0:
            return gens
        for c in F.units():
            d = [[0] * n for _ in range(n)]
            for i in range(n):
                d[i][i] = 1
            d[0][0] = c
            gens.append(Matrix(F, d))
        for i in range(n):
            for j in range(n):
                if i != j:
                    for c in F.units():
                        e = [[0] * n for _ in range(n)]
                        for k in range(n):
                            e[k][k] = 1
                        e[i][j] = c
                        gens.append(Matrix(F, e))
        return gens

    def _apply(self, g_tuple, obj):
        """Base change: mats'_a = g_t . M_a . g_s^{-1}; g is a morphism obj -> obj'."""
        dimv, mats = obj
        inv = [g.inverse() for g in g_tuple]
        new = []
        for (s, t, _), M in zip(self.quiver.arrows, mats):
            si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
            new.append(g_tuple[ti] * M * inv[si])
        return (dimv, tuple(new))

    def canonicalize(self, obj):
        """Return (canonical representative, transporter mor obj -> canonical)."""
        enc = self._encode(obj)
        got = self._canon.get(enc)
        if got is not None:
            return got
        dimv = obj[0]
        F = self.field
        gens = []
        for vi, d in enumerate(dimv):
            for g in self._gl_generators(d):
                tup = tuple(
                    g if i == vi else Matrix.identity(F, dimv[i])
                    for i in range(len(dimv))
                )
                gens.append(tup)
        idt = tuple(Matrix.identity(F, d) for d in dimv)
        seen = {enc: (obj, idt)}
        frontier = [(obj, idt)]
        while frontier:
            cur, trans = frontier.pop()
            budget.tick()
            for g in gens:
                nxt = self._apply(g, cur)
                e2 = self._encode(nxt)
                if e2 not in seen:
                    t2 = tuple(g[i] * trans[i] for i in range(len(dimv)))
                    seen[e2] = (nxt, t2)
                    frontier.append((nxt, t2))
        best = min(seen)
        canon = seen[best][0]
        # transporters in `seen` map obj -> o2; convert to o2 -> canon
        to_canon_from_obj = seen[best][1]
        for e2, (o2, t2) in seen.items():
            comp = tuple(
                to_canon_from_obj[i] * t2[i].inverse() for i in range(len(dimv))
            )
            self._canon[e2] = (canon, Mor(o2, canon, comp))
        self._orbits.setdefault(self._encode(canon), frozenset(seen))
        return self._canon[enc]

    # object layer -----------------------------------------------------------

    def zero_key(self):
        return self.iso_key(self._zero_obj())

    def _zero_obj(self):
        dimv = (0,) * len(self.quiver.vertices)
        mats = tuple(
            Matrix.zero(self.field,
                        0, 0)
            for _ in self.quiver.arrows
        )
        return (dimv, mats)

    def sizes_upto(self, cap):
        """Dimension vectors bounded by cap: componentwise when cap is a
        vector, else by total dimension."""
        nv = len(self.quiver.vertices)
        if isinstance(cap, tuple):
            out = list(itertools.product(*(range(c + 1) for c in cap)))
        else:
            out = [d for d in itertools.product(range(cap + 1), repeat=nv)
                   if sum(d) <= cap]
        return sorted(out, key=lambda d: (sum(d), d))

    def size_of_key(self, key):
        return key[0]

    def enumerate_objects(self, dimv):
        got = self._classes.get(dimv)
        if got is not None:
            return got
        F = self.field
        shapes = []
        for s, t, _ in self.quiver.arrows:
            shapes.append((dimv[self.quiver.vertex_index(t)],
                           dimv[self.quiver.vertex_index(s)]))
        reps = []
        seen = set()
        pools = [list(all_matrices(F, r, c)) for r, c in shapes]
        for mats in itertools.product(*pools):
            obj = (dimv, tuple(mats))
            enc = self._encode(obj)
            if enc in seen:
                continue
            canon, _ = self.canonicalize(obj)
            reps.append(canon)
            seen.update(self._orbits[self._encode(canon)])
        reps = tuple(sorted(reps, key=self._encode))
        self._classes[dimv] = reps
        return reps

    def iso_key(self, obj):
        canon, _ = self.canonicalize(obj)
        return self._encode(canon)

    def object_of_key(self, key):
        dimv, rows = key
        mats = []
        for (s, t, _), r in zip(self.quiver.arrows, rows):
            si = self.quiver.vertex_index(s)
            mats.append(Matrix(self.field, r, ncols=dimv[si]))
        return (dimv, tuple(mats))

    def format_key(self, key):
        dimv, rows = key
        mats = ",".join("[" + ";".join("".join(map(str, rr)) for rr in r) + "]"
                        for r in rows)
        return f"{list(dimv)}:{mats}"

    # morphism layer -----------------------------------------------------------

    def _compose_data(self, g, f):
        return tuple(a * b for a, b in zip(g, f))

    def identity(self, obj):
        return Mor(obj, obj,
                   tuple(Matrix.identity(self.field, d) for d in obj[0]))

    def zero_morphism(self, A, B):
        return Mor(A, B, tuple(
            Matrix.zero(self.field, db, da) for da, db in zip(A[0], B[0])
        ))

    def _intertwines(self, A, B, data):
        for (s, t, _), Ma, Mb in zip(self.quiver.arrows, A[1], B[1]):
            si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
            if data[ti] * Ma != Mb * data[si]:
                return False
        return True

    def hom_set(self, A, B):
        F = self.field
        pools = [list(all_matrices(F, db, da)) for da, db in zip(A[0], B[0])]
        out = []
        for data in itertools.product(*pools):
            if self._intertwines(A, B, data):
                out.append(Mor(A, B, tuple(data)))
        return tuple(out)

    def automorphisms(self, obj):
        enc = self._encode(obj)
        got = self._auts.get(enc)
        if got is not None:
            return got
        F = self.field
        pools = [general_linear(F, d) for d in obj[0]]
        out = []
        for data in itertools.product(*pools):
            if self._intertwines(obj, obj, data):
                out.append(Mor(obj, obj, tuple(data)))
        out = tuple(out)
        self._auts[enc] = out
        return out

    def is_inflation(self, f):
        return all(m.rank() == m.ncols for m in f.data)

    def is_deflation(self, f):
        return all(m.rank() == m.nrows for m in f.data)

    # exact structure ------------------------------------------------------------

    def admissible_subobjects(self, V):
        dimv, mats = V
        F = self.field
        nv = len(dimv)
        vertex_subs = [
            [B for d in range(dimv[i] + 1) for B in subspaces(F, dimv[i], d)]
            for i in range(nv)
        ]
        out = []
        for combo in itertools.product(*vertex_subs):
            budget.tick()
            incl_mats = [B.transpose() for B in combo]  # F^{d_i} -> F^{n_i}
            sub_mats = []
            ok = True
            for (s, t, _), M in zip(self.quiver.arrows, mats):
                si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                R = incl_mats[ti].solve_right(M * incl_mats[si])
                if R is None:
                    ok = False
                    break
                sub_mats.append(R)
            if not ok:
                continue
            sub_dimv = tuple(m.ncols for m in incl_mats)
            sub_raw = (sub_dimv, tuple(sub_mats))
            proj_mats = [im.transpose().kernel().transpose() for im in incl_mats]
            quot_mats = []
            for (s, t, _), M in zip(self.quiver.arrows, mats):
                si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                Qm = proj_mats[si].solve_left(proj_mats[ti] * M)
                quot_mats.append(Qm)
            quot_dimv = tuple(m.nrows for m in proj_mats)
            quot_raw = (quot_dimv, tuple(quot_mats))
            sub_canon, to_sub_canon = self.canonicalize(sub_raw)
            quot_canon, to_quot_canon = self.canonicalize(quot_raw)
            inv = tuple(m.inverse() for m in to_sub_canon.data)
            incl = Mor(sub_canon, V,
                       tuple(incl_mats[i] * inv[i] for i in range(nv)))
            proj = Mor(V, quot_canon,
                       tuple(to_quot_canon.data[i] * proj_mats[i] for i in range(nv)))
            out.append(Site(self._encode(sub_canon), self._encode(quot_canon),
                            incl, proj))
        return tuple(out)

    def lift_through_inflation(self, i, f):
        sols = []
        for im, fm in zip(i.data, f.data):
            sol = im.solve_right(fm)
            if sol is None or im * sol != fm:
                return None
            sols.append(sol)
        return Mor(f.src, i.src, tuple(sols))

    def descend_through_deflation(self, p, f):
        sols = []
        for pm, fm in zip(p.data, f.data):
            sol = pm.solve_left(fm)
            if sol is None or sol * pm != fm:
                return None
            sols.append(sol)
        return Mor(p.tgt, f.tgt, tuple(sols))

    # Ext^1 via the two-term resolution ------------------------------------------

    def _hom_operator(self, Wobj, Uobj):
        """Matrix of f |-> (U_a f_s - f_t W_a)_a on vertexwise Hom spaces."""
        F = self.field
        dW, dU = Wobj[0], Uobj[0]
        dom_blocks = [(dU[i], dW[i]) for i in range(len(dW))]   # f_i : W_i -> U_i
        cod_blocks = []
        for s, t, _ in self.quiver.arrows:
            si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
            cod_blocks.append((dU[ti], dW[si]))
        dom_dim = sum(r * c for r, c in dom_blocks)
        cod_dim = sum(r * c for r, c in cod_blocks)
        cols = []
        for bi, (r, c) in enumerate(dom_blocks):
            for pos in range(r * c):
                fs = [Matrix.zero(F, rr, cc) for rr, cc in dom_blocks]
                rows = [[0] * c for _ in range(r)]
                rows[pos // c][pos % c] = 1
                fs[bi] = Matrix(F, rows)
                img = []
                for (s, t, _), Wa, Ua in zip(self.quiver.arrows, Wobj[1], Uobj[1]):
                    si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                    img.append(Ua * fs[si] - fs[ti] * Wa)
                vec = []
                for m in img:
                    for row in m.rows:
                        vec.extend(row)
                cols.append(tuple(vec))
        op = Matrix.from_cols(F, cols, nrows=cod_dim)
        return op, dom_dim, cod_dim, cod_blocks

    def ext1_count(self, W_key, U_key) -> int:
        Wobj, Uobj = self.object_of_key(W_key), self.object_of_key(U_key)
        op, dom, cod, _ = self._hom_operator(Wobj, Uobj)
        return self.q ** (cod - op.rank())

    def hom_count(self, A_key, B_key) -> int:
        Aobj, Bobj = self.object_of_key(A_key), self.object_of_key(B_key)
        op, dom, cod, _ = self._hom_operator(Aobj, Bobj)
        return self.q ** (dom - op.rank())

    def ext1_classes(self, W_key, U_key):
        """Elements of Ext^1(W,U): cocycles modulo coboundaries, each with its
        middle term (block upper triangular structure maps)."""
        F = self.field
        Wobj, Uobj = self.object_of_key(W_key), self.object_of_key(U_key)
        op, dom, cod, cod_blocks = self._hom_operator(Wobj, Uobj)
        # complement of the image inside the cocycle space
        img_basis = op.column_space_rref()      # rank x cod
        span_rows = [list(r) for r in img_basis.rows]
        free = []
        for e in range(cod):
            v = [0] * cod
            v[e] = 1
            trial = Matrix(F, tuple(tuple(r) for r in span_rows) + (tuple(v),)) \
                if span_rows else Matrix(F, (tuple(v),))
            if trial.rank() > len(span_rows):
                span_rows.append(v)
                free.append(e)
        out = []
        for coeffs in itertools.product(F.elements, repeat=len(free)):
            vec = [0] * cod
            for c, e in zip(coeffs, free):
                vec[e] = c
            # unpack into per-arrow blocks
            cs = []
            pos = 0
            for r, c in cod_blocks:
                rows = []
                for i in range(r):
                    rows.append(tuple(vec[pos : pos + c]))
                    pos += c
                cs.append(Matrix(F, rows, ncols=c))
            dU, dW = Uobj[0], Wobj[0]
            mid_dimv = tuple(u + w for u, w in zip(dU, dW))
            mid_mats = []
            for (s, t, _), Ua, Wa, Ca in zip(self.quiver.arrows, Uobj[1], Wobj[1], cs):
                si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                blocks = [[Ua, Ca], [Matrix.zero(F, dW[ti], dU[si]), Wa]]
                mid_mats.append(Matrix.blocks(F, blocks))
            mid = (mid_dimv, tuple(mid_mats))
            incl_mats = [
                Matrix.blocks(F, [[Matrix.identity(F, dU[i])],
                                  [Matrix.zero(F, dW[i], dU[i])]])
                for i in range(len(dU))
            ]
            proj_mats = [
                Matrix.blocks(F, [[Matrix.zero(F, dW[i], dU[i]),
                                   Matrix.identity(F, dW[i])]])
                for i in range(len(dU))
            ]
            mid_canon, h = self.canonicalize(mid)
            incl = Mor(Uobj, mid_canon,
                       tuple(h.data[i] * incl_mats[i] for i in range(len(dU))))
            hinv = tuple(m.inverse() for m in h.data)
            proj = Mor(mid_canon, Wobj,
                       tuple(proj_mats[i] * hinv[i] for i in range(len(dU))))
            out.append(ExtClass(self._encode(mid_canon), incl, proj))
        return tuple(out)


# ---------------------------------------------------------------------------
# quiver representations over F_1


class RepF1Instance(ProtoExactInstance):
    """Representations of an acyclic quiver in pointed sets.  An object is
    (dimv, maps) with one image tuple per arrow; all structure maps are
    injective away from the basepoint."""

    def __init__(self, quiver: Quiver):
        if quiver.has_cycle():
            raise ValueError("cyclic quiver not supported over F_1")
        self.quiver = quiver
        self.field = None
        self.name = "rep_f1"
        self._canon: dict = {}
        self._classes: dict = {}

    def _apply(self, perms, obj):
        """perms: per-vertex image tuples of bijections; acts by relabeling."""
        dimv, maps = obj
        inv = []
        for p in perms:
            ip = [0] * len(p)
            for i, x in enumerate(p):
                ip[x - 1] = i + 1
            inv.append(tuple(ip))
        new = []
        for (s, t, _), mp in zip(self.quiver.arrows, maps):
            si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
            pt, ips = perms[ti], inv[si]
            new.append(tuple(
                (pt[mp[ips[i - 1] - 1] - 1] if mp[ips[i - 1] - 1] else 0)
                for i in range(1, dimv[si] + 1)
            ))
        return (dimv, tuple(new))

    def canonicalize(self, obj):
        enc = obj
        got = self._canon.get(enc)
        if got is not None:
            return got
        dimv = obj[0]
        gens = []
        for vi, d in enumerate(dimv):
            for a in range(1, d):
                p = list(range(1, d + 1))
                p[a - 1], p[a] = p[a], p[a - 1]
                tup = tuple(
                    tuple(p) if i == vi else tuple(range(1, dimv[i] + 1))
                    for i in range(len(dimv))
                )
                gens.append(tup)
        idt = tuple(tuple(range(1, d + 1)) for d in dimv)
        seen = {enc: idt}
        frontier = [(obj, idt)]
        while frontier:
            cur, trans = frontier.pop()
            budget.tick()
            for g in gens:
                nxt = self._apply(g, cur)
                if nxt not in seen:
                    t2 = tuple(
                        tuple(g[i][trans[i][k] - 1] for k in range(dimv[i]))
                        for i in range(len(dimv))
                    )
                    seen[nxt] = t2
                    frontier.append((nxt, t2))
        canon = min(seen)
        to_canon = seen[canon]
        for o2, t2 in seen.items():
            inv = []
            for p in t2:
                ip = [0] * len(p)
                for i, x in enumerate(p):
                    ip[x - 1] = i + 1
                inv.append(tuple(ip))
            comp = tuple(
                tuple(to_canon[i][inv[i][k] - 1] for k in range(dimv[i]))
                for i in range(len(dimv))
            )
            self._canon[o2] = (canon, Mor(o2, canon, comp))
        return self._canon[enc]

    def zero_key(self):
        nv = len(self.quiver.vertices)
        return ((0,) * nv, ((),) * len(self.quiver.arrows))

    def sizes_upto(self, cap):
        nv = len(self.quiver.vertices)
        if isinstance(cap, tuple):
            out = list(itertools.product(*(range(c + 1) for c in cap)))
        else:
            out = [d for d in itertools.product(range(cap + 1), repeat=nv)
                   if sum(d) <= cap]
        return sorted(out, key=lambda d: (sum(d), d))

    def size_of_key(self, key):
        return key[0]

    def enumerate_objects(self, dimv):
        got = self._classes.get(dimv)
        if got is not None:
            return got
        pools = []
        for s, t, _ in self.quiver.arrows:
            si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
            pools.append(list(_pointed_maps(dimv[si], dimv[ti])))
        reps = set()
        for maps in itertools.product(*pools):
            obj = (dimv, tuple(maps))
            canon, _ = self.canonicalize(obj)
            reps.add(canon)
        reps = tuple(sorted(reps))
        self._classes[dimv] = reps
        return reps

    def iso_key(self, obj):
        return self.canonicalize(obj)[0]

    def object_of_key(self, key):
        return key

    def format_key(self, key):
        dimv, maps = key
        return f"{list(dimv)}:{[list(m) for m in maps]}"

    def _compose_data(self, g, f):
        return tuple(
            tuple(gm[x - 1] if x else 0 for x in fm)
            for gm, fm in zip(g, f)
        )

    def identity(self, obj):
        return Mor(obj, obj, tuple(tuple(range(1, d + 1)) for d in obj[0]))

    def zero_morphism(self, A, B):
        return Mor(A, B, tuple((0,) * d for d in A[0]))

    def _is_morphism(self, A, B, data):
        for (s, t, _), ma, mb in zip(self.quiver.arrows, A[1], B[1]):
            si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
            fs, ft = data[si], data[ti]
            for x in range(1, A[0][si] + 1):
                lhs = ft[ma[x - 1] - 1] if ma[x - 1] else 0
                rhs = mb[fs[x - 1] - 1] if fs[x - 1] else 0
                if lhs != rhs:
                    return False
        return True

    def hom_set(self, A, B):
        pools = [list(_pointed_maps(da, db)) for da, db in zip(A[0], B[0])]
        out = []
        for data in itertools.product(*pools):
            if self._is_morphism(A, B, data):
                out.append(Mor(A, B, tuple(data)))
        return tuple(out)

    def automorphisms(self, obj):
        pools = [
            [tuple(p) for p in itertools.permutations(range(1, d + 1))]
            for d in obj[0]
        ]
        out = []
        for data in itertools.product(*pools):
            if self._is_morphism(obj, obj, data):
                out.append(Mor(obj, obj, tuple(data)))
        return tuple(out)

    def is_inflation(self, f):
        return all(all(x != 0 for x in comp) for comp in f.data)

    def is_deflation(self, f):
        return all(
            set(x for x in comp if x) == set(range(1, t + 1))
            for comp, t in zip(f.data, f.tgt[0])
        )

    def admissible_subobjects(self, V):
        dimv, maps = V
        nv = len(dimv)
        vertex_subsets = [
            [S for r in range(dimv[i] + 1)
             for S in itertools.combinations(range(1, dimv[i] + 1), r)]
            for i in range(nv)
        ]
        out = []
        for combo in itertools.product(*vertex_subsets):
            budget.tick()
            ok = True
            for (s, t, _), mp in zip(self.quiver.arrows, maps):
                si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                for x in combo[si]:
                    y = mp[x - 1]
                    if y != 0 and y not in combo[ti]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            sub_dimv = tuple(len(S) for S in combo)
            sub_maps = []
            for (s, t, _), mp in zip(self.quiver.arrows, maps):
                si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                index_t = {x: k + 1 for k, x in enumerate(combo[ti])}
                sub_maps.append(tuple(
                    index_t.get(mp[x - 1], 0) for x in combo[si]
                ))
            sub_raw = (sub_dimv, tuple(sub_maps))
            comp = [tuple(x for x in range(1, dimv[i] + 1) if x not in combo[i])
                    for i in range(nv)]
            quot_dimv = tuple(len(c) for c in comp)
            quot_maps = []
            for (s, t, _), mp in zip(self.quiver.arrows, maps):
                si, ti = self.quiver.vertex_index(s), self.quiver.vertex_index(t)
                index_t = {x: k + 1 for k, x in enumerate(comp[ti])}
                quot_maps.append(tuple(
                    index_t.get(mp[x - 1], 0) for x in comp[si]
                ))
            quot_raw = (quot_dimv, tuple(quot_maps))
            sub_canon, to_sub = self.canonicalize(sub_raw)
            quot_canon, to_quot = self.canonicalize(quot_raw)
            # incl: canonical sub -> V; first map canonical -> sub_raw labels
            inv = []
            for p in to_sub.data:
                ip = [0] * len(p)
                for i, x in enumerate(p):
                    ip[x - 1] = i + 1
                inv.append(tuple(ip))
            incl_data = tuple(
                tuple(combo[i][inv[i][k] - 1] for k in range(sub_dimv[i]))
                for i in range(nv)
            )
            proj_base = []
            for i in range(nv):
                index_c = {x: k + 1 for k, x in enumerate(comp[i])}
                proj_base.append(tuple(
                    index_c.get(x, 0) for x in range(1, dimv[i] + 1)
                ))
            proj_data = tuple(
                tuple(to_quot.data[i][x - 1] if x else 0 for x in proj_base[i])
                for i in range(nv)
            )
            out.append(Site(sub_canon, quot_canon,
                            Mor(sub_canon, V, incl_data),
                            Mor(V, quot_canon, proj_data)))
        return tuple(out)

    def lift_through_inflation(self, i, f):
        back = [
            {x: k + 1 for k, x in enumerate(comp)} for comp in i.data
        ]
        lifts = []
        for vi, comp in enumerate(f.data):
            lift = []
            for x in comp:
                if x == 0:
                    lift.append(0)
                elif x in back[vi]:
                    lift.append(back[vi][x])
                else:
                    return None
            lifts.append(tuple(lift))
        return Mor(f.src, i.src, tuple(lifts))

    def descend_through_deflation(self, p, f):
        outs = []
        for vi in range(len(p.data)):
            out = [None] * p.tgt[0][vi]
            for v in range(1, p.src[0][vi] + 1):
                c = p.data[vi][v - 1]
                if c == 0:
                    if f.data[vi][v - 1] != 0:
                        return None
                else:
                    if out[c - 1] is not None and out[c - 1] != f.data[vi][v - 1]:
                        return None
                    out[c - 1] = f.data[vi][v - 1]
            if any(x is None for x in out):
                return None
            nz = [x for x in out if x]
            if len(nz) != len(set(nz)):
                return None
            outs.append(tuple(out))
        return Mor(p.tgt, f.tgt, tuple(outs))

    def ext1_classes(self, W_key, U_key):
        """Conflation iso classes with sub U and quotient W: orbits of
        matching sites under Aut of the middle object."""
        out = []
        total = tuple(u + w for u, w in zip(U_key[0], W_key[0]))
        for mid in self.enumerate_objects(total):
            sites = [s for s in self.admissible_subobjects(mid)
                     if s.sub_key == U_key and s.quot_key == W_key]
            if not sites:
                continue
            auts = self.automorphisms(mid)
            unassigned = set(range(len(sites)))
            while unassigned:
                i = min(unassigned)
                orbit = set()
                for g in auts:
                    gi = self._compose_data(g.data, sites[i].incl.data)
                    for j in unassigned:
                        if sites[j].incl.data == gi:
                            orbit.add(j)
                unassigned -= orbit
                s = sites[i]
                out.append(ExtClass(mid, s.incl, s.proj))
        return tuple(out)

    def hom_count(self, A_key, B_key):
        return len(self.hom_set(self.object_of_key(A_key),
                                self.object_of_key(B_key)))


# ---------------------------------------------------------------------------
# nilpotent F_q[x]-modules (nilpotent Jordan forms), keyed by partitions


def partitions(n: int):
    """Partitions of n as weakly decreasing tuples; partitions(0) = [()]."""

    def gen(rem, maxpart):
        if rem == 0:
            yield ()
            return
        for p in range(min(rem, maxpart), 0, -1):
            for rest in gen(rem - p, p):
                yield (p,) + rest

    return list(gen(n, n))


def partition_from_ranks(ranks):
    """Partition of a nilpotent operator from the ranks of its powers.

    ranks = [rank(N^0)=n, rank(N), rank(N^2), ...] down to 0.  The conjugate
    partition has parts rank(N^{k-1}) - rank(N^k)."""
    conj = []
    for k in range(1, len(ranks)):
        d = ranks[k - 1] - ranks[k]
        if d:
            conj.append(d)
    # conjugate back
    if not conj:
        return ()
    out = []
    for i in range(1, conj[0] + 1):
        out.append(sum(1 for c in conj if c >= i))
    return tuple(sorted(out, reverse=True))


def jordan_matrix(field, partition):
    n = sum(partition)
    rows = [[0] * n for _ in range(n)]
    off = 0
    for part in partition:
        for i in range(part - 1):
            rows[off + i + 1][off + i] = 1
        off += part
    return Matrix(field, rows)


def jordan_basis(N: Matrix):
    """P with N P = P J where J is the nilpotent Jordan form of N.

    Chains are produced longest first; columns of P within a chain are
    (v, Nv, N^2 v, ...), matching a Jordan block with ones below the
    diagonal."""
    F = N.field
    n = N.nrows
    if n == 0:
        return Matrix.zero(F, 0, 0), ()
    powers = [Matrix.identity(F, n)]
    while not powers[-1].is_zero():
        powers.append(N * powers[-1])
    t = len(powers) - 1  # nilpotency index
    kernels = [powers[k].kernel() for k in range(len(powers))]

    def in_span(rows, v):
        if not rows:
            return all(x == 0 for x in v)
        trial = Matrix(F, tuple(tuple(r) for r in rows) + (tuple(v),))
        return trial.rank() == Matrix(F, tuple(tuple(r) for r in rows)).rank()

    chains = []  # list of (length, top vector)
    passing = []  # vectors at the current level from longer chains
    base_rows = []
    for k in range(t, 0, -1):
        base_rows = [list(r) for r in kernels[k - 1].transpose().rows]
        level = []
        for v in passing:
            level.append(v)
            if not in_span(base_rows, v):
                base_rows.append(list(v))
        new_tops = []
        for j in range(kernels[k].ncols):
            v = kernels[k].col(j)
            if not in_span(base_rows, v):
                base_rows.append(list(v))
                new_tops.append(v)
                level.append(v)
        for v in new_tops:
            chains.append((k, v))
        # push every vector at this level down one step for the next round
        passing = [tuple((N * Matrix.from_cols(F, [v])).col(0)) for v in level]
    chains.sort(key=lambda c: -c[0])
    cols = []
    parts = []
    for length, top in chains:
        parts.append(length)
        v = top
        for _ in range(length):
            cols.append(v)
            v = tuple((N * Matrix.from_cols(F, [v])).col(0))
    P = Matrix.from_cols(F, cols, nrows=n)
    return P, tuple(parts)


class NilJordanInstance(ProtoExactInstance):
    """Nilpotent F_q[x]-modules: objects are partitions, realized as the
    nilpotent Jordan matrix acting on F_q^{|lambda|}.  Morphism data is a
    Matrix intertwining the Jordan operators."""

    def __init__(self, q: int):
        self.field = FiniteField(q)
        self.q = q
        self.name = f"nil_jordan({q})"
        self._aut_cache: dict = {}
        self._site_census: dict = {}

    def zero_key(self):
        return ()

    def sizes_upto(self, cap):
        return list(range(cap + 1))

    def size_of_key(self, key):
        return sum(key)

    def enumerate_objects(self, size):
        return tuple(partitions(size))

    def iso_key(self, obj):
        return obj

    def object_of_key(self, key):
        return key

    def format_key(self, key):
        return "(" + ",".join(map(str, key)) + ")"

    def matrix_of(self, key) -> Matrix:
        return jordan_matrix(self.field, key)

    def _compose_data(self, g, f):
        return g * f

    def identity(self, obj):
        return Mor(obj, obj, Matrix.identity(self.field, sum(obj)))

    def zero_morphism(self, A, B):
        return Mor(A, B, Matrix.zero(self.field, sum(B), sum(A)))

    def commutant_basis(self, lam, mu):
        """Basis of {T : J_mu T = T J_lam} as a list of matrices."""
        F = self.field
        n, m = sum(lam), sum(mu)
        Jl, Jm = self.matrix_of(lam), self.matrix_of(mu)
        cols = []
        for pos in range(m * n):
            rows = [[0] * n for _ in range(m)]
            rows[pos // n][pos % n] = 1
            T = Matrix(F, rows)
            D = Jm * T - T * Jl
            cols.append(tuple(x for r in D.rows for x in r))
        op = Matrix.from_cols(F, cols, nrows=m * n)
        ker = op.kernel()
        basis = []
        for j in range(ker.ncols):
            v = ker.col(j)
            basis.append(Matrix(F, tuple(
                tuple(v[i * n : (i + 1) * n]) for i in range(m)
            )))
        return basis

    def hom_set(self, A, B):
        F = self.field
        basis = self.commutant_basis(A, B)
        out = []
        for coeffs in itertools.product(F.elements, repeat=len(basis)):
            T = Matrix.zero(F, sum(B), sum(A))
            for c, Bm in zip(coeffs, basis):
                if c:
                    T = T + Bm.scale(c)
            out.append(Mor(A, B, T))
        return tuple(out)

    def automorphisms(self, obj):
        got = self._aut_cache.get(obj)
        if got is not None:
            return got
        out = tuple(f for f in self.hom_set(obj, obj) if f.data.is_invertible())
        self._aut_cache[obj] = out
        return out

    def aut_order(self, key) -> int:
        """|Aut(M_lambda)| by the classical formula
        q^{sum (lambda'_i)^2} prod_i phi_{m_i}(1/q); cross-checked against
        enumeration in the tests."""
        from fractions import Fraction

        lam = key
        if not lam:
            return 1
        conj = []
        for i in range(1, lam[0] + 1):
            conj.append(sum(1 for p in lam if p >= i))
        q = Fraction(self.q)
        val = q ** sum(c * c for c in conj)
        mult: dict = {}
        for p in lam:
            mult[p] = mult.get(p, 0) + 1
        for m in mult.values():
            for j in range(1, m + 1):
                val *= 1 - q ** (-j)
        assert val.denominator == 1
        return int(val)

    def is_inflation(self, f):
        return f.data.rank() == f.data.ncols

    def is_deflation(self, f):
        return f.data.rank() == f.data.nrows

    def invariant_subspaces(self, lam):
        """All J_lambda-invariant subspaces of F^{|lam|}, as RREF bases."""
        F = self.field
        n = sum(lam)
        J = self.matrix_of(lam)
        out = []
        for d in range(n + 1):
            for B in subspaces(F, n, d):
                budget.tick()
                incl = B.transpose()
                if incl.solve_right(J * incl) is not None:
                    out.append(B)
        return out

    def admissible_subobjects(self, V):
        lam = V
        F = self.field
        n = sum(lam)
        J = self.matrix_of(lam)
        out = []
        for B in self.invariant_subspaces(lam):
            incl_mat = B.transpose()
            R = incl_mat.solve_right(J * incl_mat)   # restricted operator
            proj_mat = incl_mat.transpose().kernel().transpose()
            Q = proj_mat.solve_left(proj_mat * J)    # quotient operator
            sub_key = self._nilpotent_key(R)
            quot_key = self._nilpotent_key(Q)
            # base-change each end to its canonical Jordan representative
            Ps, _ = jordan_basis(R)
            Pq, _ = jordan_basis(Q)
            incl = Mor(sub_key, lam, incl_mat * Ps)
            proj = Mor(lam, quot_key, Pq.inverse() * proj_mat)
            out.append(Site(sub_key, quot_key, incl, proj))
        return tuple(out)

    def _nilpotent_key(self, N: Matrix):
        ranks = [N.nrows]
        P = N
        while ranks[-1] > 0:
            ranks.append(P.rank())
            P = P * N
        return partition_from_ranks(ranks)

    def site_count(self, U_key, W_key, V_key) -> int:
        """Number of invariant subspaces of J_V with sub type U and quotient
        type W; avoids building morphism data.  The per-V census is cached
        because products query the same V for many (U, W) pairs."""
        census = self._site_census.get(V_key)
        if census is None:
            census = {}
            J = self.matrix_of(V_key)
            for B in self.invariant_subspaces(V_key):
                incl = B.transpose()
                R = incl.solve_right(J * incl)
                proj = incl.transpose().kernel().transpose()
                Q = proj.solve_left(proj * J)
                pair = (self._nilpotent_key(R), self._nilpotent_key(Q))
                census[pair] = census.get(pair, 0) + 1
            self._site_census[V_key] = census
        return census.get((U_key, W_key), 0)

    def lift_through_inflation(self, i, f):
        sol = i.data.solve_right(f.data)
        if sol is None or i.data * sol != f.data:
            return None
        return Mor(f.src, i.src, sol)

    def descend_through_deflation(self, p, f):
        sol = p.data.solve_left(f.data)
        if sol is None or sol * p.data != f.data:
            return None
        return Mor(p.tgt, f.tgt, sol)

    def hom_count(self, A_key, B_key):
        return self.q ** len(self.commutant_basis(A_key, B_key))

    def ext1_classes(self, W_key, U_key):
        """Ext^1(W,U) = coker(f -> J_U f - f J_W); middles are block upper
        triangular [[J_U, c], [0, J_W]]."""
        F = self.field
        nU, nW = sum(U_key), sum(W_key)
        JU, JW = self.matrix_of(U_key), self.matrix_of(W_key)
        cols = []
        for pos in range(nU * nW):
            rows = [[0] * nW for _ in range(nU)]
            rows[pos // nW][pos % nW] = 1
            T = Matrix(F, rows)
            D = JU * T - T * JW
            cols.append(tuple(x for r in D.rows for x in r))
        op = Matrix.from_cols(F, cols, nrows=nU * nW)
        span_rows = [list(r) for r in op.column_space_rref().rows]
        rank0 = len(span_rows)
        free = []
        for e in range(nU * nW):
            v = [0] * (nU * nW)
            v[e] = 1
            rows = tuple(tuple(r) for r in span_rows) + (tuple(v),)
            if Matrix(F, rows).rank() > len(span_rows):
                span_rows.append(v)
                free.append(e)
        out = []
        for coeffs in itertools.product(F.elements, repeat=len(free)):
            vec = [0] * (nU * nW)
            for c, e in zip(coeffs, free):
                vec[e] = c
            C = Matrix(F, tuple(
                tuple(vec[i * nW : (i + 1) * nW]) for i in range(nU)
            ), ncols=nW)
            mid = Matrix.blocks(F, [[JU, C], [Matrix.zero(F, nW, nU), JW]])
            mid_key = self._nilpotent_key(mid)
            P, _ = jordan_basis(mid)
            Pinv = P.inverse()
            incl_plain = Matrix.blocks(F, [[Matrix.identity(F, nU)],
                                           [Matrix.zero(F, nW, nU)]])
            proj_plain = Matrix.blocks(F, [[Matrix.zero(F, nW, nU),
                                            Matrix.identity(F, nW)]])
            out.append(ExtClass(mid_key,
                                Mor(U_key, mid_key, Pinv * incl_plain),
                                Mor(mid_key, W_key, proj_plain * P)))
        return tuple(out)


# ---------------------------------------------------------------------------
# full sub-instance restriction (for functoriality examples)


class RestrictedInstance(ProtoExactInstance):
    """Full subcategory of an ambient instance cut out by a predicate on iso
    keys, with the induced proto-exact structure: a conflation is admissible
    iff all three terms satisfy the predicate."""

    def __init__(self, ambient: ProtoExactInstance, key_predicate, name: str):
        self.ambient = ambient
        self.pred = key_predicate
        self.field = ambient.field
        self.name = name
        if not key_predicate(ambient.zero_key()):
            raise ValueError("subcategory must contain the zero object")

    def zero_key(self):
        return self.ambient.zero_key()

    def sizes_upto(self, cap):
        return [
            s for s in self.ambient.sizes_upto(cap)
            if any(self.pred(self.ambient.iso_key(o))
                   for o in self.ambient.enumerate_objects(s))
        ]

    def size_of_key(self, key):
        return self.ambient.size_of_key(key)

    def enumerate_objects(self, size):
        return tuple(
            o for o in self.ambient.enumerate_objects(size)
            if self.pred(self.ambient.iso_key(o))
        )

    def iso_key(self, obj):
        return self.ambient.iso_key(obj)

    def object_of_key(self, key):
        return self.ambient.object_of_key(key)

    def format_key(self, key):
        return self.ambient.format_key(key)

    def _compose_data(self, g, f):
        return self.ambient._compose_data(g, f)

    def compose(self, g, f):
        return self.ambient.compose(g, f)

    def identity(self, obj):
        return self.ambient.identity(obj)

    def zero_morphism(self, A, B):
        return self.ambient.zero_morphism(A, B)

    def hom_set(self, A, B):
        return self.ambient.hom_set(A, B)

    def automorphisms(self, obj):
        return self.ambient.automorphisms(obj)

    def aut_order(self, key):
        return self.ambient.aut_order(key)

    def is_inflation(self, f):
        return self.ambient.is_inflation(f)

    def is_deflation(self, f):
        return self.ambient.is_deflation(f)

    def admissible_subobjects(self, V):
        return tuple(
            s for s in self.ambient.admissible_subobjects(V)
            if self.pred(s.sub_key) and self.pred(s.quot_key)
        )

    def lift_through_inflation(self, i, f):
        return self.ambient.lift_through_inflation(i, f)

    def descend_through_deflation(self, p, f):
        return self.ambient.descend_through_deflation(p, f)

    def hom_count(self, A_key, B_key):
        return self.ambient.hom_count(A_key, B_key)

    def ext1_classes(self, W_key, U_key):
        raise NotImplementedError(
            "extension classes are not defined for restricted instances"
        )


# -- constructors ------------------------------------------------------------


def instance_vect_fq(q: int) -> VectFqInstance:
    return VectFqInstance(q)


def instance_vect_f1() -> VectF1Instance:
    return VectF1Instance()


def instance_rep_fq(quiver: Quiver, q: int) -> RepFqInstance:
    return RepFqInstance(quiver, q)


def instance_rep_f1(quiver: Quiver) -> RepF1Instance:
    return RepF1Instance(quiver)


def instance_nil_jordan_fq(q: int) -> NilJordanInstance:
    return NilJordanInstance(q)


def validate_instance(inst: ProtoExactInstance, sizes) -> None:
    """Instance validation suite: canonical keys, conflation witnesses,
    composition and identity sanity on enumerated objects."""
    z = inst.object_of_key(inst.zero_key())
    assert inst.iso_key(z) == inst.zero_key()
    for size in sizes:
        for V in inst.enumerate_objects(size):
            key = inst.iso_key(V)
            assert inst.iso_key(inst.object_of_key(key)) == key
            idm = inst.identity(V)
            assert inst.compose(idm, idm) == idm
            auts = inst.automorphisms(V)
            assert idm in auts
            assert len(auts) == inst.aut_order(key)
            sites = inst.admissible_subobjects(V)
            full = [s for s in sites if s.quot_key == inst.zero_key()]
            zero = [s for s in sites if s.sub_key == inst.zero_key()]
            assert len(full) == 1 and len(zero) == 1
            for s in sites:
                assert inst.is_inflation(s.incl), s
                assert inst.is_deflation(s.proj), s
                comp = inst.compose(s.proj, s.incl)
                # conflation composite is the zero morphism; test by lifting 0
                assert s.incl.src == inst.object_of_key(s.sub_key)
                assert s.proj.tgt == inst.object_of_key(s.quot_key)
                _assert_zero_mor(inst, comp)
            # sites are pairwise distinct
            assert len({(s.incl.data, s.proj.data) for s in sites}) == len(sites)


def _assert_zero_mor(inst, f: Mor):
    if isinstance(f.data, Matrix):
        assert f.data.is_zero()
    elif f.data and isinstance(f.data[0], Matrix):
        assert all(m.is_zero() for m in f.data)
    elif f.data and isinstance(f.data[0], tuple):
        assert all(all(x == 0 for x in comp) for comp in f.data)
    else:
        assert all(x == 0 for x in f.data)
