"""Checker sanity on the nerve of a finite group: discrete levels, strict
faces and degeneracies, known Segal behaviour (a nerve is 1-Segal, hence
2-Segal and unital)."""

import pytest

from segalhall.groupoids import FiniteGroupoid, Functor, Mor
from segalhall.simplicial import (
    SimplicialMap,
    TruncatedSimplicialGroupoid,
    check_1segal,
    check_2segal,
    check_culf,
    check_ikeo,
    check_unital,
    report_to_json_str,
    validate_simplicial_identities,
)


def discrete(objects, name=""):
    return FiniteGroupoid(
        tuple(objects),
        lambda x, y: (Mor(x, x, "id"),) if x == y else (),
        lambda g, f: f,
        lambda x: Mor(x, x, "id"),
        sig_fn=lambda x: x,
        name=name,
    )


def nerve_of_cyclic(m: int, top: int) -> TruncatedSimplicialGroupoid:
    """Nerve of Z/m as a discrete simplicial groupoid, levels 0..top."""
    import itertools

    levels = [
        discrete(list(itertools.product(range(m), repeat=n)), name=f"N{n}")
        for n in range(top + 1)
    ]

    def face_map(n, i):
        def on_obj(g):
            if i == 0:
                return g[1:]
            if i == n:
                return g[:-1]
            return g[: i - 1] + ((g[i - 1] + g[i]) % m,) + g[i + 1 :]

        return Functor(
            levels[n], levels[n - 1], on_obj,
            lambda f: Mor(on_obj(f.src), on_obj(f.tgt), "id"), name=f"d{i}"
        )

    def degen_map(n, i):
        def on_obj(g):
            return g[:i] + (0,) + g[i:]

        return Functor(
            levels[n], levels[n + 1], on_obj,
            lambda f: Mor(on_obj(f.src), on_obj(f.tgt), "id"), name=f"s{i}"
        )

    faces = {(n, i): face_map(n, i) for n in range(1, top + 1) for i in range(n + 1)}
    degs = {(n, i): degen_map(n, i) for n in range(top) for i in range(n + 1)}
    return TruncatedSimplicialGroupoid(levels, faces, degs, name=f"N(Z/{m})")


def test_nerve_satisfies_simplicial_identities():
    validate_simplicial_identities(nerve_of_cyclic(2, 4))


def test_nerve_is_1segal_2segal_unital():
    X = nerve_of_cyclic(2, 4)
    assert check_1segal(X, 3).ok
    assert check_2segal(X, 4).ok
    assert check_unital(X, 3).ok


def test_restriction_composes_faces_correctly():
    X = nerve_of_cyclic(3, 3)
    r = X.restriction(3, (0, 2))  # long-ish edge of a 3-simplex
    # dropping vertices 3 then 1 composes group elements g2*g1 and discards g3
    assert r.obj((1, 2, 2)) == ((2 + 1) % 3,)
    full = X.restriction(3, (0, 1, 2, 3))
    assert all(full.obj(g) == g for g in X.level(3).objects)


def test_empty_top_level_breaks_2segal_with_witness():
    X = nerve_of_cyclic(2, 3)
    empty = discrete([], name="empty")

    def boom(*a):
        raise AssertionError("degeneracy into empty level should never be used")

    levels = list(X.levels[:3]) + [empty]
    faces = {k: v for k, v in X.faces.items() if k[0] <= 2}
    for i in range(4):
        faces[(3, i)] = Functor(empty, X.level(2), boom, boom)
    degs = {k: v for k, v in X.degeneracies.items() if k[0] <= 1}
    for i in range(3):
        degs[(2, i)] = Functor(X.level(2), empty, boom, boom)
    broken = TruncatedSimplicialGroupoid(levels, faces, degs)
    rep = check_2segal(broken, 3)
    assert not rep.ok
    bad = rep.failures()
    assert bad and "surjective" in bad[0].detail


def test_corrupted_degeneracy_fails_unitality():
    X = nerve_of_cyclic(2, 3)
    levels = list(X.levels)

    def bad_s0(g):
        return (1,) + g  # inserts the nonidentity element

    degs = dict(X.degeneracies)
    degs[(0, 0)] = Functor(
        levels[0], levels[1], bad_s0,
        lambda f: Mor(bad_s0(f.src), bad_s0(f.tgt), "id"), name="bad_s0"
    )
    broken = TruncatedSimplicialGroupoid(levels, X.faces, degs)
    rep = check_unital(broken, 2)
    assert not rep.ok


def test_vacuous_truncation_passes():
    X = nerve_of_cyclic(2, 1)
    assert check_unital(X, 1).ok  # no squares in range
    with pytest.raises(ValueError):
        check_2segal(X, 3)  # levels missing -> input error


def test_identity_map_is_culf_and_ikeo():
    X = nerve_of_cyclic(2, 3)
    idmap = SimplicialMap(X, X, [
        Functor(X.level(n), X.level(n), lambda x: x, lambda f: f)
        for n in range(4)
    ])
    idmap.validate()
    assert check_culf(idmap, 3).ok
    rep = check_ikeo(idmap, 3)
    assert rep.ok
    assert rep.entries[0].label == (0,)  # the F_0 equivalence entry comes first


def test_collapse_map_of_nerves_is_not_culf():
    # Z/2 -> trivial group: factorizations of e do not lift uniquely, so the
    # induced nerve map must fail the n = 2 long-edge square
    Y = nerve_of_cyclic(2, 3)
    X = nerve_of_cyclic(1, 3)
    proj = SimplicialMap(Y, X, [
        Functor(Y.level(n), X.level(n),
                (lambda n: lambda g: (0,) * n)(n),
                (lambda n: lambda f: Mor((0,) * n, (0,) * n, "id"))(n))
        for n in range(4)
    ])
    proj.validate()
    rep = check_culf(proj, 3)
    assert not rep.ok
    assert not [e for e in rep.entries if e.label == (2,)][0].ok


def test_decalage_projection_is_culf_but_not_ikeo():
    X = nerve_of_cyclic(2, 4)
    dec_levels = [X.level(n + 1) for n in range(4)]
    faces = {(n, i): X.face(n + 1, i) for n in range(1, 4) for i in range(n + 1)}
    degs = {(n, i): X.degeneracy(n + 1, i) for n in range(3) for i in range(n + 1)}
    Dec = TruncatedSimplicialGroupoid(dec_levels, faces, degs, name="Dec")
    validate_simplicial_identities(Dec)
    drop_last = SimplicialMap(Dec, X, [X.face(n + 1, n + 1) for n in range(4)])
    drop_last.validate()
    assert check_culf(drop_last, 3).ok
    rep = check_ikeo(drop_last, 3)
    assert not rep.ok
    assert not rep.entries[0].ok  # Dec_0 = X_1 is not equivalent to X_0


def test_report_json_shape():
    X = nerve_of_cyclic(2, 3)
    rep = check_2segal(X, 3)
    s = report_to_json_str(rep)
    assert '"kind": "2segal"' in s and '"ok": true' in s
