"""Shared utilities: exact linear algebra over Q and JSON serialization.

Rationals serialize as "p/q" strings (plain ints when the denominator is 1)
so that reports are exact and byte-stable.
"""

from __future__ import annotations

import json
from fractions import Fraction
from math import gcd


def to_jsonable(x):
    """Recursively convert Fractions and tuples for json.dumps."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return int(x)
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, dict):
        return {str(k) if not isinstance(k, str) else k: to_jsonable(v)
                for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    return x


def json_dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


# -- exact linear algebra over Q ----------------------------------------------


def _rref(rows):
    """Reduced row echelon form over Q.  Returns (rref rows, pivot columns)."""
    mat = [[Fraction(x) for x in r] for r in rows]
    if not mat:
        return [], []
    ncols = len(mat[0])
    pivots = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, len(mat)) if mat[i][c]), None)
        if pr is None:
            continue
        mat[r], mat[pr] = mat[pr], mat[r]
        inv = 1 / mat[r][c]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c]:
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    return mat[:r], pivots


def frac_rank(rows) -> int:
    return len(_rref(rows)[0])


def frac_kernel_basis(rows):
    """Basis of the right kernel {x : A x = 0}, one vector per free column.

    Vectors are normalized to coprime integers with positive leading entry,
    which makes frozen regression comparisons exact and readable.
    """
    if not rows:
        return ()
    ncols = len(rows[0])
    red, pivots = _rref(rows)
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -red[r][f]
        basis.append(_normalize_integer(v))
    return tuple(basis)


def _normalize_integer(v):
    den = 1
    for x in v:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    lead = next((x for x in ints if x), 0)
    if lead < 0:
        ints = [-x for x in ints]
    return tuple(ints)
