"""Exact linear algebra over small finite fields.

Everything downstream (groupoid enumeration, Hall numbers, form isometry)
reduces to arithmetic in F_q and row reduction of small matrices, so this
module keeps both as simple and as exact as possible: field elements are
ints in range(q) with table-driven arithmetic, matrices are immutable
tuples of tuples.  No floats anywhere.

Conventions used throughout the package:

- vectors are column vectors; a linear map F_q^n -> F_q^m is an m x n matrix,
  and composition is matrix multiplication,
- a d-dimensional subspace of F_q^n is represented by its reduced row echelon
  basis, a d x n matrix of full row rank; the corresponding inclusion
  F_q^d -> F_q^n is the transpose of that basis matrix.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _factor_prime_power(q: int) -> tuple[int, int]:
    for p in range(2, q + 1):
        if _is_prime(p) and q % p == 0:
            k = 0
            m = q
            while m % p == 0:
                m //= p
                k += 1
            if m != 1:
                raise ValueError(f"{q} is not a prime power")
            return p, k
    raise ValueError(f"{q} is not a prime power")


def _poly_mul_mod(a, b, modulus, p):
    # plain schoolbook product of coefficient tuples, reduced mod the monic
    # modulus polynomial; coefficients live in Z/p
    res = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                res[i + j] = (res[i + j] + ai * bj) % p
    k = len(modulus) - 1
    for i in range(len(res) - 1, k - 1, -1):
        c = res[i]
        if c:
            res[i] = 0
            for j in range(k):
                res[i - k + j] = (res[i - k + j] - c * modulus[j]) % p
    res = res[:k]
    while len(res) < k:
        res.append(0)
    return tuple(res)


def _find_irreducible(p: int, k: int) -> tuple[int, ...]:
    """Lexicographically first monic irreducible of degree k over F_p.

    Returned as coefficient tuple (c_0, ..., c_{k-1}, 1).  Trial division by
    all lower-degree monic polynomials; fine for the k <= 4 we ever use.
    """
    if k == 1:
        return (0, 1)

    def poly_divmod_ok(f, g):
        # does monic g divide f (coefficients mod p)?
        f = list(f)
        dg = len(g) - 1
        for i in range(len(f) - 1, dg - 1, -1):
            c = f[i]
            if c:
                for j in range(dg + 1):
                    f[i - dg + j] = (f[i - dg + j] - c * g[j]) % p
        return all(c == 0 for c in f)

    monics = lambda d: (
        tail + (1,) for tail in itertools.product(range(p), repeat=d)
    )
    for f in monics(k):
        ok = True
        for d in range(1, k // 2 + 1):
            for g in monics(d):
                if poly_divmod_ok(f, g):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return f
    raise AssertionError("no irreducible polynomial found")


class FiniteField:
    """The field with q elements, q a prime power.

    Elements are the ints 0..q-1.  For prime q this is arithmetic mod q; for
    q = p^k an element n encodes the polynomial whose base-p digits are its
    coefficients, and multiplication happens modulo a fixed irreducible.
    Addition and multiplication tables are precomputed, so all field ops are
    tuple lookups.
    """

    _cache: dict[int, "FiniteField"] = {}

    def __new__(cls, q: int):
        if q in cls._cache:
            return cls._cache[q]
        self = super().__new__(cls)
        cls._cache[q] = self
        return self

    def __init__(self, q: int):
        if getattr(self, "q", None) == q:
            return
        p, k = _factor_prime_power(q)
        self.q = q
        self.p = p
        self.k = k
        self.zero = 0
        self.one = 1
        if k == 1:
            add = tuple(
                tuple((a + b) % p for b in range(p)) for a in range(p)
            )
            mul = tuple(
                tuple((a * b) % p for b in range(p)) for a in range(p)
            )
        else:
            self.modulus = _find_irreducible(p, k)
            digs = [self._digits(n) for n in range(q)]
            enc = {d: n for n, d in enumerate(digs)}
            add = tuple(
                tuple(
                    enc[tuple((x + y) % p for x, y in zip(digs[a], digs[b]))]
                    for b in range(q)
                )
                for a in range(q)
            )
            mul = tuple(
                tuple(
                    enc[_poly_mul_mod(digs[a], digs[b], self.modulus, p)]
                    for b in range(q)
                )
                for a in range(q)
            )
        self._add = add
        self._mul = mul
        self._neg = tuple(
            next(b for b in range(q) if add[a][b] == 0) for a in range(q)
        )
        inv = [None] * q
        for a in range(1, q):
            inv[a] = next(b for b in range(1, q) if mul[a][b] == 1)
        self._inv = tuple(inv)
        self.elements = tuple(range(q))

    def _digits(self, n: int) -> tuple[int, ...]:
        d = []
        for _ in range(self.k):
            d.append(n % self.p)
            n //= self.p
        return tuple(d)

    def add(self, a, b):
        return self._add[a][b]

    def sub(self, a, b):
        return self._add[a][self._neg[b]]

    def neg(self, a):
        return self._neg[a]

    def mul(self, a, b):
        return self._mul[a][b]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of 0")
        return self._inv[a]

    def div(self, a, b):
        return self._mul[a][self.inv(b)]

    def from_int(self, n: int) -> int:
        # scalar embedding of Z: n maps to n mod p (a constant polynomial)
        return n % self.p

    def units(self):
        return self.elements[1:]

    def __repr__(self):
        return f"GF({self.q})"


class Matrix:
    """Immutable matrix over a FiniteField.  Hashable, so usable as morphism
    data inside groupoids."""

    __slots__ = ("field", "nrows", "ncols", "rows", "_hash")

    def __init__(self, field: FiniteField, rows, ncols=None) -> None:
        # ncols disambiguates the 0 x k shapes, where rows carry no width
        rows = tuple(tuple(r) for r in rows)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "nrows", len(rows))
        if rows:
            ncols = len(rows[0])
        elif ncols is None:
            ncols = 0
        object.__setattr__(self, "ncols", ncols)
        for r in rows:
            if len(r) != self.ncols:
                raise ValueError("ragged rows")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_hash", hash((field.q, rows, self.ncols)))

    def __setattr__(self, *a):
        raise AttributeError("Matrix is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(field, nrows, ncols):
        return Matrix(field, tuple((0,) * ncols for _ in range(nrows)), ncols=ncols)

    @staticmethod
    def identity(field, n):
        return Matrix(
            field, tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))
        )

    @staticmethod
    def from_cols(field, cols, nrows=None):
        cols = tuple(tuple(c) for c in cols)
        if nrows is None:
            nrows = len(cols[0]) if cols else 0
        return Matrix(
            field,
            tuple(tuple(c[i] for c in cols) for i in range(nrows)),
            ncols=len(cols),
        )

    @staticmethod
    def blocks(field, grid):
        """Assemble from a 2d grid of matrices with matching edge sizes."""
        rows = []
        for blockrow in grid:
            h = blockrow[0].nrows
            for i in range(h):
                rows.append(tuple(itertools.chain(*(b.rows[i] for b in blockrow))))
        width = sum(b.ncols for b in grid[0]) if grid else 0
        return Matrix(field, rows, ncols=width)

    # -- basic ops ---------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, Matrix)
            and self.field is other.field
            and self.rows == other.rows
            and self.ncols == other.ncols
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        body = "; ".join(" ".join(str(x) for x in r) for r in self.rows)
        return f"Mat{self.nrows}x{self.ncols}[{body}]"

    def __add__(self, other):
        F = self.field
        return Matrix(
            F,
            tuple(
                tuple(F.add(a, b) for a, b in zip(ra, rb))
                for ra, rb in zip(self.rows, other.rows)
            ),
        )

    def __sub__(self, other):
        F = self.field
        return Matrix(
            F,
            tuple(
                tuple(F.sub(a, b) for a, b in zip(ra, rb))
                for ra, rb in zip(self.rows, other.rows)
            ),
        )

    def __neg__(self):
        F = self.field
        return Matrix(F, tuple(tuple(F.neg(a) for a in r) for r in self.rows))

    def __mul__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.nrows}x{self.ncols} * {other.nrows}x{other.ncols}")
        F = self.field
        if self.nrows == 0 or self.ncols == 0 or other.ncols == 0:
            return Matrix.zero(F, self.nrows, other.ncols)
        mul, add = F._mul, F._add
        ocols = tuple(zip(*other.rows))
        out = []
        for r in self.rows:
            row = []
            for c in ocols:
                acc = 0
                for a, b in zip(r, c):
                    if a and b:
                        acc = add[acc][mul[a][b]]
                row.append(acc)
            out.append(tuple(row))
        return Matrix(F, out)

    def scale(self, c):
        F = self.field
        return Matrix(F, tuple(tuple(F.mul(c, a) for a in r) for r in self.rows))

    def transpose(self):
        if self.nrows and self.ncols:
            return Matrix(self.field, tuple(zip(*self.rows)))
        return Matrix(self.field, ((),) * self.ncols, ncols=self.nrows)

    def is_zero(self):
        return all(all(a == 0 for a in r) for r in self.rows)

    def col(self, j):
        return tuple(r[j] for r in self.rows)

    def hstack(self, other):
        if self.nrows != other.nrows:
            raise ValueError("row mismatch")
        return Matrix(
            self.field,
            tuple(a + b for a, b in zip(self.rows, other.rows)),
            ncols=self.ncols + other.ncols,
        )

    def vstack(self, other):
        if self.ncols != other.ncols:
            raise ValueError("column mismatch")
        return Matrix(self.field, self.rows + other.rows, ncols=self.ncols)

    # -- elimination -------------------------------------------------------

    def rref(self):
        """Reduced row echelon form.  Returns (R, pivots)."""
        F = self.field
        rows = [list(r) for r in self.rows]
        pivots = []
        pr = 0
        for c in range(self.ncols):
            pivot = next((r for r in range(pr, self.nrows) if rows[r][c] != 0), None)
            if pivot is None:
                continue
            rows[pr], rows[pivot] = rows[pivot], rows[pr]
            inv = F.inv(rows[pr][c])
            rows[pr] = [F.mul(inv, x) for x in rows[pr]]
            for r in range(self.nrows):
                if r != pr and rows[r][c] != 0:
                    f = rows[r][c]
                    rows[r] = [F.sub(x, F.mul(f, y)) for x, y in zip(rows[r], rows[pr])]
            pivots.append(c)
            pr += 1
            if pr == self.nrows:
                break
        return Matrix(F, tuple(tuple(r) for r in rows), ncols=self.ncols), tuple(pivots)

    def rank(self):
        return len(self.rref()[1])

    def is_invertible(self):
        return self.nrows == self.ncols and self.rank() == self.nrows

    def inverse(self):
        if self.nrows != self.ncols:
            raise ValueError("not square")
        n = self.nrows
        aug = self.hstack(Matrix.identity(self.field, n))
        R, piv = aug.rref()
        if piv[:n] != tuple(range(n)):
            raise ValueError("singular matrix")
        return Matrix(self.field, tuple(r[n:] for r in R.rows))

    def solve_right(self, b: "Matrix"):
        """One X with self @ X = b, or None.  b is nrows x k."""
        n = self.ncols
        aug = self.hstack(b)
        R, piv = aug.rref()
        if any(p >= n for p in piv):
            return None
        X = [[0] * b.ncols for _ in range(n)]
        for r, c in enumerate(piv):
            for j in range(b.ncols):
                X[c][j] = R.rows[r][n + j]
        return Matrix(self.field, tuple(tuple(r) for r in X), ncols=b.ncols)

    def solve_left(self, b: "Matrix"):
        """One X with X @ self = b, or None."""
        Xt = self.transpose().solve_right(b.transpose())
        return None if Xt is None else Xt.transpose()

    def kernel(self):
        """Matrix whose columns are a basis of the right null space."""
        F = self.field
        R, piv = self.rref()
        free = [c for c in range(self.ncols) if c not in piv]
        cols = []
        for fc in free:
            v = [0] * self.ncols
            v[fc] = 1
            for r, pc in enumerate(piv):
                v[pc] = F.neg(R.rows[r][fc])
            cols.append(tuple(v))
        return Matrix.from_cols(F, cols, nrows=self.ncols)

    def column_space_rref(self):
        """RREF basis (rows) of the column span, as a rank x nrows matrix."""
        R, piv = self.transpose().rref()
        return Matrix(self.field, R.rows[: len(piv)], ncols=self.nrows)


def all_matrices(field, nrows, ncols):
    """Every nrows x ncols matrix, lexicographic.  q^(nrows*ncols) of them."""
    if nrows == 0 or ncols == 0:
        yield Matrix.zero(field, nrows, ncols)
        return
    for flat in itertools.product(field.elements, repeat=nrows * ncols):
        yield Matrix(
            field, tuple(flat[i * ncols : (i + 1) * ncols] for i in range(nrows))
        )


@lru_cache(maxsize=None)
def general_linear(field, n):
    """All of GL_n(F_q), as a tuple.  Cached; intended for q^(n^2) small."""
    if n == 0:
        return (Matrix.zero(field, 0, 0),)
    return tuple(m for m in all_matrices(field, n, n) if m.is_invertible())


def gl_order(n: int, q: int) -> int:
    out = 1
    for i in range(n):
        out *= q**n - q**i
    return out


# -- subspaces --------------------------------------------------------------


def pivot_patterns(n: int, d: int):
    return itertools.combinations(range(n), d)


def _pattern_free_cells(n, pattern):
    d = len(pattern)
    cells = []
    for r in range(d):
        for c in range(pattern[r] + 1, n):
            if c not in pattern:
                cells.append((r, c))
    return cells


def subspaces(field, n, d):
    """All d-dimensional subspaces of F_q^n as RREF basis matrices (d x n)."""
    for pattern in pivot_patterns(n, d):
        cells = _pattern_free_cells(n, pattern)
        for vals in itertools.product(field.elements, repeat=len(cells)):
            rows = [[0] * n for _ in range(d)]
            for r, c in zip(range(d), pattern):
                rows[r][c] = 1
            for (r, c), v in zip(cells, vals):
                rows[r][c] = v
            yield Matrix(field, tuple(tuple(r) for r in rows), ncols=n)


def subspace_count(n: int, d: int, q: int) -> int:
    """Number of d-dim subspaces of F_q^n by pivot census (no enumeration)."""
    total = 0
    for pattern in pivot_patterns(n, d):
        total += q ** len(_pattern_free_cells(n, pattern))
    return total


def span_rref(field, vectors, n):
    """RREF basis matrix of the span of the given length-n row vectors."""
    if not vectors:
        return Matrix.zero(field, 0, n)
    R, piv = Matrix(field, tuple(vectors)).rref()
    return Matrix(field, R.rows[: len(piv)], ncols=n)


def subspace_key(mat: Matrix):
    """Canonical key of the row span of mat: the RREF rows."""
    R, piv = mat.rref()
    return R.rows[: len(piv)]


def vectors_in_colspan(mat: Matrix):
    """All vectors (as column tuples) in the column span of mat."""
    F = mat.field
    basis = mat.column_space_rref()  # rank x nrows
    r = basis.nrows
    for coeffs in itertools.product(F.elements, repeat=r):
        v = [0] * mat.nrows
        for c, row in zip(coeffs, basis.rows):
            if c:
                v = [F.add(x, F.mul(c, y)) for x, y in zip(v, row)]
        yield tuple(v)


# -- quantum integers -------------------------------------------------------


def qint(n: int, q) -> int:
    """[n]_q = 1 + q + ... + q^(n-1)."""
    out = 0
    power = 1
    for _ in range(n):
        out += power
        power *= q
    return out


def qfactorial(n: int, q) -> int:
    out = 1
    for i in range(1, n + 1):
        out *= qint(i, q)
    return out


def qbinom(n: int, k: int, q) -> int:
    """Gaussian binomial [n choose k]_q via the q-Pascal recursion."""
    if k < 0 or k > n:
        return 0
    row = [1]
    for i in range(1, n + 1):
        new = [1]
        for j in range(1, i):
            new.append(row[j - 1] + q**j * row[j])
        new.append(1)
        row = new
    return row[k]


def lagrange_interpolate(points):
    """Integer-coefficient polynomial through the given (x, y) points.

    Returns a coefficient tuple (c_0, c_1, ...) with exact Fractions reduced
    to ints when possible; raises if the interpolant is not integral.  Used
    to recover Hall polynomials from evaluations at several prime powers.
    """
    xs = [Fraction(x) for x, _ in points]
    ys = [Fraction(y) for _, y in points]
    n = len(points)
    coeffs = [Fraction(0)] * n
    for i in range(n):
        # basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j)
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j in range(n):
            if j == i:
                continue
            new = [Fraction(0)] * (len(basis) + 1)
            for k, c in enumerate(basis):
                new[k] -= c * xs[j]
                new[k + 1] += c
            basis = new
            denom *= xs[i] - xs[j]
        w = ys[i] / denom
        for k, c in enumerate(basis):
            coeffs[k] += w * c
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    out = []
    for c in coeffs:
        if c.denominator != 1:
            raise ValueError(f"interpolant has non-integer coefficient {c}")
        out.append(int(c))
    return tuple(out)


def poly_eval(coeffs, x):
    out = 0
    for c in reversed(coeffs):
        out = out * x + c
    return out


def poly_str(coeffs, var="q"):
    if not any(coeffs):
        return "0"
    terms = []
    for i, c in enumerate(coeffs):
        if c == 0:
            continue
        if i == 0:
            terms.append(str(c))
        else:
            head = "" if c == 1 else ("-" if c == -1 else str(c) + "*")
            terms.append(f"{head}{var}" + (f"^{i}" if i > 1 else ""))
    return " + ".join(terms).replace("+ -", "- ")
