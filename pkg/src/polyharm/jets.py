"""Truncated multivariate Taylor arithmetic (jets) over exact rationals.

A jet of dimension m and truncation degree D at a base point x0 stores the
dense coefficient table

    c_beta = (d^beta f)(x0) / beta!        for every multi-index |beta| <= D,

so a jet has exactly C(m + D, D) entries.  Ring operations never exceed
degree D: multiplication is the truncated Cauchy product, division is the
triangular solve of q * b = a in graded order (valid whenever b(x0) != 0).
In exact mode every coefficient is an arbitrary-precision rational and all
identities below hold with zero rounding.

Multi-indices live in graded lexicographic order: ascending total degree,
ties broken by ascending lexicographic comparison of the exponent tuple.
A key observation used throughout is that the first C(m + d, d) positions of
a degree-D table are exactly the degree-<=d prefix, so truncation is a slice.

Sign convention: ``laplacian`` is the analyst's flat Laplacian sum of second
partials.  Curved-metric operators live in :mod:`polyharm.spaceform`.
"""

from __future__ import annotations

import math
from array import array
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DegreeError, ShapeMismatchError, SingularDivisionError
from .rationals import EXACT, coerce, inv, scalar_zero

MultiIndex = tuple  # exponent tuple (beta_1, ..., beta_m), all entries >= 0

_MUL_CACHE_LIMIT = 20000  # cache per-position shift arrays only on small spaces


@lru_cache(maxsize=None)
def _exponent_rows(nvars: int, budget: int) -> np.ndarray:
    """All exponent rows with ``sum <= budget`` over ``nvars`` variables."""
    if nvars == 1:
        return np.arange(budget + 1, dtype=np.int16).reshape(-1, 1)
    blocks = []
    for v in range(budget + 1):
        sub = _exponent_rows(nvars - 1, budget - v)
        col = np.full((sub.shape[0], 1), v, dtype=np.int16)
        blocks.append(np.hstack([col, sub]))
    return np.vstack(blocks)


class JetSpace:
    """Shared index tables for jets of a fixed (dimension, degree) pair."""

    _cache: dict[tuple[int, int], "JetSpace"] = {}

    def __init__(self, dim: int, degree: int):
        if dim < 1:
            raise ShapeMismatchError("jet dimension must be >= 1")
        if degree < 0:
            raise DegreeError("truncation degree must be >= 0")
        base = degree + 1
        if (dim + 1) * math.log2(base) > 62:
            raise DegreeError(f"truncation space ({dim}, {degree}) too large for packed keys")
        self.dim = dim
        self.degree = degree
        exps = _exponent_rows(dim, degree)
        self._pw = (base ** np.arange(dim - 1, -1, -1)).astype(np.int64)
        self._grade_unit = base**dim
        key = exps.astype(np.int64) @ self._pw + exps.sum(axis=1, dtype=np.int64) * self._grade_unit
        order = np.argsort(key, kind="stable")
        self.exponents = np.ascontiguousarray(exps[order])
        self.keys = np.ascontiguousarray(key[order])
        self.size = len(self.keys)
        # position of the first multi-index of each total degree
        self.degree_offsets = [math.comb(dim + d - 1, dim) if d > 0 else 0 for d in range(degree + 2)]
        self.degree_offsets[degree + 1] = self.size
        self._downshift: dict[tuple, array] = {}
        self._mulshift: dict[int, np.ndarray] = {}
        self._diff_tables: dict[tuple[int, int], tuple[list, list]] = {}
        self._iterlap: dict[int, list[tuple[int, int]]] = {}
        self._grad_positions: list[int] | None = None

    @classmethod
    def get(cls, dim: int, degree: int) -> "JetSpace":
        space = cls._cache.get((dim, degree))
        if space is None:
            space = cls(dim, degree)
            cls._cache[(dim, degree)] = space
        return space

    # -- position lookups ---------------------------------------------------

    def _key_of(self, beta: Sequence[int]) -> int:
        deg = 0
        key = 0
        for b, p in zip(beta, self._pw.tolist()):
            deg += b
            key += b * p
        return key + deg * int(self._grade_unit)

    def position(self, beta: Sequence[int]) -> int:
        """Graded-lex position of a multi-index (must lie in the table)."""
        k = self._key_of(beta)
        p = int(np.searchsorted(self.keys, k))
        if p >= self.size or self.keys[p] != k:
            raise DegreeError(f"multi-index {tuple(beta)} outside degree-{self.degree} table")
        return p

    def exponent(self, pos: int) -> MultiIndex:
        return tuple(int(v) for v in self.exponents[pos])

    def end_of_degree(self, d: int) -> int:
        """Position one past the last multi-index of total degree d."""
        return self.degree_offsets[min(d, self.degree) + 1]

    def grad_positions(self) -> list[int]:
        if self._grad_positions is None:
            self._grad_positions = [
                self.position(tuple(1 if j == i else 0 for j in range(self.dim)))
                for i in range(self.dim)
            ]
        return self._grad_positions

    # -- shift tables -------------------------------------------------------

    def downshift(self, beta: MultiIndex) -> array:
        """positions[p] of (exponent(p) - beta), or -1 where that is negative."""
        tab = self._downshift.get(beta)
        if tab is None:
            valid = (self.exponents >= np.asarray(beta, dtype=np.int16)).all(axis=1)
            kshift = self.keys - self._key_of(beta)
            pos = np.searchsorted(self.keys, kshift)
            pos = np.minimum(pos, self.size - 1)
            ok = valid & (self.keys[pos] == kshift)
            tab = array("i", np.where(ok, pos, -1).astype(np.int32).tobytes())
            self._downshift[beta] = tab
        return tab

    def mulshift(self, pos: int, limit: int) -> np.ndarray:
        """positions of exponent(pos) + exponent(q) for q < limit."""
        cached = self._mulshift.get(pos)
        if cached is not None and len(cached) >= limit:
            return cached[:limit]
        shifted = np.searchsorted(self.keys, self.keys[:limit] + self.keys[pos])
        if self.size <= _MUL_CACHE_LIMIT and limit == self.end_of_degree(self.degree - self._deg_of(pos)):
            self._mulshift[pos] = shifted
        return shifted

    def _deg_of(self, pos: int) -> int:
        return int(self.exponents[pos].sum())

    def diff_table(self, axis: int, order: int) -> tuple[list, list]:
        """Source positions and integer weights for d^order/dx_axis^order.

        Row p of the degree-(D - order) result pulls from the source position
        of exponent(p) + order*e_axis with weight (beta+1)...(beta+order).
        """
        key = (axis, order)
        tab = self._diff_tables.get(key)
        if tab is None:
            nres = self.end_of_degree(self.degree - order)
            kt = self.keys[:nres] + order * (int(self._pw[axis]) + int(self._grade_unit))
            src = np.searchsorted(self.keys, kt).astype(np.int64)
            b = self.exponents[:nres, axis].astype(np.int64)
            w = np.ones(nres, dtype=np.int64)
            for j in range(1, order + 1):
                w *= b + j
            tab = (src.tolist(), w.tolist())
            self._diff_tables[key] = tab
        return tab

    def iterlap_targets(self, order: int) -> list[tuple[int, int]]:
        """Positions and integer weights for the k-fold Laplacian at the base.

        Delta^k f(x0) = sum over |gamma| = k of  k!/gamma! * (2gamma)! * c_{2gamma}.
        """
        targets = self._iterlap.get(order)
        if targets is None:
            gammas = [g for g in _multi_indices(self.dim, order) if sum(g) == order]
            targets = []
            for g in gammas:
                tau = tuple(2 * v for v in g)
                w = math.factorial(order)
                for v in g:
                    w //= math.factorial(v)
                for v in tau:
                    w *= math.factorial(v)
                targets.append((self.position(tau), w))
            self._iterlap[order] = targets
        return targets


def _multi_indices(m: int, D: int) -> list[MultiIndex]:
    space = JetSpace.get(m, D)
    return [tuple(int(v) for v in row) for row in space.exponents]


def multi_indices(m: int, D: int) -> list[MultiIndex]:
    """All multi-indices with |beta| <= D in graded lexicographic order."""
    return _multi_indices(m, D)


class Jet:
    """Immutable truncated Taylor expansion at a fixed base point.

    Jets are value objects: operations return new jets and never mutate
    operands, so evaluation at many sample points is trivially parallel.
    """

    __slots__ = ("space", "mode", "base", "coeffs")

    def __init__(self, space: JetSpace, mode: str, base: tuple, coeffs: list):
        self.space = space
        self.mode = mode
        self.base = base
        self.coeffs = coeffs

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, value, dim: int, degree: int, base: tuple, mode: str) -> "Jet":
        space = JetSpace.get(dim, degree)
        coeffs = [scalar_zero(mode)] * space.size
        coeffs[0] = coerce(value, mode)
        return cls(space, mode, base, coeffs)

    def constant_like(self, value) -> "Jet":
        return Jet.constant(value, self.space.dim, self.space.degree, self.base, self.mode)

    def zero_like(self) -> "Jet":
        return Jet.constant(0, self.space.dim, self.space.degree, self.base, self.mode)

    # -- basic views ----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def degree(self) -> int:
        return self.space.degree

    def value(self):
        """f(x0), the degree-0 coefficient."""
        return self.coeffs[0]

    def gradient(self) -> tuple:
        if self.degree < 1:
            raise DegreeError("gradient needs degree >= 1")
        return tuple(self.coeffs[p] for p in self.space.grad_positions())

    def coefficient(self, beta: Sequence[int]):
        return self.coeffs[self.space.position(tuple(beta))]

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def truncate(self, degree: int) -> "Jet":
        if degree >= self.degree:
            return self
        space = JetSpace.get(self.dim, degree)
        return Jet(space, self.mode, self.base, self.coeffs[: space.size])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Jet):
            return NotImplemented
        return (
            self.space is other.space
            and self.mode == other.mode
            and self.base == other.base
            and self.coeffs == other.coeffs
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Jet(m={self.dim}, D={self.degree}, f(x0)={self.coeffs[0]})"

    # -- ring operations --------------------------------------------------

    def _check_compatible(self, other: "Jet") -> None:
        if self.dim != other.dim:
            raise ShapeMismatchError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if self.mode != other.mode:
            raise ShapeMismatchError(f"mode mismatch: {self.mode} vs {other.mode}")
        if self.base != other.base:
            raise ShapeMismatchError("jets have different base points")

    def _aligned(self, other: "Jet") -> tuple["Jet", "Jet"]:
        self._check_compatible(other)
        d = min(self.degree, other.degree)
        return self.truncate(d), other.truncate(d)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return self._scalar_shift(other)
        a, b = self._aligned(other)
        return Jet(a.space, a.mode, a.base, [x + y for x, y in zip(a.coeffs, b.coeffs)])

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if not isinstance(other, Jet):
            return self._scalar_shift(-coerce(other, self.mode))
        a, b = self._aligned(other)
        return Jet(a.space, a.mode, a.base, [x - y for x, y in zip(a.coeffs, b.coeffs)])

    def __rsub__(self, other):
        return (-self)._scalar_shift(other)

    def __neg__(self):
        return Jet(self.space, self.mode, self.base, [-c for c in self.coeffs])

    def _scalar_shift(self, value) -> "Jet":
        coeffs = list(self.coeffs)
        coeffs[0] = coeffs[0] + coerce(value, self.mode)
        return Jet(self.space, self.mode, self.base, coeffs)

    def scale(self, value) -> "Jet":
        s = coerce(value, self.mode)
        return Jet(self.space, self.mode, self.base, [s * c if c else c for c in self.coeffs])

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        a, b = self._aligned(other)
        space = a.space
        D = space.degree
        an = sum(1 for c in a.coeffs if c)
        bn = sum(1 for c in b.coeffs if c)
        outer, inner = (a, b) if an <= bn else (b, a)
        res = [scalar_zero(a.mode)] * space.size
        inner_coeffs = inner.coeffs
        for p, c in enumerate(outer.coeffs):
            if not c:
                continue
            limit = space.end_of_degree(D - space._deg_of(p))
            targets = space.mulshift(p, limit)
            for q in range(limit):
                cq = inner_coeffs[q]
                if cq:
                    t = targets[q]
                    res[t] = res[t] + c * cq
        return Jet(space, a.mode, a.base, res)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self.scale(inv(coerce(other, self.mode)))
        a, b = self._aligned(other)
        return _divide(a, b)

    def __rtruediv__(self, other):
        return self.constant_like(other) / self

    # -- differential operators -------------------------------------------

    def partial(self, axis: int) -> "Jet":
        if self.degree < 1:
            raise DegreeError("partial derivative needs degree >= 1")
        if not 0 <= axis < self.dim:
            raise ShapeMismatchError(f"axis {axis} out of range for dimension {self.dim}")
        src, w = self.space.diff_table(axis, 1)
        out_space = JetSpace.get(self.dim, self.degree - 1)
        coeffs = self.coeffs
        res = [scalar_zero(self.mode)] * out_space.size
        for p in range(out_space.size):
            c = coeffs[src[p]]
            if c:
                res[p] = w[p] * c
        return Jet(out_space, self.mode, self.base, res)

    def laplacian(self) -> "Jet":
        if self.degree < 2:
            raise DegreeError("laplacian needs degree >= 2")
        out_space = JetSpace.get(self.dim, self.degree - 2)
        res = [scalar_zero(self.mode)] * out_space.size
        coeffs = self.coeffs
        for i in range(self.dim):
            src, w = self.space.diff_table(i, 2)
            for p in range(out_space.size):
                c = coeffs[src[p]]
                if c:
                    res[p] = res[p] + w[p] * c
        return Jet(out_space, self.mode, self.base, res)


def _divide(a: Jet, b: Jet) -> Jet:
    """Triangular solve of q * b = a in graded order; needs b(x0) != 0."""
    b0 = b.coeffs[0]
    if not b0:
        raise SingularDivisionError("division by a jet vanishing at the base point")
    space = a.space
    inv_b0 = inv(b0)
    supp = [
        (c, space.downshift(space.exponent(p)))
        for p, c in enumerate(b.coeffs)
        if p > 0 and c
    ]
    zero = scalar_zero(a.mode)
    acoef = a.coeffs
    q = [zero] * space.size
    q[0] = acoef[0] * inv_b0
    for p in range(1, space.size):
        acc = acoef[p]
        for coef, tab in supp:
            t = tab[p]
            if t >= 0:
                qt = q[t]
                if qt:
                    acc = acc - coef * qt
        if acc:
            q[p] = acc * inv_b0
    return Jet(space, a.mode, a.base, q)


# -- module-level operations (the public algebra surface) -------------------


def seed(x0: Sequence, degree: int, mode: str = EXACT) -> tuple[Jet, ...]:
    """Coordinate jets at x0: the i-th jet represents the function x -> x_i."""
    if degree < 0:
        raise DegreeError("degree must be >= 0")
    pt = tuple(coerce(v, mode) for v in x0)
    m = len(pt)
    if m < 1:
        raise ShapeMismatchError("base point needs at least one coordinate")
    space = JetSpace.get(m, degree)
    jets = []
    for i in range(m):
        coeffs = [scalar_zero(mode)] * space.size
        coeffs[0] = pt[i]
        if degree >= 1:
            coeffs[space.grad_positions()[i]] = coerce(1, mode)
        jets.append(Jet(space, mode, pt, coeffs))
    return tuple(jets)


def div(a: Jet, b: Jet) -> Jet:
    """Quotient jet a/b; exact in exact mode, error if b(x0) = 0."""
    return a / b


def partial(j: Jet, axis: int) -> Jet:
    """Degree-(D-1) jet of the partial derivative along one axis."""
    return j.partial(axis)


def laplacian(j: Jet) -> Jet:
    """Degree-(D-2) jet of the flat Laplacian (sum of second partials)."""
    return j.laplacian()


def iterated_laplacian(j: Jet, order: int):
    """Value of Delta^order f at the base point; needs degree >= 2*order."""
    if order < 0:
        raise DegreeError("order must be >= 0")
    if order == 0:
        return j.value()
    if j.degree < 2 * order:
        raise DegreeError(f"degree {j.degree} insufficient for Delta^{order}")
    total = scalar_zero(j.mode)
    coeffs = j.coeffs
    for pos, w in j.space.iterlap_targets(order):
        c = coeffs[pos]
        if c:
            total = total + w * c
    return total


def iterated_laplacian_product(a: Jet, b: Jet, order: int):
    """Delta^order (a*b)(x0) without materializing the product jet.

    Only the degree-2*order coefficients of a*b feed the iterated Laplacian,
    and each is a short convolution against the nonzero entries of the
    sparser factor.  Equivalent to ``iterated_laplacian(a*b, order)``.
    """
    aa, bb = a._aligned(b)
    if order == 0:
        return aa.value() * bb.value()
    if aa.degree < 2 * order:
        raise DegreeError(f"degree {aa.degree} insufficient for Delta^{order}")
    space = aa.space
    an = sum(1 for c in aa.coeffs if c)
    bn = sum(1 for c in bb.coeffs if c)
    sparse, dense = (aa, bb) if an <= bn else (bb, aa)
    targets = space.iterlap_targets(order)
    target_keys = np.array([space.keys[p] for p, _ in targets], dtype=np.int64)
    target_rows = space.exponents[[p for p, _ in targets]]
    vals = [scalar_zero(aa.mode)] * len(targets)
    for p, c in enumerate(sparse.coeffs):
        if not c:
            continue
        beta = space.exponents[p]
        ok = (target_rows >= beta).all(axis=1)
        shifted = np.searchsorted(space.keys, target_keys - space.keys[p])
        for t in range(len(targets)):
            if ok[t]:
                cd = dense.coeffs[int(shifted[t])]
                if cd:
                    vals[t] = vals[t] + c * cd
    total = scalar_zero(aa.mode)
    for (pos, w), v in zip(targets, vals):
        if v:
            total = total + w * v
    return total


def value_and_gradient(j: Jet) -> tuple:
    """(f(x0), grad f(x0)) read off the degree-0 and degree-1 coefficients."""
    return j.value(), j.gradient()


def dot(a: Iterable[Jet], b: Iterable[Jet]) -> Jet:
    """Euclidean inner product of two jet tuples."""
    terms = [x * y for x, y in zip(a, b)]
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def norm_sq(a: Iterable[Jet]) -> Jet:
    """Sum of squares of a jet tuple."""
    return dot(a, a)


def polynomial(coeff_map: dict, like: Jet) -> Jet:
    """Jet with prescribed coefficients (helper for tests and closed forms)."""
    coeffs = [scalar_zero(like.mode)] * like.space.size
    for beta, c in coeff_map.items():
        coeffs[like.space.position(tuple(beta))] = coerce(c, like.mode)
    return Jet(like.space, like.mode, like.base, coeffs)
