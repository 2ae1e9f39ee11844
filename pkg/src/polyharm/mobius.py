"""The conformal map family between space-form charts and its factors.

Maps have the inversive form

    phi(x) = b + k A (x - a) / |x - a|^eps,     eps in {0, 2},  A orthogonal,

which by Liouville's rigidity exhausts conformal maps between flat charts in
dimension >= 3.  Between curved charts the same formula is read through the
chart identifications; the conformal factor picks up the chart weights:

    lambda(x) = rho(phi(x)) * lambda_E(x) / sigma(x),

with lambda_E = k (eps = 0) or k/|x-a|^2 (eps = 2) the flat-to-flat factor,
sigma the domain chart factor and rho the target one.  For curved targets
lambda collapses to the closed forms

    2c * w(x) / (s*c^2 + |x - d|^2),    s = +1 sphere target, -1 hyperbolic,

with w = 1/sigma and (c, d) rational functions of the map parameters; those
reduced parameters are what the classification arguments manipulate, and
``reduced_parameters`` + ``closed_form_factor`` provide them as an
independent cross-check of the composed factor.

Everything here is exact: orthogonal matrices come from Cayley transforms of
rational skew matrices or signed permutations, so A^T A = I holds with no
rounding and residuals downstream stay exactly zero where they should.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import jets, spaceform
from .errors import (
    ChartDomainError,
    MapValidationError,
    NonpositiveFactorError,
    SingularDivisionError,
)
from .jets import Jet
from .rationals import rational
from .spaceform import SpaceFormModel

Matrix = tuple  # tuple of row tuples, exact rationals
Vector = tuple


# -- exact rational matrix helpers ------------------------------------------


def identity_matrix(m: int) -> Matrix:
    one, zero = rational(1), rational(0)
    return tuple(tuple(one if i == j else zero for j in range(m)) for i in range(m))


def signed_permutation(perm, signs=None) -> Matrix:
    """Orthogonal matrix sending e_j to signs[j] * e_perm[j]."""
    m = len(perm)
    if sorted(perm) != list(range(m)):
        raise MapValidationError(f"{perm!r} is not a permutation of 0..{m - 1}")
    signs = signs if signs is not None else [1] * m
    if any(s not in (-1, 1) for s in signs):
        raise MapValidationError("signs must be +1 or -1")
    zero = rational(0)
    rows = [[zero] * m for _ in range(m)]
    for j in range(m):
        rows[perm[j]][j] = rational(signs[j])
    return tuple(tuple(r) for r in rows)


def mat_vec(A: Matrix, v: Vector) -> Vector:
    return tuple(sum(Ai[j] * v[j] for j in range(len(v))) for Ai in A)


def transpose(A: Matrix) -> Matrix:
    m = len(A)
    return tuple(tuple(A[i][j] for i in range(m)) for j in range(m))


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    m = len(A)
    return tuple(
        tuple(sum(A[i][k] * B[k][j] for k in range(m)) for j in range(m)) for i in range(m)
    )


def mat_inverse(A: Matrix) -> Matrix:
    """Exact inverse by Gauss-Jordan elimination with rational pivoting."""
    m = len(A)
    aug = [list(A[i]) + [rational(1 if i == j else 0) for j in range(m)] for i in range(m)]
    for col in range(m):
        pivot = next((r for r in range(col, m) if aug[r][col]), None)
        if pivot is None:
            raise MapValidationError("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pc = aug[col][col]
        aug[col] = [v / pc for v in aug[col]]
        for r in range(m):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return tuple(tuple(row[m:]) for row in aug)


def is_orthogonal(A: Matrix) -> bool:
    m = len(A)
    att = mat_mul(transpose(A), A)
    return att == identity_matrix(m)


def cayley_orthogonal(S: Matrix) -> Matrix:
    """(I - S)^-1 (I + S) for rational skew-symmetric S: exactly orthogonal.

    The transform covers rotations with no -1 eigenvalue (det = +1); signed
    permutations supply the det = -1 cases needed by the tests.
    """
    m = len(S)
    for i in range(m):
        for j in range(m):
            if S[i][j] != -S[j][i]:
                raise MapValidationError("Cayley input must be skew-symmetric")
    one = identity_matrix(m)
    i_minus = tuple(tuple(one[i][j] - S[i][j] for j in range(m)) for i in range(m))
    i_plus = tuple(tuple(one[i][j] + S[i][j] for j in range(m)) for i in range(m))
    return mat_mul(mat_inverse(i_minus), i_plus)


# -- the map family ----------------------------------------------------------


@dataclass(frozen=True)
class MobiusMap:
    """Parameters (a, b, k, A, eps) of the inversive conformal family."""

    a: Vector
    b: Vector
    k: object
    A: Matrix
    epsilon: int

    @property
    def dim(self) -> int:
        return len(self.a)

    @classmethod
    def build(cls, a, b, k, A=None, epsilon=2) -> "MobiusMap":
        """Coerce entries to exact rationals and validate."""
        a = tuple(rational(v) for v in a)
        b = tuple(rational(v) for v in b)
        A = identity_matrix(len(a)) if A is None else tuple(tuple(rational(v) for v in row) for row in A)
        return validate(cls(a=a, b=b, k=rational(k), A=A, epsilon=int(epsilon)))

    @classmethod
    def inversion(cls, dim: int) -> "MobiusMap":
        """x -> x / |x|^2, the inversion in the unit sphere."""
        zero = tuple(rational(0) for _ in range(dim))
        return cls.build(a=zero, b=zero, k=1, epsilon=2)


def validate(mmap: MobiusMap) -> MobiusMap:
    """Check the family invariants; returns the map or raises."""
    m = mmap.dim
    if len(mmap.b) != m or len(mmap.A) != m or any(len(r) != m for r in mmap.A):
        raise MapValidationError("parameter dimensions disagree")
    if mmap.epsilon not in (0, 2):
        raise MapValidationError(f"epsilon must be 0 or 2, got {mmap.epsilon}")
    if not mmap.k:
        raise MapValidationError("scale k must be nonzero")
    if not is_orthogonal(mmap.A):
        raise MapValidationError("A is not exactly orthogonal")
    return mmap


@dataclass(frozen=True)
class ReducedFactorParams:
    """Center d, scale c and denominator sign of a curved-target factor.

    The factor of the map into the sphere (sign +1) or ball (sign -1) chart is
    2c * w_domain(x) / (sign * c^2 + |x - d|^2).
    """

    c: object
    d: Vector
    sign: int


@dataclass(frozen=True)
class ConformalInstance:
    """A validated (domain, target, map) triple of equal dimension."""

    domain: SpaceFormModel
    target: SpaceFormModel
    map: MobiusMap

    def __post_init__(self):
        if not (self.domain.dim == self.target.dim == self.map.dim):
            raise MapValidationError("domain, target, and map dimensions must agree")
        validate(self.map)
        if self.target.curvature == -1:
            b_sq = sum(v * v for v in self.map.b)
            if b_sq == 1:
                raise MapValidationError(
                    "|b| = 1 with a hyperbolic target leaves the reduced factor undefined"
                )

    @property
    def dim(self) -> int:
        return self.domain.dim


# -- evaluation ---------------------------------------------------------------


def apply_point(mmap: MobiusMap, x: Vector) -> Vector:
    """phi(x) on exact scalars (fast path for admissibility screening)."""
    u = tuple(xi - ai for xi, ai in zip(x, mmap.a))
    v = mat_vec(mmap.A, u)
    if mmap.epsilon == 0:
        return tuple(bi + mmap.k * vi for bi, vi in zip(mmap.b, v))
    f = sum(ui * ui for ui in u)
    if not f:
        raise SingularDivisionError("map is singular at x = a")
    return tuple(bi + mmap.k * vi / f for bi, vi in zip(mmap.b, v))


def apply_jet(mmap: MobiusMap, x: tuple[Jet, ...]) -> tuple[Jet, ...]:
    """Jets of the map components at the base point of x."""
    u = tuple(xi - ai for xi, ai in zip(x, mmap.a))
    rotated = []
    for i in range(mmap.dim):
        acc = None
        for j in range(mmap.dim):
            if mmap.A[i][j]:
                term = u[j].scale(mmap.A[i][j])
                acc = term if acc is None else acc + term
        rotated.append(acc if acc is not None else x[0].zero_like())
    if mmap.epsilon == 0:
        return tuple(r.scale(mmap.k) + bi for r, bi in zip(rotated, mmap.b))
    f = jets.norm_sq(u)
    if not f.value():
        raise SingularDivisionError("map is singular at x = a")
    inv_f = x[0].constant_like(1) / f
    return tuple(r.scale(mmap.k) * inv_f + bi for r, bi in zip(rotated, mmap.b))


def euclidean_factor(mmap: MobiusMap, x: tuple[Jet, ...]) -> Jet:
    """Flat-to-flat conformal factor: k for eps = 0, k/|x-a|^2 for eps = 2."""
    if mmap.epsilon == 0:
        return x[0].constant_like(mmap.k)
    u = tuple(xi - ai for xi, ai in zip(x, mmap.a))
    f = jets.norm_sq(u)
    if not f.value():
        raise SingularDivisionError("factor is singular at x = a")
    return x[0].constant_like(mmap.k) / f


def _target_weight_jet(target: SpaceFormModel, phi: tuple[Jet, ...]) -> Jet:
    """Jet of rho(phi(x)) for the target chart factor rho."""
    if target.curvature == 0:
        return phi[0].constant_like(1)
    denom = jets.norm_sq(phi).scale(target.curvature) + 1
    d0 = denom.value()
    if not d0:
        raise ChartDomainError("image point on the target chart boundary")
    if d0 < 0:
        raise ChartDomainError("image point outside the target chart")
    return phi[0].constant_like(2) / denom


def conformal_factor(
    domain: SpaceFormModel,
    target: SpaceFormModel,
    mmap: MobiusMap,
    x: tuple[Jet, ...],
) -> Jet:
    """Jet of lambda with phi^* h = lambda^2 g_domain; must be positive at x0."""
    base = tuple(j.value() for j in x)
    if not spaceform.in_domain(domain, base):
        raise ChartDomainError(f"base point outside the {domain.name} chart")
    lam = euclidean_factor(mmap, x)
    rho = _target_weight_jet(target, apply_jet(mmap, x))
    w = spaceform.inv_sigma_jet(domain, x)
    lam = lam * rho * w
    if lam.value() <= 0:
        raise NonpositiveFactorError(f"conformal factor {lam.value()} <= 0 at {base}")
    return lam


def conformal_factor_value(
    domain: SpaceFormModel, target: SpaceFormModel, mmap: MobiusMap, x: Vector
):
    """lambda(x) on exact scalars; raises where the factor is undefined."""
    if not spaceform.in_domain(domain, x):
        raise ChartDomainError(f"point outside the {domain.name} chart")
    if mmap.epsilon == 2:
        f = sum((xi - ai) ** 2 for xi, ai in zip(x, mmap.a))
        if not f:
            raise SingularDivisionError("map is singular at x = a")
        lam = mmap.k / f
    else:
        lam = mmap.k
    if target.curvature != 0:
        y = apply_point(mmap, x)
        denom = 1 + target.curvature * sum(v * v for v in y)
        if denom <= 0:
            raise ChartDomainError("image point outside the target chart")
        lam = lam * 2 / denom
    if domain.curvature != 0:
        lam = lam * (1 + domain.curvature * sum(v * v for v in x)) / 2
    return lam


def reduced_parameters(mmap: MobiusMap, target: SpaceFormModel) -> ReducedFactorParams:
    """Closed-form (c, d, sign) of the curved-target factor for this map."""
    if target.curvature == 0:
        raise MapValidationError("reduced parameters exist for curved targets only")
    sign = target.curvature
    at_b = mat_vec(transpose(mmap.A), mmap.b)
    if mmap.epsilon == 2:
        den = 1 + sign * sum(v * v for v in mmap.b)
        if not den:
            raise MapValidationError("|b| = 1 leaves the hyperbolic-target factor undefined")
        c = mmap.k / den
        d = tuple(ai - sign * c * v for ai, v in zip(mmap.a, at_b))
    else:
        c = sign * 1 / mmap.k
        d = tuple(ai - v / mmap.k for ai, v in zip(mmap.a, at_b))
    return ReducedFactorParams(c=c, d=d, sign=sign)


def closed_form_factor(
    params: ReducedFactorParams, domain: SpaceFormModel, x: tuple[Jet, ...]
) -> Jet:
    """Jet of 2c * w(x) / (sign*c^2 + |x - d|^2) from reduced parameters."""
    shifted = tuple(xi - di for xi, di in zip(x, params.d))
    denom = jets.norm_sq(shifted) + params.sign * params.c * params.c
    if not denom.value():
        raise SingularDivisionError("closed-form factor singular at this point")
    w = spaceform.inv_sigma_jet(domain, x)
    return w.scale(2 * params.c) / denom


def conformality_check(
    domain: SpaceFormModel, target: SpaceFormModel, mmap: MobiusMap, x: Vector
) -> bool:
    """Exact check of phi^* h = lambda^2 g at a point via degree-1 jets.

    With J the Jacobian of the chart expression, the pullback condition reads
    rho(phi(x))^2 J^T J = lambda(x)^2 sigma(x)^2 I, verified cross-multiplied
    so no square roots or divisions appear.
    """
    x_jets = jets.seed(x, 1)
    phi = apply_jet(mmap, x_jets)
    lam = conformal_factor_value(domain, target, mmap, x)
    jac = [p.gradient() for p in phi]  # jac[i][j] = d phi_i / d x_j
    m = mmap.dim
    # rho^2 and sigma^2 as exact quotients: rho = 2/(1 + c|y|^2), sigma likewise.
    y = apply_point(mmap, x)
    rho_num, rho_den = (
        (rational(2), 1 + target.curvature * sum(v * v for v in y))
        if target.curvature
        else (rational(1), rational(1))
    )
    sig_num, sig_den = (
        (rational(2), 1 + domain.curvature * sum(v * v for v in x))
        if domain.curvature
        else (rational(1), rational(1))
    )
    # rho^2 * (J^T J)_{pq} * sig_den^2 == lam^2 * sig_num^2 * rho_den^2 * delta_{pq}
    lhs_scale = rho_num * rho_num * sig_den * sig_den
    rhs_scale = lam * lam * sig_num * sig_num * rho_den * rho_den
    for p in range(m):
        for q in range(m):
            entry = sum(jac[i][p] * jac[i][q] for i in range(m))
            want = rhs_scale if p == q else 0
            if lhs_scale * entry != want:
                return False
    return True
