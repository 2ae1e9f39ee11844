"""Evaluators for every PDE and identity the classification rests on.

For a conformal map between space forms with factor lambda, curved domain
operators (bars) and domain/target curvatures c1/c2, the toolkit evaluates:

  CL   lapbar(lam) - [lam*Scal_M - lam^3*Scal_N]/(2(m-1))
                   + ((m-4)/(2 lam)) |gradbar lam|^2
       the conformal-factor constraint; identically zero for genuine factors
       and therefore a conservation law of the whole pipeline.

  SDL  lam gradbar lapbar lam - 3 (lapbar lam) gradbar lam
       - ((m-4)/2) gradbar |gradbar lam|^2 + 2 (m-1) c1 lam gradbar lam
       the fourth-order biharmonicity equation in gradient form; zero exactly
       when the conformal map is biharmonic (given CL holds).

  ND   2 gradbar(lam lapbar lam) - 4 (lapbar lam) gradbar lam
       + [2 m c2 lam^2 + (m-2) c1] lam gradbar lam

  ND2  (m-4) gradbar |gradbar lam|^2
       + [4 lapbar lam + (2-3m) c1 lam + 2 m c2 lam^3] gradbar lam
       two necessary conditions derived from SDL and CL.  Because CL vanishes
       identically, the three vector residuals are locked together pointwise:

           ND = SDL,   ND2 = -SDL,   and unconditionally ND - ND2 = 2 SDL,

       the last by the product rule and Ric = (m-1) c1 alone.  These exact
       identities are the pipeline's internal consistency check.

The Ricci term of SDL enters as the scalar (m-1) c1 since space forms have
Ric = (m-1) c g; see :func:`polyharm.spaceform.ricci_scale`.

Flat-target polyharmonicity reduces to iterated flat Laplacians of the map
components; ``polyharmonic_residual`` computes them with one exact reciprocal
jet per point, and ``closed_form_coefficient`` supplies the independent
closed form for the inversive family,

    Delta^k ((x_i - a_i)/|x-a|^2)
        = (-1)^k [2*4...(2k)] [(m-2)(m-4)...(m-2k)] (x_i - a_i)/|x-a|^(2k+2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import jets, mobius, spaceform
from .errors import (
    DegreeError,
    InterpolationError,
    MapValidationError,
    PolyharmError,
)
from .mobius import ConformalInstance, MobiusMap
from .rationals import EXACT, FLOAT, as_float, coerce, rational

DEFAULT_FLOAT_TOL = 1e-9

# Float-noise ceiling for a structurally-zero equation, relative to the fourth
# power of the input-coefficient magnitude (terms are products of at most four
# jet-derived factors).  When the term scale S falls below this floor every
# term vanished identically rather than cancelling, and the relative test
# norm <= tol*S degenerates to 0/0; the floor then decides.
_DEGENERATE_SCALE_EPS = 1e-12


@dataclass(frozen=True)
class ResidualVector:
    """Residual of one equation at one point, with its scale for float mode.

    ``scale`` is the sum of Euclidean norms of the equation's constituent
    terms; raw tolerances would be meaningless across lambda^4-sized terms.
    In exact mode ``exact_zero`` means literally zero.  In float mode it means
    ``norm <= tol * scale``, except when the scale itself sits at the machine
    noise floor (every term structurally zero, e.g. the flat inversive family
    in dimension 4, whose Laplacian term vanishes identically): then the
    verdict compares the norm against that floor instead.
    """

    label: str
    point: tuple
    values: tuple
    exact_zero: bool
    norm: float
    scale: float


def _norm(values) -> float:
    return math.sqrt(sum(as_float(v) ** 2 for v in values))


def _bundle(label, point, term_vectors, mode, tol, ambient=1.0) -> ResidualVector:
    m = len(term_vectors[0])
    values = tuple(sum(t[i] for t in term_vectors) for i in range(m))
    scale = sum(_norm(t) for t in term_vectors)
    nrm = _norm(values)
    if mode == EXACT:
        zero = all(v == 0 for v in values)
    else:
        floor = _DEGENERATE_SCALE_EPS * ambient**4
        zero = nrm <= tol * scale if scale > floor else nrm <= floor
    return ResidualVector(
        label=label, point=tuple(point), values=values, exact_zero=zero, norm=nrm, scale=scale
    )


class ConformalGeometry:
    """Shared jets of one instance at one point (degree 3 throughout)."""

    def __init__(self, instance: ConformalInstance, x, mode: str = EXACT):
        self.instance = instance
        self.mode = mode
        self.point = tuple(coerce(v, mode) for v in x)
        m = instance.dim
        x_jets = jets.seed(self.point, 3, mode)
        dom = instance.domain
        self.lam = mobius.conformal_factor(dom, instance.target, instance.map, x_jets)
        self.lam0 = self.lam.value()
        self.grad_lam = self.lam.gradient()
        w = spaceform.inv_sigma_jet(dom, x_jets)
        self.w0_sq = w.value() * w.value()
        lapbar = spaceform.laplace_beltrami(self.lam, dom, x_jets)
        self.lapbar0 = lapbar.value()
        self.grad_lapbar = lapbar.gradient()
        self.grad_lam_lapbar = (self.lam * lapbar).gradient()
        gnorm = spaceform.grad_norm_sq_bar(self.lam, dom, x_jets)
        self.gnorm0 = gnorm.value()
        self.grad_gnorm = gnorm.gradient()
        self.m = m
        self.c1 = dom.curvature
        self.c2 = instance.target.curvature
        if mode == FLOAT:
            self.ambient = 1.0 + max(abs(c) for c in self.lam.coeffs)
        else:
            self.ambient = 1.0

    def gradbar(self, grads) -> tuple:
        """Curved gradient values: sigma^-2 times flat gradient values."""
        return tuple(self.w0_sq * g for g in grads)

    def harmonic(self) -> bool:
        return all(not g for g in self.grad_lam)


def residual_CL(instance: ConformalInstance, x, mode: str = EXACT, tol: float = DEFAULT_FLOAT_TOL) -> ResidualVector:
    """Conformal-factor constraint; must vanish for genuine factors."""
    g = ConformalGeometry(instance, x, mode)
    return _cl_from_geometry(g, mode, tol)


def _cl_from_geometry(g: ConformalGeometry, mode, tol) -> ResidualVector:
    m = g.m
    scal_m = m * (m - 1) * g.c1
    scal_n = m * (m - 1) * g.c2
    t1 = (g.lapbar0,)
    t2 = (-coerce(rational(1, 2 * (m - 1)), mode) * (g.lam0 * scal_m - g.lam0**3 * scal_n),)
    t3 = (coerce(rational(m - 4, 2), mode) * g.gnorm0 / g.lam0,)
    return _bundle("CL", g.point, [t1, t2, t3], mode, tol, g.ambient)


def residual_SDL(instance: ConformalInstance, x, mode: str = EXACT, tol: float = DEFAULT_FLOAT_TOL) -> ResidualVector:
    """Gradient-form biharmonicity equation; zero iff the map is biharmonic."""
    g = ConformalGeometry(instance, x, mode)
    return _sdl_from_geometry(g, mode, tol)


def _sdl_from_geometry(g: ConformalGeometry, mode, tol) -> ResidualVector:
    m = g.m
    gb_lapbar = g.gradbar(g.grad_lapbar)
    gb_lam = g.gradbar(g.grad_lam)
    gb_gnorm = g.gradbar(g.grad_gnorm)
    half = coerce(rational(m - 4, 2), mode)
    t1 = tuple(g.lam0 * v for v in gb_lapbar)
    t2 = tuple(-3 * g.lapbar0 * v for v in gb_lam)
    t3 = tuple(-half * v for v in gb_gnorm)
    t4 = tuple(2 * (m - 1) * g.c1 * g.lam0 * v for v in gb_lam)
    return _bundle("SDL", g.point, [t1, t2, t3, t4], mode, tol, g.ambient)


def residual_ND(instance: ConformalInstance, x, mode: str = EXACT, tol: float = DEFAULT_FLOAT_TOL) -> ResidualVector:
    """First necessary condition (derivative-of-product form)."""
    g = ConformalGeometry(instance, x, mode)
    return _nd_from_geometry(g, mode, tol)


def _nd_from_geometry(g: ConformalGeometry, mode, tol) -> ResidualVector:
    m = g.m
    gb_ll = g.gradbar(g.grad_lam_lapbar)
    gb_lam = g.gradbar(g.grad_lam)
    t1 = tuple(2 * v for v in gb_ll)
    t2 = tuple(-4 * g.lapbar0 * v for v in gb_lam)
    coef = (2 * m * g.c2 * g.lam0 * g.lam0 + (m - 2) * g.c1) * g.lam0
    t3 = tuple(coef * v for v in gb_lam)
    return _bundle("ND", g.point, [t1, t2, t3], mode, tol, g.ambient)


def residual_ND2(instance: ConformalInstance, x, mode: str = EXACT, tol: float = DEFAULT_FLOAT_TOL) -> ResidualVector:
    """Second necessary condition (gradient-of-energy form)."""
    g = ConformalGeometry(instance, x, mode)
    return _nd2_from_geometry(g, mode, tol)


def _nd2_from_geometry(g: ConformalGeometry, mode, tol) -> ResidualVector:
    m = g.m
    gb_gnorm = g.gradbar(g.grad_gnorm)
    gb_lam = g.gradbar(g.grad_lam)
    t1 = tuple((m - 4) * v for v in gb_gnorm)
    coef = 4 * g.lapbar0 + (2 - 3 * m) * g.c1 * g.lam0 + 2 * m * g.c2 * g.lam0**3
    t2 = tuple(coef * v for v in gb_lam)
    return _bundle("ND2", g.point, [t1, t2], mode, tol, g.ambient)


def harmonicity_flag(instance: ConformalInstance, x, mode: str = EXACT) -> bool:
    """True iff gradbar(lambda) vanishes at x (the map is a homothety there)."""
    g = ConformalGeometry(instance, x, mode)
    return g.harmonic()


def evaluate_residuals(
    instance: ConformalInstance, x, mode: str = EXACT, tol: float = DEFAULT_FLOAT_TOL
) -> dict:
    """All four residuals plus the harmonicity flag, sharing one jet build."""
    g = ConformalGeometry(instance, x, mode)
    return {
        "CL": _cl_from_geometry(g, mode, tol),
        "SDL": _sdl_from_geometry(g, mode, tol),
        "ND": _nd_from_geometry(g, mode, tol),
        "ND2": _nd2_from_geometry(g, mode, tol),
        "harmonic": g.harmonic(),
    }


# -- flat-target polyharmonicity ---------------------------------------------


def closed_form_coefficient(m: int, order: int):
    """Scalar in Delta^k of the inversive components, exact integer.

    (-1)^k * [2*4*...*(2k)] * [(m-2)(m-4)*...*(m-2k)].
    """
    if m < 3 or order < 1:
        raise DegreeError("need m >= 3 and order >= 1")
    coeff = (-1) ** order
    for j in range(1, order + 1):
        coeff *= 2 * j
    for j in range(1, order + 1):
        coeff *= m - 2 * j
    return coeff


def polyharmonic_residual(mmap: MobiusMap, order: int, x, mode: str = EXACT) -> tuple:
    """(Delta^k phi_1, ..., Delta^k phi_m) at x for a flat-to-flat map."""
    return polyharmonic_orders(mmap, (order,), x, mode)[order]


def polyharmonic_orders(
    mmap: MobiusMap, orders: Sequence[int], x, mode: str = EXACT
) -> dict[int, tuple]:
    """Iterated Laplacians of the map components at several orders at once.

    All orders share one truncation degree 2*max(orders) and, for eps = 2,
    one exact reciprocal of |x-a|^2, the dominant cost at deep degrees.
    """
    orders = sorted(set(int(k) for k in orders))
    if orders and orders[0] < 0:
        raise DegreeError("orders must be >= 0")
    top = 2 * max(orders) if orders else 0
    m = mmap.dim
    x_jets = jets.seed(x, top, mode)
    u = tuple(xi - ai for xi, ai in zip(x_jets, mmap.a))
    components = []
    for i in range(m):
        acc = None
        for j in range(m):
            if mmap.A[i][j]:
                term = u[j].scale(mmap.k * mmap.A[i][j])
                acc = term if acc is None else acc + term
        components.append(acc if acc is not None else x_jets[0].zero_like())
    out: dict[int, tuple] = {}
    if mmap.epsilon == 0:
        for k in orders:
            if k == 0:
                out[k] = tuple(c.value() + bi for c, bi in zip(components, mmap.b))
            else:
                out[k] = tuple(jets.iterated_laplacian(c, k) for c in components)
        return out
    f = jets.norm_sq(u)
    recip = x_jets[0].constant_like(1) / f
    for k in orders:
        if k == 0:
            out[k] = tuple(
                c.value() * recip.value() + bi for c, bi in zip(components, mmap.b)
            )
        else:
            out[k] = tuple(
                jets.iterated_laplacian_product(c, recip, k) for c in components
            )
    return out


def polyharmonic_closed_form(mmap: MobiusMap, order: int, x) -> tuple:
    """Closed-form Delta^k phi for the eps = 2 family (exact scalars)."""
    if mmap.epsilon != 2:
        raise MapValidationError("closed form applies to the eps = 2 family")
    u = tuple(rational(xi) - ai for xi, ai in zip(x, mmap.a))
    f = sum(v * v for v in u)
    coeff = closed_form_coefficient(mmap.dim, order)
    au = mobius.mat_vec(mmap.A, u)
    return tuple(coeff * mmap.k * v / f ** (order + 1) for v in au)


# -- radial coefficient extraction --------------------------------------------


def radial_coefficients(
    evaluator: Callable[[tuple], object],
    direction: Sequence,
    max_degree: int,
    ts: Sequence | None = None,
    extra: int = 1,
) -> list:
    """Exact coefficients of a radial polynomial along a ray.

    ``evaluator`` receives the point t * direction and must return an exact
    rational that is a polynomial in s = t^2 of degree <= max_degree (the
    caller has already cleared the known denominators).  Samples that raise
    toolkit errors (singular set hits) are skipped.  ``extra`` additional
    samples must agree with the interpolant, which catches an underestimated
    degree.  Returns monomial coefficients in s, constant first.
    """
    direction = tuple(rational(v) for v in direction)
    if sum(v * v for v in direction) != 1:
        raise InterpolationError("direction must have exact unit length")
    if ts is None:
        ts = [Fraction(j, j + 1) for j in range(1, 4 * (max_degree + extra) + 2)]
    samples: list[tuple] = []
    needed = max_degree + 1 + extra
    for t in ts:
        tq = rational(t.numerator, t.denominator) if isinstance(t, Fraction) else rational(t)
        point = tuple(tq * v for v in direction)
        try:
            val = evaluator(point)
        except PolyharmError:
            continue
        samples.append((tq * tq, val))
        if len(samples) == needed:
            break
    if len(samples) < needed:
        raise InterpolationError(
            f"only {len(samples)} usable samples for degree {max_degree} + {extra} checks"
        )
    nodes = samples[: max_degree + 1]
    coeffs = _newton_to_monomial(nodes)
    for sv, val in samples[max_degree + 1 :]:
        acc = rational(0)
        power = rational(1)
        for cfr in coeffs:
            acc += cfr * power
            power *= sv
        if acc != val:
            raise InterpolationError(
                "extra sample inconsistent with the interpolant: degree underestimated"
            )
    return coeffs


def _newton_to_monomial(nodes: list[tuple]) -> list:
    """Exact interpolation through the nodes via Newton divided differences."""
    xs = [p for p, _ in nodes]
    divided = [v for _, v in nodes]
    n = len(nodes)
    for level in range(1, n):
        for i in range(n - 1, level - 1, -1):
            divided[i] = (divided[i] - divided[i - 1]) / (xs[i] - xs[i - level])
    # Horner expansion of the Newton form into ascending monomial coefficients
    coeffs = [divided[n - 1]]
    for i in range(n - 2, -1, -1):
        xi = xs[i]
        new = [rational(0)] * (len(coeffs) + 1)
        for j, cj in enumerate(coeffs):
            new[j] = new[j] - xi * cj
            new[j + 1] = new[j + 1] + cj
        new[0] = new[0] + divided[i]
        coeffs = new
    return coeffs
