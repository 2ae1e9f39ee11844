"""Map family validation, conformal factors, and closed-form cross-checks."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyharm import jets
from polyharm.errors import (
    MapValidationError,
    NonpositiveFactorError,
    SingularDivisionError,
)
from polyharm.jets import seed
from polyharm.mobius import (
    ConformalInstance,
    MobiusMap,
    apply_jet,
    apply_point,
    cayley_orthogonal,
    closed_form_factor,
    conformal_factor,
    conformal_factor_value,
    conformality_check,
    euclidean_factor,
    identity_matrix,
    is_orthogonal,
    mat_vec,
    reduced_parameters,
    signed_permutation,
    validate,
)
from polyharm.rationals import rational
from polyharm.spaceform import SpaceFormModel

from conftest import exact_norm_sq, rand_point, rand_rat, rng_for


def _zeros(m):
    return tuple(rational(0) for _ in range(m))


class TestValidate:
    def test_identity_map_valid(self):
        m = MobiusMap.build(a=_zeros(3), b=_zeros(3), k=1, epsilon=2)
        assert validate(m) is m

    def test_scaled_matrix_rejected(self):
        two_i = tuple(tuple(rational(2 if i == j else 0) for j in range(3)) for i in range(3))
        with pytest.raises(MapValidationError):
            MobiusMap.build(a=_zeros(3), b=_zeros(3), k=1, A=two_i, epsilon=2)

    def test_epsilon_one_rejected(self):
        with pytest.raises(MapValidationError):
            MobiusMap.build(a=_zeros(3), b=_zeros(3), k=1, epsilon=1)

    def test_zero_scale_rejected(self):
        with pytest.raises(MapValidationError):
            MobiusMap.build(a=_zeros(3), b=_zeros(3), k=0, epsilon=0)


class TestCayley:
    def test_zero_skew_gives_identity(self):
        S = tuple(tuple(rational(0) for _ in range(3)) for _ in range(3))
        assert cayley_orthogonal(S) == identity_matrix(3)

    def test_two_by_two(self):
        S = ((rational(0), rational(1)), (rational(-1), rational(0)))
        got = cayley_orthogonal(S)
        assert got == ((rational(0), rational(1)), (rational(-1), rational(0)))

    def test_symmetric_input_rejected(self):
        S = ((rational(0), rational(1)), (rational(1), rational(0)))
        with pytest.raises(MapValidationError):
            cayley_orthogonal(S)

    @settings(max_examples=40, deadline=None)
    @given(
        entries=st.lists(
            st.fractions(min_value=-2, max_value=2, max_denominator=4),
            min_size=6,
            max_size=6,
        )
    )
    def test_always_exactly_orthogonal(self, entries):
        m = 4
        rows = [[rational(0)] * m for _ in range(m)]
        it = iter(entries)
        for i in range(m):
            for j in range(i + 1, m):
                v = rational(next(it).numerator, next(it).denominator) if False else next(it)
                vq = rational(v.numerator, v.denominator)
                rows[i][j] = vq
                rows[j][i] = -vq
        A = cayley_orthogonal(tuple(tuple(r) for r in rows))
        assert is_orthogonal(A)

    def test_signed_permutation_orthogonal(self):
        A = signed_permutation([2, 0, 1], [1, -1, 1])
        assert is_orthogonal(A)


class TestApply:
    def test_inversion_point(self):
        m = MobiusMap.inversion(4)
        x = seed((1, 1, 0, 0), 1)
        got = apply_jet(m, x)
        assert tuple(j.value() for j in got) == (
            rational(1, 2),
            rational(1, 2),
            0,
            0,
        )

    def test_affine_value(self):
        rng = rng_for("affine")
        a = rand_point(rng, 3)
        b = rand_point(rng, 3)
        k = rand_rat(rng, 3, 3, nonzero=True)
        m = MobiusMap.build(a=a, b=b, k=k, epsilon=0)
        pt = rand_point(rng, 3)
        got = apply_point(m, pt)
        want = tuple(bi + k * (xi - ai) for bi, xi, ai in zip(b, pt, a))
        assert got == want

    def test_singular_at_center(self):
        m = MobiusMap.inversion(3)
        with pytest.raises(SingularDivisionError):
            apply_point(m, _zeros(3))
        with pytest.raises(SingularDivisionError):
            apply_jet(m, seed((0, 0, 0), 2))


class TestEuclideanFactor:
    def test_inversion_value(self):
        m = MobiusMap.inversion(4)
        x = seed((1, 0, 0, 0), 2)
        assert euclidean_factor(m, x).value() == 1

    def test_affine_constant(self):
        m = MobiusMap.build(a=_zeros(3), b=_zeros(3), k=3, epsilon=0)
        x = seed((1, 2, 3), 2)
        fac = euclidean_factor(m, x)
        assert fac.value() == 3 and all(c == 0 for c in fac.coeffs[1:])

    def test_gradient_of_inverse_square(self):
        m = MobiusMap.inversion(4)
        x = seed((1, 0, 0, 0), 2)
        assert euclidean_factor(m, x).gradient() == (-2, 0, 0, 0)


class TestConformalFactor:
    def test_flat_to_sphere_identity_map(self):
        # the identity into the round chart carries factor 2/(1+|x|^2)
        rng = rng_for("b2ii")
        m = MobiusMap.build(a=_zeros(4), b=_zeros(4), k=1, epsilon=0)
        for _ in range(5):
            pt = rand_point(rng, 4)
            x = seed(pt, 3)
            lam = conformal_factor(SpaceFormModel.flat(4), SpaceFormModel.sphere(4), m, x)
            want = x[0].constant_like(2) / (1 + jets.norm_sq(x))
            assert lam == want

    def test_flat_to_flat_inversive(self):
        rng = rng_for("rr-factor")
        a = rand_point(rng, 4)
        k = rational(3, 2)
        m = MobiusMap.build(a=a, b=rand_point(rng, 4), k=k, epsilon=2)
        pt = tuple(ai + rational(1) for ai in a)
        x = seed(pt, 3)
        lam = conformal_factor(SpaceFormModel.flat(4), SpaceFormModel.flat(4), m, x)
        shifted = tuple(xi - ai for xi, ai in zip(x, a))
        assert lam == x[0].constant_like(k) / jets.norm_sq(shifted)

    def test_sphere_to_flat_inversive(self):
        # sphere domain picks up the reciprocal chart weight (1+|x|^2)/2
        rng = rng_for("sphere-flat")
        a = rand_point(rng, 4)
        k = rational(2, 3)
        m = MobiusMap.build(a=a, b=_zeros(4), k=k, epsilon=2)
        pt = tuple(ai + rational(1, 2) for ai in a)
        x = seed(pt, 3)
        lam = conformal_factor(SpaceFormModel.sphere(4), SpaceFormModel.flat(4), m, x)
        shifted = tuple(xi - ai for xi, ai in zip(x, a))
        want = (1 + jets.norm_sq(x)).scale(k) / jets.norm_sq(shifted).scale(2)
        assert lam == want

    def test_nonpositive_factor_rejected(self):
        m = MobiusMap.build(a=_zeros(4), b=_zeros(4), k=-1, epsilon=2)
        x = seed((1, 0, 0, 0), 2)
        with pytest.raises(NonpositiveFactorError):
            conformal_factor(SpaceFormModel.flat(4), SpaceFormModel.flat(4), m, x)


class TestReducedParameters:
    def test_flat_to_sphere_basic(self):
        m = MobiusMap.build(a=_zeros(4), b=_zeros(4), k=1, epsilon=2)
        params = reduced_parameters(m, SpaceFormModel.sphere(4))
        assert params.c == 1 and params.d == _zeros(4) and params.sign == 1
        # the closed form evaluates to 2/(1+|x|^2): lambda = 1 at a unit point
        assert conformal_factor_value(
            SpaceFormModel.flat(4), SpaceFormModel.sphere(4), m, (1, 0, 0, 0)
        ) == 1

    def test_flat_to_hyperbolic_basic(self):
        rng = rng_for("rh-params")
        a = rand_point(rng, 4)
        m = MobiusMap.build(a=a, b=_zeros(4), k=1, epsilon=2)
        params = reduced_parameters(m, SpaceFormModel.hyperbolic(4))
        assert params.c == 1 and params.d == a and params.sign == -1

    def test_sphere_to_sphere_b_zero(self):
        rng = rng_for("ss-params")
        a = rand_point(rng, 4)
        k = rational(5, 3)
        m = MobiusMap.build(a=a, b=_zeros(4), k=k, epsilon=2)
        params = reduced_parameters(m, SpaceFormModel.sphere(4))
        assert params.c == k and params.d == a

    def test_unit_b_hyperbolic_target_rejected(self):
        b = (rational(1), rational(0), rational(0))
        m = MobiusMap.build(a=_zeros(3), b=b, k=1, epsilon=2)
        with pytest.raises(MapValidationError):
            reduced_parameters(m, SpaceFormModel.hyperbolic(3))

    @pytest.mark.parametrize("domain_c", [-1, 0, 1])
    @pytest.mark.parametrize("target_c", [-1, 1])
    @pytest.mark.parametrize("epsilon", [0, 2])
    def test_closed_form_matches_composed_factor(self, domain_c, target_c, epsilon):
        """The reduced-parameter closed form and the composed factor agree as
        jets at 20 random rational points per combination."""
        from polyharm.verifier import SamplePlan, random_mobius, sample_points

        rng = rng_for(f"dual-route:{domain_c}:{target_c}:{epsilon}")
        domain = SpaceFormModel(4, domain_c)
        target = SpaceFormModel(4, target_c)
        checked = 0
        for attempt in range(12):
            mmap = random_mobius(rng, 4, target, epsilon, style=attempt)
            instance = ConformalInstance(domain=domain, target=target, map=mmap)
            try:
                pts = sample_points(SamplePlan(seed=attempt, count=20), instance)
            except Exception:
                continue
            params = reduced_parameters(mmap, target)
            for pt in pts:
                x = seed(pt, 3)
                assert conformal_factor(domain, target, mmap, x) == closed_form_factor(
                    params, domain, x
                )
            checked += len(pts)
            break
        assert checked == 20


class TestConformality:
    def test_validated_map_is_conformal(self):
        rng = rng_for("conf-check")
        for style in range(3):
            from polyharm.verifier import random_mobius

            target = SpaceFormModel.sphere(4)
            mmap = random_mobius(rng, 4, target, 2, style)
            pt = rand_point(rng, 4)
            if apply_point(mmap, pt):  # off the singular set
                assert conformality_check(SpaceFormModel.flat(4), target, mmap, pt)

    def test_non_orthogonal_matrix_detected(self):
        # smuggle a non-orthogonal A past construction
        bad = tuple(
            tuple(rational(1 if i == j else (1 if (i, j) == (0, 1) else 0)) for j in range(4))
            for i in range(4)
        )
        m = MobiusMap(a=_zeros(4), b=_zeros(4), k=rational(1), A=bad, epsilon=2)
        assert not conformality_check(
            SpaceFormModel.flat(4), SpaceFormModel.flat(4), m, (1, 1, 0, 0)
        )

    def test_inversion_value_in_four_dims(self):
        m = MobiusMap.inversion(4)
        pt = (rational(1), rational(1), rational(0), rational(0))
        assert conformality_check(SpaceFormModel.flat(4), SpaceFormModel.flat(4), m, pt)
        assert conformal_factor_value(
            SpaceFormModel.flat(4), SpaceFormModel.flat(4), m, pt
        ) == rational(1, 2)


class TestRotationInvariance:
    def test_target_rotation_preserves_factor_and_residuals(self):
        # replacing A by QA with b = 0 post-rotates the image; the factor and
        # residual norms are unchanged at the same points
        from polyharm.mobius import mat_mul
        from polyharm.residuals import residual_SDL

        rng = rng_for("rot-target")
        Q = signed_permutation([1, 2, 0, 3], [1, -1, 1, -1])
        a = rand_point(rng, 4)
        k = rational(4, 3)
        base = MobiusMap.build(a=a, b=_zeros(4), k=k, epsilon=2)
        rotated = MobiusMap.build(a=a, b=_zeros(4), k=k, A=mat_mul(Q, base.A), epsilon=2)
        domain, target = SpaceFormModel.flat(4), SpaceFormModel.sphere(4)
        inst1 = ConformalInstance(domain=domain, target=target, map=base)
        inst2 = ConformalInstance(domain=domain, target=target, map=rotated)
        for _ in range(5):
            pt = rand_point(rng, 4)
            try:
                x = seed(pt, 3)
                lam1 = conformal_factor(domain, target, base, x)
            except Exception:
                continue
            assert lam1 == conformal_factor(domain, target, rotated, x)
            r1 = residual_SDL(inst1, pt)
            r2 = residual_SDL(inst2, pt)
            assert exact_norm_sq(r1.values) == exact_norm_sq(r2.values)

    def test_domain_rotation_moves_sample_points(self):
        # with a = 0, replacing A by A Q evaluates the original map at Qx, so
        # residual norms agree at correspondingly rotated points
        from polyharm.mobius import mat_mul
        from polyharm.residuals import residual_SDL

        rng = rng_for("rot-domain")
        Q = signed_permutation([3, 0, 2, 1], [-1, 1, 1, 1])
        b = rand_point(rng, 4, max_num=1, max_den=4)
        k = rational(3, 4)
        base = MobiusMap.build(a=_zeros(4), b=b, k=k, epsilon=2)
        rotated = MobiusMap.build(a=_zeros(4), b=b, k=k, A=mat_mul(base.A, Q), epsilon=2)
        domain, target = SpaceFormModel.flat(4), SpaceFormModel.sphere(4)
        inst1 = ConformalInstance(domain=domain, target=target, map=base)
        inst2 = ConformalInstance(domain=domain, target=target, map=rotated)
        for _ in range(5):
            pt = rand_point(rng, 4)
            if not any(pt):
                continue
            qpt = mat_vec(Q, pt)
            r1 = residual_SDL(inst1, qpt)
            r2 = residual_SDL(inst2, pt)
            assert exact_norm_sq(r1.values) == exact_norm_sq(r2.values)
