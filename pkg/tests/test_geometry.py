"""Lens geometry: membership, higher segments, extensions, envelope oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lensrr.geometry import (
    EnvelopeError,
    EnvelopeGrid,
    ParabolicLens,
    PowerEpigraph,
    PowerLens,
    affine_orbit_parabolic,
    affine_orbit_power,
    beta_monotone_extension,
    envelope_peak,
    envelope_polyline,
    epigraph_threshold,
    free_boundary_ratio_roots,
    higher_segments,
    is_alpha_extension,
    is_higher_segment,
    min_extension_a2,
    min_extension_parabolic,
    min_extension_power,
    segment_in_lens,
    segment_in_lens_exact,
)

RNG = np.random.default_rng(20240811)


def brute_segment_in_lens(lens, seg, samples=200001):
    """Dense-sampling oracle for the exact segment criterion."""
    p = np.asarray(seg[0])
    r = np.asarray(seg[1])
    t = np.linspace(0.0, 1.0, samples)[:, None]
    pts = (1 - t) * p + t * r
    return bool(np.all(lens.violation_arrays(pts[:, 0], pts[:, 1]) <= 1e-12))


class TestMembership:
    def test_parabolic_inside(self):
        lens = ParabolicLens(1.0)
        assert lens.contains((0.0, 0.5))
        assert not lens.contains((0.0, 2.0))
        assert lens.contains((0.0, 0.0)) and lens.contains((0.0, 1.0))

    def test_power_inside(self):
        lens = PowerLens(2.0, -1.0)
        assert lens.contains((1.0, 1.5))
        assert not lens.contains((1.0, 0.5))
        assert not lens.contains((-1.0, 1.0))
        assert not lens.contains((0.0, 1.0))

    def test_epigraph_membership(self):
        epi = PowerEpigraph(2.0)
        assert epi.contains((1.0, 1.0)) and epi.contains((1.0, 100.0))
        assert not epi.contains((2.0, 3.9))

    def test_degenerate_power_lens_rejected(self):
        with pytest.raises(ValueError):
            PowerLens(1.0, -1.0)

    def test_violation_sign(self):
        lens = ParabolicLens(1.0)
        assert lens.violation((0.0, 0.5)) <= 0
        assert lens.violation((0.0, 1.5)) > 0
        assert lens.violation((0.0, -0.5)) > 0


class TestSegments:
    def test_boundary_chord_counts_as_inside(self):
        # chord of the free-height: max defect (dx1)^2/4 = 1 = eps^2
        lens = ParabolicLens(1.0)
        assert segment_in_lens(lens, ((-1.0, 1.0), (1.0, 1.0)))
        assert segment_in_lens_exact(lens, ((-1.0, 1.0), (1.0, 1.0)))

    def test_too_wide_chord_is_outside(self):
        lens = ParabolicLens(1.0)
        seg = ((-1.1, 1.21), (1.1, 1.21))
        assert not segment_in_lens(lens, seg)
        assert not segment_in_lens_exact(lens, seg)

    def test_tiny_interior_segment(self):
        lens = ParabolicLens(1.0)
        assert segment_in_lens(lens, ((0.0, 0.5), (1e-9, 0.5)))

    def test_degenerate_segment_rejected(self):
        with pytest.raises(ValueError):
            segment_in_lens(ParabolicLens(1.0), ((0.0, 0.5), (0.0, 0.5)))

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(-2, 2), st.floats(-0.1, 1.1), st.floats(-2, 2), st.floats(-0.1, 1.1)
    )
    def test_exact_matches_brute_parabolic(self, u0, d0, u1, d1):
        lens = ParabolicLens(1.0)
        p = (u0, u0 * u0 + d0)
        r = (u1, u1 * u1 + d1)
        if p == r:
            return
        exact = segment_in_lens_exact(lens, (p, r))
        brute = brute_segment_in_lens(lens, (p, r))
        if exact != brute:
            # disagreements may only occur within sampling resolution of the boundary
            assert segment_in_lens_exact(lens, (p, r), tol=1e-7) or not brute

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(0.2, 3.0),
        st.floats(0.0, 1.0),
        st.floats(0.2, 3.0),
        st.floats(0.0, 1.0),
        st.sampled_from([2.0, 3.0, -1.0, -2.0]),
    )
    def test_exact_matches_brute_power(self, u0, f0, u1, f1, q):
        lens = PowerLens(2.0, q)
        p = (u0, u0**q * 2.0**f0)
        r = (u1, u1**q * 2.0**f1)
        if p == r:
            return
        exact = segment_in_lens_exact(lens, (p, r), tol=1e-12)
        brute = brute_segment_in_lens(lens, (p, r))
        if exact != brute:
            assert segment_in_lens_exact(lens, (p, r), tol=1e-7) or not brute


class TestHigherSegments:
    def test_known_higher_segment(self):
        # horizontal configuration at height (1+alpha)^2 eps^2 / (4 alpha)
        lens = ParabolicLens(1.0)
        x = (math.sqrt(2) / 4, 9 / 8)
        y = (-3 * math.sqrt(2) / 4, 9 / 8)
        assert is_higher_segment(lens, 0.5, x, y)

    def test_not_higher_when_z_off_free(self):
        lens = ParabolicLens(1.0)
        assert not is_higher_segment(lens, 0.5, (0.0, 1.0), (1.0, 1.0))

    def test_not_higher_when_y_off_fixed(self):
        lens = ParabolicLens(1.0)
        assert not is_higher_segment(lens, 0.5, (0.0, 1.0), (1.0, 1.5))

    def test_numeric_segments_are_higher(self):
        for lens in [ParabolicLens(0.7), PowerLens(3.0, -1.0), PowerLens(2.0, 2.0)]:
            alpha = 0.6
            anchors = [0.3, -1.0] if isinstance(lens, ParabolicLens) else [0.5, 2.0]
            segs = higher_segments(lens, alpha, anchors)
            assert len(segs) == 2 * len(anchors)
            for x, y, z in segs:
                assert is_higher_segment(lens, alpha, x, y)
                zz = tuple(alpha * np.asarray(x) + (1 - alpha) * np.asarray(y))
                assert np.allclose(zz, z, rtol=1e-9, atol=1e-12)


class TestClosedForms:
    def test_parabolic_extension_values(self):
        assert min_extension_parabolic(1.0, 0.5) == pytest.approx(
            3 / (2 * math.sqrt(2)), abs=1e-15
        )
        assert min_extension_parabolic(2.0, 0.5) == pytest.approx(
            3 * math.sqrt(2) / 2, abs=1e-14
        )
        # alpha -> 1 limit recovers the lens itself
        assert min_extension_parabolic(1.0, 1 - 1e-12) == pytest.approx(1.0, abs=1e-9)

    def test_parabolic_extension_monotone_and_linear(self):
        alphas = np.linspace(0.05, 0.95, 19)
        vals = [min_extension_parabolic(1.0, a) for a in alphas]
        assert all(v1 > v2 for v1, v2 in zip(vals, vals[1:]))
        for eps in [0.3, 1.7, 4.0]:
            for a in [0.25, 0.7]:
                assert min_extension_parabolic(eps, a) == pytest.approx(
                    eps * min_extension_parabolic(1.0, a), rel=1e-14
                )

    def test_a2_extension_values(self):
        assert min_extension_a2(2.0, 0.5) == pytest.approx(17 / 8, abs=1e-15)
        assert min_extension_a2(3.0, 0.25) == pytest.approx(4.125, abs=1e-14)
        for a in [0.1, 0.5, 0.9]:
            assert min_extension_a2(1.0, a) == pytest.approx(1.0, abs=1e-14)

    def test_power_q_minus1_equals_a2(self):
        for C in [1.5, 2.0, 4.0, 10.0]:
            for a in [0.1, 0.25, 0.5, 0.75, 0.9]:
                got = min_extension_power(C, -1.0, a).constant
                assert got == pytest.approx(min_extension_a2(C, a), abs=1e-10)

    def test_power_q2_value(self):
        # frozen from exact algebra: a = 1 - sqrt(2/3) into the q=2 constant
        a = 1 - math.sqrt(2 / 3)
        expect = (1 - 2 * a * a) ** 2 / (4 * (1 - a) * (a - 2 * a * a))
        assert expect == pytest.approx(2.2928869016623521, abs=1e-14)
        assert min_extension_power(2.0, 2.0, 0.75).constant == pytest.approx(
            expect, abs=1e-12
        )

    def test_power_epigraph_regime(self):
        assert min_extension_power(2.0, 2.0, 0.4).epigraph
        assert min_extension_power(2.0, 2.0, 0.5).epigraph
        assert not min_extension_power(2.0, 2.0, 0.51).epigraph
        with pytest.raises(ValueError):
            min_extension_power(2.0, 2.0, 0.4).constant

    def test_degenerate_C(self):
        assert min_extension_power(1.0, 2.0, 0.3).constant == 1.0
        with pytest.raises(ValueError):
            min_extension_power(2.0, 0.0, 0.5)

    def test_bounded_exceeds_C(self):
        for C in [1.5, 2.0, 4.0]:
            for q in [2.0, 3.0, -1.0, -2.0, 0.5, -0.5]:
                for a in [0.3, 0.6, 0.9]:
                    res = min_extension_power(C, q, a)
                    if not res.epigraph:
                        assert res.constant > C


class TestRatioRoots:
    def test_exact_quadratic_case(self):
        # C=2, q=2, alpha=3/4 reduces to a^2 - 2a + 1/3 = 0
        roots = free_boundary_ratio_roots(2.0, 2.0, 0.75)
        expect = [1 - math.sqrt(2 / 3), 1 + math.sqrt(2 / 3)]
        assert roots == pytest.approx(expect, abs=1e-13)

    def test_threshold_single_root(self):
        # C=2, q=2, alpha=1/2 reduces to a^2 - 2a = 0: single positive root 2
        roots = free_boundary_ratio_roots(2.0, 2.0, 0.5)
        assert len(roots) == 1
        assert roots[0] == pytest.approx(2.0, abs=1e-12)

    def test_residuals_and_dichotomy(self):
        for C in [1.5, 2.0, 4.0]:
            for q in [2.0, 3.0]:
                thr = epigraph_threshold(C, q)
                for alpha, nexp in [
                    (thr, 1),
                    (min(0.999, thr + 0.07), 2),
                    (max(0.001, thr - 0.07), 1),
                ]:
                    roots = free_boundary_ratio_roots(C, q, alpha)
                    assert len(roots) == nexp, (C, q, alpha)
                    for a in roots:
                        lhs = C * (alpha * a + 1 - alpha) ** q
                        rhs = alpha * C * a**q + (1 - alpha)
                        assert abs(lhs - rhs) < 1e-12 * (1 + abs(rhs))
                    if nexp == 2:
                        assert roots[0] < 1 < roots[1]
                    else:
                        assert roots[0] > 1

    def test_always_two_roots_negative_q(self):
        for C in [1.5, 2.0, 4.0]:
            for q in [-1.0, -2.0, -3.0]:
                for alpha in [0.1, 0.5, 0.9]:
                    roots = free_boundary_ratio_roots(C, q, alpha)
                    assert len(roots) == 2
                    assert roots[0] < 1 < roots[1]


class TestConjugation:
    def test_q_half_against_independent_construction(self):
        # frozen from an independent lower-envelope computation at 30 digits
        got = min_extension_power(2.0, 0.5, 0.9).constant
        assert got == pytest.approx(2.12980514693562, abs=1e-11)

    def test_conjugation_bijection_zero_one(self):
        # (u, v) -> (v/C, u) sends the q in (0,1) lens onto exponent 1/q
        C, q = 2.0, 0.5
        qp = 1 / q
        lens = PowerLens(C, q)
        target = PowerLens(C**qp, qp)
        u = np.linspace(0.2, 5.0, 57)
        for curve in [u**q, C * u**q]:
            s, t = curve / C, u
            w = np.log(t) - qp * np.log(s)
            on_fixed = np.abs(w) <= 1e-12
            on_free = np.abs(w - math.log(C**qp)) <= 1e-12
            assert np.all(on_fixed | on_free)
        # interior points stay interior
        mid = np.sqrt(u**q * C * u**q)
        assert np.all(target.contains_arrays(mid / C, u))
        assert np.all(lens.contains_arrays(u, mid))

    def test_conjugation_bijection_negative(self):
        # (u, v) -> (v, u) sends q in (-1, 0) onto exponent 1/q <= -1
        C, q = 3.0, -0.5
        qp = 1 / q
        target = PowerLens(C ** (-qp), qp)
        u = np.linspace(0.2, 5.0, 57)
        for curve, level in [(u**q, 0.0), (C * u**q, math.log(C ** (-qp)))]:
            w = np.log(u) - qp * np.log(curve)
            assert np.max(np.abs(w - level)) <= 1e-12

    def test_roundtrip_matches_direct(self):
        # exponent 1/2 solved through conjugation == direct exponent-2 answer;
        # C kept below 2 so alpha stays above the conjugated threshold 1 - C^-2
        for C in np.linspace(1.2, 2.0, 10):
            for alpha in [0.8, 0.9]:
                via = min_extension_power(C, 0.5, alpha)
                direct = min_extension_power(C**2, 2.0, alpha)
                assert not via.epigraph and not direct.epigraph
                assert via.constant == pytest.approx(
                    math.sqrt(direct.constant), rel=1e-8
                )


class TestAffineOrbits:
    def test_parabolic_known_images(self):
        e2 = 9 / 8
        assert affine_orbit_parabolic((0.0, e2), 1.0) == pytest.approx((1.0, 1.0 + e2))
        assert affine_orbit_parabolic((0.3, 0.7), 0.0) == pytest.approx((0.3, 0.7))

    def test_power_known_images(self):
        assert affine_orbit_power((1.0, 2.0), 2.0, -1.0) == pytest.approx((2.0, 1.0))
        with pytest.raises(ValueError):
            affine_orbit_power((1.0, 2.0), 0.0, -1.0)

    def test_membership_invariance(self):
        lens = ParabolicLens(1.3)
        pts = np.column_stack(
            [RNG.uniform(-3, 3, 1200), RNG.uniform(-1, 12, 1200)]
        )
        ts = RNG.uniform(-2, 2, 1200)
        for (x1, x2), t in zip(pts, ts):
            img = affine_orbit_parabolic((x1, x2), t)
            assert lens.contains((x1, x2)) == lens.contains(img)
        plens = PowerLens(2.5, -2.0)
        pts = np.column_stack(
            [RNG.uniform(0.1, 3, 1200), RNG.uniform(0.05, 30, 1200)]
        )
        ts = RNG.uniform(0.2, 4, 1200)
        for (x1, x2), t in zip(pts, ts):
            img = affine_orbit_power((x1, x2), t, plens.q)
            assert plens.contains((x1, x2)) == plens.contains(img)


class TestEnvelope:
    def test_parabolic_height_at_zero(self):
        poly = envelope_polyline(ParabolicLens(1.0), 0.5)
        i0 = int(np.argmin(np.abs(poly[:, 0])))
        assert poly[i0, 0] == 0.0
        assert poly[i0, 1] == pytest.approx(9 / 8, abs=1e-6)

    def test_alpha_near_one_degenerates(self):
        lens = ParabolicLens(1.0)
        poly = envelope_polyline(lens, 0.999)
        gap = poly[:, 1] - lens.free_ordinate(poly[:, 0])
        assert np.max(np.abs(gap)) < 1e-3

    def test_a2_product_along_envelope(self):
        poly = envelope_polyline(PowerLens(2.0, -1.0), 0.5)
        assert np.max(poly[:, 0] * poly[:, 1]) == pytest.approx(17 / 8, abs=1e-6)

    def test_peak_agrees_with_closed_forms(self):
        for eps in [0.5, 1.0, 2.0]:
            for alpha in [0.25, 0.5, 0.75]:
                got = envelope_peak(ParabolicLens(eps), alpha)
                assert got == pytest.approx(
                    min_extension_parabolic(eps, alpha), abs=1e-6
                )
        for C in [1.5, 2.0, 4.0]:
            for q in [2.0, 3.0, -1.0, -2.0]:
                for alpha in [0.25, 0.5, 0.75]:
                    if q > 1 and alpha <= epigraph_threshold(C, q):
                        continue
                    got = envelope_peak(PowerLens(C, q), alpha)
                    assert got == pytest.approx(
                        min_extension_power(C, q, alpha).constant, abs=1e-6
                    )

    def test_epigraph_regime_raises(self):
        with pytest.raises(EnvelopeError):
            envelope_polyline(PowerLens(2.0, 2.0), 0.4)

    def test_coarse_grid_rejected(self):
        with pytest.raises(ValueError):
            EnvelopeGrid(anchors=4)


class TestAlphaExtension:
    def test_parabolic_extension_decision(self):
        inner = ParabolicLens(1.0)
        assert is_alpha_extension(inner, ParabolicLens(1.0607), 0.5)
        assert not is_alpha_extension(inner, ParabolicLens(1.05), 0.5)

    def test_power_extension_decision(self):
        inner = PowerLens(2.0, -1.0)
        assert is_alpha_extension(inner, PowerLens(2.126, -1.0), 0.5)
        assert not is_alpha_extension(inner, PowerLens(2.12, -1.0), 0.5)
        assert is_alpha_extension(PowerLens(2.0, 2.0), PowerEpigraph(2.0), 0.75)

    def test_minimal_extension_is_extension(self):
        inner = ParabolicLens(1.0)
        outer = ParabolicLens(min_extension_parabolic(1.0, 0.5))
        assert is_alpha_extension(inner, outer, 0.5)

    def test_beta_monotonicity(self):
        inner = ParabolicLens(1.0)
        outer = ParabolicLens(min_extension_parabolic(1.0, 0.5) + 1e-12)
        assert is_alpha_extension(inner, outer, 0.5)
        sweep = beta_monotone_extension(inner, outer, 0.5, [0.6, 0.75, 0.9, 0.99])
        assert all(ok for _, ok in sweep)

    def test_mismatched_fixed_boundary(self):
        with pytest.raises(ValueError):
            is_alpha_extension(ParabolicLens(1.0), PowerLens(2.0, -1.0), 0.5)
        with pytest.raises(ValueError):
            is_alpha_extension(PowerLens(2.0, -1.0), PowerLens(2.5, -2.0), 0.5)
        with pytest.raises(ValueError):
            is_alpha_extension(PowerLens(2.0, 0.5), PowerLens(2.5, 0.5), 0.5)
