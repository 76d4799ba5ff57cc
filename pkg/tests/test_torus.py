"""Trace coordinates, slope recursion, twist flows and their oracles."""

import json
import math

import numpy as np
import pytest

from eqlab import torus
from eqlab.torus import (
    MarkedSurface,
    Slope,
    SurfaceError,
    TangentVector,
    WeightedCurve,
    cosine_pairing,
    dehn_twist_matrix,
    earthquake_vector,
    enumerate_slopes,
    fn_coordinates,
    from_traces,
    gauge_matrices,
    holonomy_of_slope,
    intersection_angles,
    intersection_number,
    length_of_slope,
    length_differential,
    length_pairing,
    marking_to_infinity,
    pinched_surface,
    random_surface,
    remark,
    systole,
    trace_of_slope,
    twist,
)

SQ = from_traces(3.0, 3.0, "lower")


def test_slope_normalization():
    assert Slope(2, 4) == Slope(1, 2)
    assert Slope(-1, 0) == Slope(1, 0)
    assert Slope(3, -6) == Slope(-1, 2)
    with pytest.raises(ValueError):
        Slope(0, 0)


def test_intersection_number_examples():
    assert intersection_number(Slope(0, 1), Slope(1, 0)) == 1
    assert intersection_number(Slope(1, 2), Slope(1, 2)) == 0
    assert intersection_number(Slope(2, 1), Slope(0, 1)) == 2


def test_from_traces_branches():
    assert abs(from_traces(3.0, 3.0, "lower").z - 3.0) < 1e-14
    assert abs(from_traces(3.0, 3.0, "upper").z - 6.0) < 1e-14
    with pytest.raises(SurfaceError):
        from_traces(2.0, 3.0)
    with pytest.raises(SurfaceError):
        from_traces(2.5, 2.5)  # discriminant negative


def test_trace_examples_at_square_point():
    assert abs(trace_of_slope(SQ, Slope(1, 1)) - 3.0) < 1e-14
    assert abs(trace_of_slope(SQ, Slope(-1, 1)) - 6.0) < 1e-14
    assert abs(trace_of_slope(SQ, Slope(2, 1)) - 6.0) < 1e-14
    assert abs(trace_of_slope(SQ, Slope(1, 2)) - 6.0) < 1e-14


def test_lengths_and_weights():
    val = 2.0 * math.acosh(1.5)
    for s in (Slope(0, 1), Slope(1, 0), Slope(1, 1)):
        assert abs(length_of_slope(SQ, s) - val) < 1e-14
    assert abs(length_of_slope(SQ, WeightedCurve(Slope(0, 1), 2.0)) - 2.0 * val) < 1e-14


def test_enumerate_slopes_levels_and_count():
    lvl0 = enumerate_slopes(0)
    assert lvl0 == [Slope(0, 1), Slope(1, 0), Slope(1, 1), Slope(-1, 1)]
    lvl1 = enumerate_slopes(1)
    assert set(lvl1) - set(lvl0) == {Slope(2, 1), Slope(1, 2), Slope(-2, 1), Slope(-1, 2)}
    for depth in range(5):
        assert len(enumerate_slopes(depth)) == 2 ** (depth + 2)
        assert len(set(enumerate_slopes(depth))) == 2 ** (depth + 2)


def test_enumerate_against_farey_oracle():
    # oracle: mediant-close the positive tree by brute force
    def brute(depth):
        tris = [((0, 1), (1, 1)), ((1, 1), (1, 0))]
        found = {(0, 1), (1, 0), (1, 1)}
        for _ in range(depth):
            nxt = []
            for l, r in tris:
                m = (l[0] + r[0], l[1] + r[1])
                found.add(m)
                nxt.extend([(l, m), (m, r)])
            tris = nxt
        return found

    have = {(s.p, s.q) for s in enumerate_slopes(3) if s.p >= 0}
    assert have == brute(3)


def test_fricke_consistency_on_farey_triples():
    rng = np.random.default_rng(2)
    for _ in range(40):
        surf = random_surface(rng)
        slopes = enumerate_slopes(4)
        g1 = slopes[rng.integers(0, len(slopes))]
        # Farey partner: a unimodular mate of g1
        m = marking_to_infinity(g1).inv()
        g2 = m.apply(Slope(0, 1))
        assert intersection_number(g1, g2) == 1
        med = Slope(g1.p + g2.p, g1.q + g2.q)
        dif = Slope(g1.p - g2.p, g1.q - g2.q)
        lhs = trace_of_slope(surf, med) + trace_of_slope(surf, dif)
        rhs = trace_of_slope(surf, g1) * trace_of_slope(surf, g2)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))


def test_holonomy_matches_recursion():
    rng = np.random.default_rng(8)
    for _ in range(10):
        surf = random_surface(rng)
        for s in (Slope(1, 1), Slope(2, 1), Slope(1, 2), Slope(-1, 2), Slope(3, 2)):
            assert abs(holonomy_of_slope(surf, s).tr() - trace_of_slope(surf, s)) < 1e-9


def test_commutator_and_markov_preserved_under_twists():
    rng = np.random.default_rng(4)
    surf = SQ
    slopes = enumerate_slopes(2)
    for _ in range(12):
        short = [s for s in slopes if trace_of_slope(surf, s) < 100.0]
        s = short[rng.integers(0, len(short))]
        surf = twist(surf, s, rng.uniform(-0.8, 0.8))
        scale = max(1.0, surf.x * surf.y * surf.z)
        assert abs(surf.markov_residual()) < 1e-9 * scale
        assert abs(surf.commutator_trace() + 2.0) < 1e-9 * scale
    g = gauge_matrices(surf)
    comm = ((g.mat_a() @ g.mat_b()) @ g.mat_a().inv()) @ g.mat_b().inv()
    assert abs(comm.tr() + 2.0) < 1e-9


def test_mapping_class_equivariance():
    rng = np.random.default_rng(9)
    ms = [dehn_twist_matrix(Slope(1, 0)), dehn_twist_matrix(Slope(0, 1)), marking_to_infinity(Slope(2, 3))]
    for m in ms:
        surf = random_surface(rng)
        moved = remark(surf, m)
        for s in enumerate_slopes(3):
            lhs = trace_of_slope(moved, s)
            rhs = trace_of_slope(surf, m.inv().apply(s))
            assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))


def test_twist_identity_and_self_length():
    assert twist(SQ, Slope(1, 1), 0.0) is SQ
    surf = from_traces(3.4, 4.0, "lower")
    for gamma in (Slope(1, 0), Slope(1, 1), Slope(-1, 2)):
        ell = length_of_slope(surf, gamma)
        for t in np.linspace(0.0, 5.0 * ell, 7):
            drift = abs(length_of_slope(twist(surf, gamma, t), gamma) - ell)
            assert drift < 1e-9 * ell


def test_dehn_twist_equivariance_oracle():
    # displacement l_gamma realizes the slope transvection on traces
    for surf in (SQ, from_traces(3.5, 4.2, "lower"), from_traces(3.2, 3.8, "upper")):
        for gamma in (Slope(1, 0), Slope(0, 1), Slope(1, 1)):
            ell = length_of_slope(surf, gamma)
            moved = twist(surf, gamma, ell)
            tw = dehn_twist_matrix(gamma, 1)
            for s in enumerate_slopes(4):
                lhs = trace_of_slope(moved, s)
                rhs = trace_of_slope(surf, tw.apply(s))
                assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(rhs))


def test_earthquake_vector_backends_and_homogeneity():
    rng = np.random.default_rng(12)
    for _ in range(8):
        surf = random_surface(rng)
        gamma = enumerate_slopes(2)[rng.integers(0, 16)]
        va = earthquake_vector(surf, gamma)
        vf = earthquake_vector(surf, gamma, method="fd")
        assert np.allclose([va.dx, va.dy], [vf.dx, vf.dy], rtol=1e-7, atol=1e-9)
        vw = earthquake_vector(surf, WeightedCurve(gamma, 1.7))
        assert abs(vw.dx - 1.7 * va.dx) < 1e-9 * max(1.0, abs(va.dx))
        assert abs(vw.dy - 1.7 * va.dy) < 1e-9 * max(1.0, abs(va.dy))


def test_self_pairing_vanishes():
    rng = np.random.default_rng(13)
    for _ in range(10):
        surf = random_surface(rng)
        gamma = enumerate_slopes(2)[rng.integers(0, 16)]
        assert abs(length_pairing(surf, gamma, gamma)) < 1e-8


def test_square_point_cross_pairing_frozen():
    # <dl_beta, e_alpha> at the square point for the two marking curves; the
    # value is -cos of the 53.13-degree crossing (verified against central
    # finite differences), not zero: the square point sits half a twist away
    # from the dual-minimizing section
    val = length_pairing(SQ, Slope(0, 1), Slope(1, 0))
    assert abs(val + 0.6) < 1e-12
    fd = _fd_pairing(SQ, Slope(0, 1), Slope(1, 0))
    assert abs(val - fd) < 1e-9


def _fd_pairing(surf, mu, lam, h=1e-4):
    def v(t):
        return length_of_slope(twist(surf, lam, t), mu)

    d1 = (v(h) - v(-h)) / (2 * h)
    d2 = (v(h / 2) - v(-h / 2)) / h
    return (4 * d2 - d1) / 3


def test_reciprocity_antisymmetry():
    rng = np.random.default_rng(14)
    for _ in range(25):
        surf = random_surface(rng)
        s1, s2 = Slope(1, 2), Slope(-1, 1)
        r = length_pairing(surf, s1, s2) + length_pairing(surf, s2, s1)
        assert abs(r) < 1e-6


def test_cosine_pairing_matches_derivative():
    rng = np.random.default_rng(15)
    pairs = [(Slope(1, 0), Slope(0, 1)), (Slope(1, 0), Slope(1, 2)), (Slope(1, 1), Slope(-1, 1)),
             (Slope(0, 1), Slope(2, 1)), (Slope(1, 2), Slope(1, 1))]
    for _ in range(10):
        surf = random_surface(rng)
        for alpha, beta in pairs:
            geo = cosine_pairing(surf, alpha, beta)
            ana = length_pairing(surf, beta, alpha)
            assert abs(geo - ana) <= 1e-6 * max(1.0, abs(ana))
            assert abs(geo) <= intersection_number(alpha, beta)


def test_intersection_angles_counts():
    rng = np.random.default_rng(16)
    surf = random_surface(rng)
    angles = intersection_angles(surf, Slope(1, 0), Slope(1, 2))
    assert len(angles) == 2
    assert all(0.0 < a < math.pi for a in angles)


def test_systole():
    slope, ell = systole(SQ)
    assert slope == Slope(0, 1)  # deterministic tie-break among three minima
    assert abs(ell - 2.0 * math.acosh(1.5)) < 1e-13
    # twisting along alpha leaves l_alpha fixed, so the systole stays bounded
    moved = twist(SQ, Slope(1, 1), 10.0)
    assert systole(moved)[1] <= length_of_slope(moved, Slope(1, 1)) + 1e-12
    pinched = pinched_surface(1e-3)
    s, ell = systole(pinched)
    assert s == Slope(1, 0)
    assert 0.9e-3 <= ell <= 1.1e-3


def test_fn_coordinates():
    ell, tau = fn_coordinates(SQ, Slope(1, 0))
    assert abs(ell - length_of_slope(SQ, Slope(1, 0))) < 1e-14
    # the square point sits half a twist from the dual-minimizing section
    assert abs(tau + ell / 2.0) < 1e-12
    moved = twist(SQ, Slope(1, 0), 0.37)
    ell2, tau2 = fn_coordinates(moved, Slope(1, 0))
    assert abs(ell2 - ell) < 1e-12
    assert abs(tau2 - tau - 0.37) < 1e-8


def test_taylor_remainder():
    fit = torus.taylor_remainder_check(SQ, Slope(1, 0), Slope(0, 1))
    assert 1.9 <= fit["exponent"] <= 2.1
    # doubling the weight doubles the first derivative
    d1 = torus.pair_trace_derivative(SQ, Slope(0, 1), Slope(1, 0))
    s2 = twist(SQ, Slope(1, 0), 2e-6)
    s1 = twist(SQ, Slope(1, 0), 1e-6)
    assert abs((trace_of_slope(s2, Slope(0, 1)) - 3.0) - 2.0 * (trace_of_slope(s1, Slope(0, 1)) - 3.0)) < 1e-9
    with pytest.raises(ValueError):
        torus.taylor_remainder_check(SQ, Slope(1, 0), Slope(1, 0))


def test_log_backend_agrees_with_linear():
    rng = np.random.default_rng(17)
    for _ in range(10):
        surf = random_surface(rng)
        for s in enumerate_slopes(3):
            t, g = torus.trace_gradient(surf, s)
            lt, lg = torus.trace_log_gradient(surf, s)
            assert abs(math.exp(lt) - t) < 1e-9 * t
            assert np.allclose(lg * t, g, rtol=1e-9, atol=1e-12)


def test_enumerate_lengths_vectorized():
    slopes, ells, grads = torus.enumerate_lengths(SQ, 4, grad=True)
    for idx in (0, 1, 2, 3, 7, 20):
        s = slopes[idx]
        assert abs(ells[idx] - length_of_slope(SQ, s)) < 1e-10
        assert np.allclose(grads[idx], length_differential(SQ, s), rtol=1e-9, atol=1e-12)


def test_serialization_roundtrip():
    surf = from_traces(3.7, 4.1, "upper")
    text = surf.to_json()
    data = json.loads(text)
    assert set(data) == {"x", "y", "branch"}
    back = MarkedSurface.from_json(text)
    assert abs(back.x - surf.x) < 1e-15
    assert abs(back.z - surf.z) < 1e-9


def test_twist_trace_cap_guard():
    long_slope = Slope(8, 13)
    with pytest.raises(torus.GaugeError):
        twist(SQ, long_slope, 0.1)
