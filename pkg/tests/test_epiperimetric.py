import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fblab.epiperimetric import (
    SegregatedTrace,
    build_epi_competitor,
    certified_constants,
    compute_qd,
    delta_d,
    direct_weiss,
    ell_zero,
    epsilon_one,
    fourier_decompose,
    gain_harmonic_check,
    harmonic_extension,
    high_mode_params,
    homogeneous_extension,
    qd_closed_form,
    random_segregated_trace,
    rescaling_identity_check,
    scaling_identity_coefficient_check,
    slicing_decomposition,
    trace_from_modes,
    truncation_competitor,
    weiss_harmonic_extension,
    weiss_homogeneous,
)


def half_trace(*modes, d=2):
    return trace_from_modes(d, "half", modes)


# ---------------------------------------------------------------------------
# fourier_decompose
# ---------------------------------------------------------------------------

def test_decompose_pure_mode():
    theta = np.linspace(0, math.pi, 1024)
    f = math.sqrt(2 / math.pi) * np.sin(theta)
    tr = fourier_decompose(f, setting="half")
    assert_allclose(tr.coeffs[0], 1.0, atol=1e-12)
    assert np.max(np.abs(tr.coeffs[1:])) < 1e-12
    assert tr.tail < 1e-12


def test_decompose_two_modes():
    theta = np.linspace(0, math.pi, 1024)
    f = np.sin(theta) + 0.3 * np.sin(3 * theta)
    tr = fourier_decompose(f, setting="half")
    assert_allclose(tr.coeffs[0], math.sqrt(math.pi / 2), rtol=1e-12)
    assert_allclose(tr.coeffs[2], 0.3 * math.sqrt(math.pi / 2), rtol=1e-12)


def test_decompose_zero():
    tr = fourier_decompose(np.zeros(512), setting="half")
    assert np.all(np.asarray(tr.coeffs) == 0.0)


def test_decompose_endpoint_violation():
    f = np.ones(512)
    with pytest.raises(ValueError):
        fourier_decompose(f, setting="half")


def test_parseval_on_samples():
    rng = np.random.default_rng(0)
    theta = np.linspace(0, math.pi, 2048)
    f = np.sin(theta) ** 2 * (1 + 0.5 * np.cos(3 * theta))
    tr = fourier_decompose(f, setting="half")
    norm_direct = np.trapezoid(f * f, theta)
    assert_allclose(tr.norm2() + tr.tail, norm_direct, atol=1e-10)
    del rng


# ---------------------------------------------------------------------------
# coefficient-space Weiss energies
# ---------------------------------------------------------------------------

def test_weiss_homogeneous_examples():
    assert_allclose(weiss_homogeneous(2, 1.0, half_trace((2, 1.0))), 1.5)
    assert_allclose(weiss_homogeneous(3, 2.0, half_trace((3, 1.0), d=3)), 1.2)
    # eigenmode of matching degree
    assert_allclose(weiss_homogeneous(2, 2.0, half_trace((2, 1.0))), 0.0)


def test_weiss_harmonic_examples():
    assert_allclose(weiss_harmonic_extension(2, 1.0, half_trace((2, 1.0))), 1.0)
    assert_allclose(weiss_harmonic_extension(3, 2.0, half_trace((3, 1.0), d=3)), 1.0)
    assert_allclose(weiss_harmonic_extension(2, 1.5, half_trace((1, 0.7))),
                    0.7**2 * (1 - 1.5))


def test_gain_harmonic_threshold():
    tr = half_trace((2, 1.0))
    lhs, rhs, e1 = gain_harmonic_check(2, 1.0, tr, eps=1.0 / 3.0)
    assert_allclose(lhs, 0.0, atol=1e-14)
    assert_allclose(e1, 1.0 / 3.0)


def test_gain_harmonic_eigenmode():
    tr = half_trace((1, 2.0))
    lhs, _, _ = gain_harmonic_check(2, 1.0, tr, eps=0.2)
    assert_allclose(lhs, 0.0, atol=1e-14)


def test_gain_identity_random_symbolic_d():
    rng = np.random.default_rng(42)
    for _ in range(100):
        d = int(rng.integers(2, 7))
        gamma = float(rng.uniform(1.0, 2.0))
        coeffs = rng.normal(size=16)
        tr = trace_from_modes(d, "half", [(j + 1, c) for j, c in enumerate(coeffs)])
        eps = float(rng.uniform(0.0, epsilon_one(d, gamma)))
        lhs, rhs, _ = gain_harmonic_check(d, gamma, tr, eps)
        assert lhs <= 1e-12 * max(1.0, tr.norm2())
        assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, tr.norm2()))


# ---------------------------------------------------------------------------
# quadrature consistency (dual route)
# ---------------------------------------------------------------------------

def test_weiss_quadrature_consistency_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        gamma = float(rng.uniform(1.0, 2.0))
        modes = [(int(j), float(c)) for j, c in
                 zip(rng.integers(1, 12, size=5), rng.normal(size=5))]
        tr = half_trace(*modes)
        scale = max(1.0, tr.norm2())
        wz = direct_weiss(homogeneous_extension(tr, gamma), gamma)
        wh = direct_weiss(harmonic_extension(tr), gamma)
        assert_allclose(wz, weiss_homogeneous(2, gamma, tr), atol=1e-6 * scale)
        assert_allclose(wh, weiss_harmonic_extension(2, gamma, tr), atol=1e-6 * scale)


def test_slicing_zero_radial_for_homogeneous():
    tr = half_trace((1, 0.5), (3, 0.2))
    ang, rad, tot = slicing_decomposition(homogeneous_extension(tr, 1.3), 1.3)
    assert abs(rad) < 1e-10
    assert_allclose(tot, weiss_homogeneous(2, 1.3, tr), atol=1e-8)


def test_slicing_harmonic_matches_closed_form():
    tr = half_trace((2, 1.0))
    _, _, tot = slicing_decomposition(harmonic_extension(tr), 1.0)
    assert_allclose(tot, weiss_harmonic_extension(2, 1.0, tr), atol=1e-6)


def test_slicing_zero_field():
    tr = half_trace((1, 0.0))
    ang, rad, tot = slicing_decomposition(homogeneous_extension(tr, 1.0), 1.0)
    assert ang == rad == tot == 0.0


# ---------------------------------------------------------------------------
# truncation lemma
# ---------------------------------------------------------------------------

def test_truncation_high_mode():
    tr = half_trace((6, 1.0))
    ell = 6 * 6 - 2 * 2  # gap above the gamma=2 eigenvalue
    field, w_t, eps2, rho, a = truncation_competitor(tr, 2, 2.0, ell)
    w_z = weiss_homogeneous(2, 2.0, tr)
    assert w_t <= (1 - eps2) * w_z
    assert 0 < a <= 0.5 and rho == a**1.5


def test_truncation_rejects_low_mode():
    tr = half_trace((2, 1.0))
    with pytest.raises(ValueError):
        truncation_competitor(tr, 2, 2.0, ell=32.0)


def test_truncation_quadratic_homogeneity():
    tr = half_trace((6, 1.0))
    ell = 32.0
    _, w1, eps2_1, rho1, a1 = truncation_competitor(tr, 2, 2.0, ell)
    _, w2, eps2_2, rho2, a2 = truncation_competitor(tr.scaled(2.0), 2, 2.0, ell)
    assert (eps2_1, rho1, a1) == (eps2_2, rho2, a2)
    assert_allclose(w2, 4 * w1, rtol=1e-9)


# ---------------------------------------------------------------------------
# scaling lemma
# ---------------------------------------------------------------------------

def test_rescaling_identity_homogeneous():
    tr = half_trace((2, 0.8))
    w = homogeneous_extension(tr, 1.0)
    lhs, rhs = rescaling_identity_check(w, tr, 1.0, rho=0.5)
    assert abs(lhs) < 1e-8 and abs(rhs) < 1e-8


def test_rescaling_identity_harmonic():
    tr = half_trace((2, 1.0))
    w = harmonic_extension(tr)
    lhs, rhs = rescaling_identity_check(w, tr, 1.0, rho=0.5)
    assert_allclose(lhs, rhs, atol=1e-6)


def test_rescaling_identity_rho_one():
    tr = half_trace((2, 1.0), (3, 0.4))
    w = harmonic_extension(tr)
    lhs, rhs = rescaling_identity_check(w, tr, 1.0, rho=1.0 - 1e-12)
    assert_allclose(lhs, rhs, atol=1e-6)
    diff = direct_weiss(w, 1.0) - direct_weiss(homogeneous_extension(tr, 1.0), 1.0)
    assert_allclose(lhs, diff, atol=1e-6)


def test_scaling_identity_coefficient_space_random():
    rng = np.random.default_rng(3)
    for _ in range(100):
        d = int(rng.integers(2, 7))
        gamma = float(rng.uniform(1.0, 2.0))
        rho = float(rng.uniform(0.1, 0.9))
        coeffs = rng.normal(size=16)
        tr = trace_from_modes(d, "half", [(j + 1, c) for j, c in enumerate(coeffs)])
        lhs, rhs = scaling_identity_coefficient_check(d, gamma, tr, rho)
        assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, tr.norm2()))


# ---------------------------------------------------------------------------
# q_d and delta_d
# ---------------------------------------------------------------------------

def test_qd_full_budget():
    assert_allclose(compute_qd(2, measure_fraction=1.0), 1.0, atol=1e-9)


def test_qd_zero_budget():
    assert compute_qd(2, measure_fraction=0.0) < 1e-6


def test_qd_two_thirds_matches_closed_form():
    q = compute_qd(2)
    assert_allclose(q * q, qd_closed_form(), atol=1e-4)
    assert_allclose(qd_closed_form(), 0.94234, atol=2e-5)


def test_delta_d_values():
    assert delta_d(0.0, 2) == pytest.approx((-4 + math.sqrt(36)) / 2) == 1.0
    assert delta_d(0.999999, 2) < 1e-4
    q = math.sqrt(qd_closed_form())
    assert_allclose(delta_d(q, 2), 0.0708, atol=1e-3)
    with pytest.raises(ValueError):
        delta_d(1.0, 2)


# ---------------------------------------------------------------------------
# the full competitor
# ---------------------------------------------------------------------------

def test_competitor_trivial_on_eigenmode():
    z = SegregatedTrace((half_trace((2, 1.0)),))
    res = build_epi_competitor(z, gamma=2.0)
    assert res.trivial and res.weiss_w == res.weiss_z == 0.0


def test_competitor_negative_energy_returns_z():
    z = SegregatedTrace((half_trace((1, 1.0)),))  # below gamma=2 homogeneity
    res = build_epi_competitor(z, gamma=2.0)
    assert res.trivial
    assert res.weiss_z < 0
    # (1 - eps) scales a negative energy up, so w = z maintains the bound
    assert res.weiss_w <= (1 - res.eps_certified) * res.weiss_z + 1e-15


def test_competitor_pair_half_gamma2():
    rng = np.random.default_rng(11)
    z = random_segregated_trace(rng, 2, setting="half")
    res = build_epi_competitor(z, gamma=2.0)
    if res.weiss_z > 0:
        assert res.weiss_w <= (1 - res.eps_certified) * res.weiss_z * (1 + 1e-9)
        assert res.achieved_eps >= res.eps_certified * (1 - 1e-9)


def test_competitor_three_components():
    rng = np.random.default_rng(5)
    for _ in range(10):
        z = random_segregated_trace(rng, 3, setting="half")
        res = build_epi_competitor(z, gamma=2.0)
        if not res.trivial:
            assert res.weiss_w <= (1 - res.eps_certified) * res.weiss_z * (1 + 1e-9)


def test_competitor_boundary_agreement():
    rng = np.random.default_rng(13)
    z = random_segregated_trace(rng, 3, setting="half")
    res = build_epi_competitor(z, gamma=2.0)
    if res.trivial:
        return
    theta = np.linspace(0.01, math.pi - 0.01, 200)
    total_w = sum(f.value(np.array([[1.0]]), theta).reshape(-1)
                  for f in res.fields if f is not None)
    total_z = sum(np.asarray(c.value(theta)) for c in z.components)
    # positive/negative parts recombine to f1 - f2 on the sphere; with
    # disjoint nonnegative traces the sums must agree up to truncation tails
    assert np.max(np.abs(total_w - total_z)) < 5e-3


def test_competitor_rejects_three_low_modes():
    # three copies of the lowest mode cannot be segregated, but the counting
    # check must fire regardless of how the traces were produced
    z = SegregatedTrace((half_trace((1, 1.0)), half_trace((1, 1.0)),
                         half_trace((1, 1.0))))
    with pytest.raises(ValueError):
        build_epi_competitor(z, gamma=2.0)


def test_segregation_checker():
    rng = np.random.default_rng(17)
    z = random_segregated_trace(rng, 3, setting="half")
    assert z.check_segregation()


# ---------------------------------------------------------------------------
# certified constants
# ---------------------------------------------------------------------------

def test_certified_constants_positive_and_reproducible():
    c1 = certified_constants(2)
    c2 = certified_constants(2)
    assert c1.eps_bd_certified > 0 and c1.eps_int_certified > 0
    assert c1.eps_bd_certified == c2.eps_bd_certified
    assert c1.eps_bd_certified <= c1.eps_bd_printed
    assert_allclose(c1.q_squared, qd_closed_form(), atol=1e-4)
    assert_allclose(c1.delta, 0.0708, atol=1e-3)
    assert_allclose(c1.ell0, ell_zero(2, c1.q), rtol=0)


def test_high_mode_params_monotone_condition():
    a, rho, eps2 = high_mode_params(2, 2.0, ell=32.0)
    lhs = 2.0**5 * a**1.5 * (2 + 4 * 5 / 32.0)
    assert lhs <= a / 5 * (1 + 1e-9)
    assert eps2 == pytest.approx(a / 5)
