import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlsw import (
    ParameterError,
    SingularOperatorError,
    autocorrelation_wavelets,
    build_daubechies_filter,
    discrete_wavelets,
    inner_product_operator,
    inverse_operator,
    invert_inner_product,
    mra_decompose,
    nondecimated_transform,
    parse_wavelet,
)
from mvlsw.wavelets import coefficient_energy, pair_index, scaling_vector

R2 = np.sqrt(2.0)
ORDERS = range(1, 11)


# -- filters ---------------------------------------------------------------

@pytest.mark.parametrize("vm", ORDERS)
def test_filter_invariants(vm):
    f = build_daubechies_filter(vm)
    h, g = f.low_pass, f.high_pass
    L = len(h)
    assert L == 2 * vm
    assert abs(h.sum() - R2) < 1e-12
    assert abs(g.sum()) < 1e-12
    for m in range(-(L // 2) + 1, L // 2):
        lo, hi = max(0, -2 * m), min(L, L - 2 * m)
        s = np.dot(h[lo:hi], h[lo + 2 * m:hi + 2 * m])
        assert abs(s - (m == 0)) < 1e-12, (vm, m)
    np.testing.assert_allclose(g, [(-1) ** k * h[L - 1 - k] for k in range(L)], atol=0)


@pytest.mark.parametrize("vm", ORDERS)
def test_vanishing_moments(vm):
    # extremal-phase construction: g annihilates polynomials up to degree vm - 1
    g = build_daubechies_filter(vm).high_pass
    k = np.arange(len(g), dtype=float)
    scale = np.sum(np.abs(g) * k ** (vm - 1))
    for r in range(vm):
        assert abs(np.dot(g, k ** r)) <= 1e-9 * max(scale, 1.0)


def test_haar_filter():
    f = build_daubechies_filter(1)
    np.testing.assert_allclose(f.low_pass, [1 / R2, 1 / R2], atol=1e-15)
    np.testing.assert_allclose(f.high_pass, [1 / R2, -1 / R2], atol=1e-15)


def test_db2_matches_closed_form():
    # extremal-phase D4: (1 + sqrt3, 3 + sqrt3, 3 - sqrt3, 1 - sqrt3) / (4 sqrt2)
    s3 = np.sqrt(3.0)
    want = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * R2)
    np.testing.assert_allclose(build_daubechies_filter(2).low_pass, want, atol=1e-14)


@pytest.mark.parametrize("bad", [0, 11, -1])
def test_filter_order_out_of_range(bad):
    with pytest.raises(ParameterError):
        build_daubechies_filter(bad)


def test_parse_wavelet_labels():
    assert parse_wavelet("haar").vanishing_moments == 1
    assert parse_wavelet("db4").vanishing_moments == 4
    assert parse_wavelet("Daubechies-3").vanishing_moments == 3
    assert parse_wavelet(5).family_label == "db5"
    with pytest.raises(ParameterError):
        parse_wavelet("sym4")


# -- discrete wavelets -------------------------------------------------------

def test_haar_discrete_wavelets():
    w = discrete_wavelets(build_daubechies_filter(1), 2)
    np.testing.assert_allclose(w[1], [1 / R2, -1 / R2], atol=1e-15)
    np.testing.assert_allclose(w[2], [0.5, 0.5, -0.5, -0.5], atol=1e-15)


@pytest.mark.parametrize("vm", [1, 2, 3, 6, 10])
def test_wavelet_norm_and_support(vm):
    f = build_daubechies_filter(vm)
    w = discrete_wavelets(f, 5)
    for j in range(1, 6):
        assert abs(np.linalg.norm(w[j]) - 1) < 1e-10
        assert w.support_lengths[j - 1] == (2 ** j - 1) * (f.length - 1) + 1


def test_levels_validation():
    f = build_daubechies_filter(2)
    for J in (0, -1, 1.5, True):
        with pytest.raises(ParameterError):
            discrete_wavelets(f, J)


# -- transforms ---------------------------------------------------------------

def test_transform_of_zeros_and_constants():
    haar = build_daubechies_filter(1)
    assert not np.any(nondecimated_transform(np.zeros(16), haar, 3))
    c = nondecimated_transform(np.full(16, 2.5), haar, 3)
    assert np.max(np.abs(c[:3])) < 1e-13


def test_haar_impulse_matches_hand_correlation():
    # d_k = sum_t x_t psi_1[t - k] with x the impulse at t0: d_k = psi_1[t0 - k] (mod T)
    T, t0 = 8, 3
    x = np.zeros(T)
    x[t0] = 1.0
    d = nondecimated_transform(x, build_daubechies_filter(1), 1)[0]
    want = np.zeros(T)
    want[t0] = 1 / R2
    want[t0 - 1] = -1 / R2
    np.testing.assert_allclose(d, want, atol=1e-15)


def test_transform_too_many_levels():
    with pytest.raises(ParameterError):
        nondecimated_transform(np.zeros(16), build_daubechies_filter(1), 5)
    # support of the scale-3 D4 wavelet is 22 > 16
    with pytest.raises(ParameterError):
        nondecimated_transform(np.zeros(16), build_daubechies_filter(2), 3)


@pytest.mark.parametrize("vm", [1, 2, 4])
def test_energy_identity(vm):
    x = np.random.default_rng(vm).standard_normal(256)
    c = nondecimated_transform(x, build_daubechies_filter(vm), 4)
    assert abs(coefficient_energy(c) - np.sum(x ** 2)) < 1e-9 * np.sum(x ** 2)


def test_scaling_vector_is_lowpass_cascade():
    f = build_daubechies_filter(2)
    phi = scaling_vector(f, 3)
    assert abs(phi.sum() - 2 ** 1.5) < 1e-12


def test_mra_reconstruction_and_constant():
    f = build_daubechies_filter(2)
    x = np.random.default_rng(3).standard_normal((5, 1024))
    comps = mra_decompose(x, f, 4)
    assert comps.shape == (5, 5, 1024)
    assert np.max(np.abs(comps.sum(axis=-2) - x)) <= 1e-8
    const = mra_decompose(np.full(64, 1.7), f, 3)
    assert np.max(np.abs(const[:3])) < 1e-12
    np.testing.assert_allclose(const[3], 1.7, atol=1e-12)
    assert not np.any(mra_decompose(np.zeros(64), f, 3))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2 ** 31))
def test_mra_reconstruction_property(vm, J, seed):
    f = build_daubechies_filter(vm)
    T = max(2 ** J, (2 ** J - 1) * (f.length - 1) + 1) + 7
    x = np.random.default_rng(seed).standard_normal(T)
    assert np.max(np.abs(mra_decompose(x, f, J).sum(axis=0) - x)) <= 1e-8


# -- autocorrelation wavelets and A ------------------------------------------

def test_haar_autocorrelation_oracles():
    tab = autocorrelation_wavelets(discrete_wavelets(build_daubechies_filter(1), 2))
    assert abs(tab(1, 1, 0) - 1) < 1e-15
    assert abs(tab(1, 1, 1) + 0.5) < 1e-15
    assert abs(tab(1, 1, -1) + 0.5) < 1e-15
    assert tab(1, 1, 2) == 0.0
    assert tab(2, 2, 100) == 0.0


@pytest.mark.parametrize("vm", [1, 2, 5])
def test_autocorrelation_symmetry_and_unit_lag(vm):
    J = 4
    w = discrete_wavelets(build_daubechies_filter(vm), J)
    tab = autocorrelation_wavelets(w)
    for j in range(1, J + 1):
        assert abs(tab(j, j, 0) - 1) < 1e-10
        for jp in range(1, J + 1):
            np.testing.assert_allclose(tab(j, jp, tab.lags), tab(jp, j, -tab.lags), atol=1e-12)
    # brute-force check of one cross-scale entry
    a, b = w[2], w[3]
    for tau in (-5, 0, 3):
        want = sum(a[m] * b[m + tau] for m in range(len(a)) if 0 <= m + tau < len(b))
        assert abs(tab(2, 3, tau) - want) < 1e-12


@pytest.mark.parametrize("vm", [1, 2, 3])
def test_autocorrelation_growth(vm):
    # sum_tau |Psi_jj(tau)| grows no faster than C 2^j
    tab = autocorrelation_wavelets(discrete_wavelets(build_daubechies_filter(vm), 6))
    sums = np.array([np.abs(tab(j, j, tab.lags)).sum() for j in range(1, 7)])
    ratios = sums / 2.0 ** np.arange(1, 7)
    assert ratios.max() <= 2 * ratios[0] + 1


def test_haar_operator_and_inverse():
    tab = autocorrelation_wavelets(discrete_wavelets(build_daubechies_filter(1), 1))
    op = inner_product_operator(tab, 0)
    assert abs(op.entry(1, 1, 1, 1) - 1.5) < 1e-12
    assert abs(invert_inner_product(op)[0, 0] - 2 / 3) < 1e-12


@pytest.mark.parametrize("vm", [1, 2, 4])
def test_operator_symmetries(vm):
    J = 3
    tab = autocorrelation_wavelets(discrete_wavelets(build_daubechies_filter(vm), J))
    A = inner_product_operator(tab, 0)
    np.testing.assert_allclose(A.matrix, A.matrix.T, atol=1e-10)
    for j, jp, l, lp in np.ndindex(J, J, J, J):
        assert abs(A.entry(j + 1, jp + 1, l + 1, lp + 1)
                   - A.entry(j + 1, l + 1, jp + 1, lp + 1)) < 1e-10


def test_operator_with_lag_brute_force():
    J, delta = 2, 3
    tab = autocorrelation_wavelets(discrete_wavelets(build_daubechies_filter(2), J))
    A = inner_product_operator(tab, delta)
    lags = np.arange(-60, 61)
    for j, jp, l, lp in np.ndindex(J, J, J, J):
        want = np.sum(tab(j + 1, jp + 1, lags) * tab(l + 1, lp + 1, lags + delta))
        assert abs(A.matrix[pair_index(j + 1, jp + 1, J), pair_index(l + 1, lp + 1, J)]
                   - want) < 1e-12


def test_inverse_involution_and_cache():
    f = build_daubechies_filter(2)
    op = inner_product_operator(autocorrelation_wavelets(discrete_wavelets(f, 3)), 0)
    inv = invert_inner_product(op)
    np.testing.assert_allclose(invert_inner_product(inv, max_condition=1e12), op.matrix, atol=1e-6)
    assert inverse_operator(f, 3) is inverse_operator(f, 3)


def test_singular_operator_error():
    with pytest.raises(SingularOperatorError) as err:
        invert_inner_product(np.zeros((4, 4)))
    assert err.value.condition_number == np.inf
    with pytest.raises(SingularOperatorError):
        invert_inner_product(np.diag([1.0, 1e-9]), max_condition=1e8)
