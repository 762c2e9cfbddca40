import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kacturing.errors import DimensionError, DomainError
from kacturing.lattice import (
    KernelSpec,
    ModelParams,
    PairConfig,
    convolve_field,
    correlation_field,
    flip_rate,
    hamiltonian,
    inner_product,
    make_discrete_kernel,
    sample_initial,
    update_field_after_flip,
)

from oracles import conv_loop, glauber_rate, hamiltonian_loop

SPECS = [
    KernelSpec(),
    KernelSpec.gaussian(0.1),
    KernelSpec.gaussian(0.3),
    KernelSpec("top-hat", 0.2),
    KernelSpec("raised-cosine", 0.25),
]

spins = st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=40)
spec_strategy = st.one_of(
    st.just(KernelSpec()),
    st.floats(0.02, 0.4).map(KernelSpec.gaussian),
    st.floats(0.05, 0.5).map(lambda w: KernelSpec("top-hat", w)),
    st.floats(0.05, 0.5).map(lambda w: KernelSpec("raised-cosine", w)),
)


def _pair(s1, s2, spec=KernelSpec()):
    n = len(s1)
    kernels = (make_discrete_kernel(spec, n), make_discrete_kernel(spec, n))
    return PairConfig.from_spins(s1, s2, kernels), kernels


# -- kernels -------------------------------------------------------------------

@pytest.mark.parametrize("n", [8, 1])
def test_uniform_weights_are_one(n):
    k = make_discrete_kernel(KernelSpec(), n)
    assert np.array_equal(k.weights, np.ones(n))


def test_gaussian_table_normalized_and_mirrored():
    k = make_discrete_kernel(KernelSpec.gaussian(0.1), 64)
    assert abs(math.fsum(k.weights) / 64 - 1.0) < 1e-15
    assert k.weights[1] == k.weights[63]


@given(spec_strategy, st.integers(1, 300))
def test_normalization_and_symmetry(spec, n):
    k = make_discrete_kernel(spec, n)
    assert abs(math.fsum(k.weights) / n - 1.0) < 1e-14
    d = np.arange(1, n)
    np.testing.assert_array_equal(k.weights[d], k.weights[n - d])
    assert np.all(k.weights >= 0)


@pytest.mark.parametrize("make", [
    lambda: KernelSpec("wrapped-gaussian"),
    lambda: KernelSpec("top-hat", 0.7),
    lambda: KernelSpec("raised-cosine", -0.1),
    lambda: KernelSpec("cone", 0.1),
])
def test_invalid_kernel_specs(make):
    with pytest.raises(DomainError):
        make()


def test_wrapped_gaussian_profile_matches_image_sum():
    # a wide Gaussian needs more than three images to reach the 1e-12 tail
    spec = KernelSpec.gaussian(0.3)
    r = np.linspace(0, 1, 17)
    ref = sum(np.exp(-0.5 * ((r + m) / 0.3) ** 2) for m in range(-40, 41)) / (0.3 * math.sqrt(2 * math.pi))
    np.testing.assert_allclose(spec.profile(r), ref, rtol=1e-14)


@pytest.mark.parametrize("n_sites", [0, -2, 2.5])
def test_model_params_reject_bad_sizes(n_sites):
    with pytest.raises((DomainError, ValueError)):
        ModelParams(1.0, 1.0, 0.5, n_sites)


def test_model_params_reject_negative_lambda():
    with pytest.raises(DomainError):
        ModelParams(1.0, 1.0, -0.1, 4)


# -- fields ----------------------------------------------------------------------

@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.shape)
def test_all_up_field_is_one(spec):
    k = make_discrete_kernel(spec, 50)
    np.testing.assert_allclose(convolve_field(np.ones(50), k), 1.0, atol=1e-14)


def test_alternating_line_uniform_kernel_cancels():
    s = np.tile([1, -1], 6)
    np.testing.assert_allclose(convolve_field(s, make_discrete_kernel(KernelSpec(), 12)), 0.0, atol=1e-15)


def test_top_hat_field_matches_double_loop():
    rng = np.random.default_rng(0)
    s = rng.choice([-1, 1], 6)
    k = make_discrete_kernel(KernelSpec("top-hat", 0.34), 6)
    np.testing.assert_allclose(convolve_field(s, k), conv_loop(s, k.weights), atol=1e-14)


@pytest.mark.parametrize("n", [7, 64, 700, 1024])
def test_fft_and_direct_paths_agree_with_loop(n):
    rng = np.random.default_rng(n)
    s = rng.choice([-1, 1], n)
    k = make_discrete_kernel(KernelSpec.gaussian(0.07), n)
    ref = conv_loop(s, k.weights) if n <= 64 else np.array([np.dot(np.roll(k.weights[::-1], x + 1), s) / n for x in range(n)])
    np.testing.assert_allclose(convolve_field(s, k), ref, atol=1e-13)


def test_field_length_is_checked():
    with pytest.raises(DimensionError):
        convolve_field(np.ones(5), make_discrete_kernel(KernelSpec(), 6))


def test_flip_update_uniform_small_case():
    k = make_discrete_kernel(KernelSpec(), 4)
    s = np.ones(4)
    h = convolve_field(s, k)
    update_field_after_flip(h, k, 0, +1)
    np.testing.assert_allclose(h, 1.0 - 0.5)


@given(spins, spec_strategy, st.data())
def test_flip_update_matches_recompute_and_is_involution(s, spec, data):
    n = len(s)
    k = make_discrete_kernel(spec, n)
    s = np.array(s, dtype=float)
    h0 = convolve_field(s, k)
    x = data.draw(st.integers(0, n - 1))
    h = update_field_after_flip(h0.copy(), k, x, int(s[x]))
    s[x] = -s[x]
    np.testing.assert_allclose(h, convolve_field(s, k), atol=1e-12)
    update_field_after_flip(h, k, x, int(s[x]))
    np.testing.assert_allclose(h, h0, atol=1e-12)


def test_flip_update_gaussian_n32():
    rng = np.random.default_rng(5)
    spec = KernelSpec.gaussian(0.1)
    cfg, kernels = _pair(rng.choice([-1, 1], 32), rng.choice([-1, 1], 32), spec)
    for _ in range(20):
        cfg.flip(1 + int(rng.integers(2)), int(rng.integers(32)), kernels)
    np.testing.assert_allclose(cfg.h1, convolve_field(cfg.s1, kernels[0]), atol=1e-13)
    np.testing.assert_allclose(cfg.h2, convolve_field(cfg.s2, kernels[1]), atol=1e-13)


# -- energy ----------------------------------------------------------------------

def test_hamiltonian_all_up():
    assert hamiltonian(np.ones(10), make_discrete_kernel(KernelSpec.gaussian(0.2), 10)) == pytest.approx(-5.0, abs=1e-13)


@given(spins, spec_strategy)
def test_hamiltonian_is_even(s, spec):
    k = make_discrete_kernel(spec, len(s))
    s = np.array(s)
    assert hamiltonian(s, k) == pytest.approx(hamiltonian(-s, k), abs=1e-12)


def test_hamiltonian_double_sum_n5():
    s = np.array([1, -1, -1, 1, 1])
    k = make_discrete_kernel(KernelSpec("raised-cosine", 0.45), 5)
    assert hamiltonian(s, k) == pytest.approx(hamiltonian_loop(s, k.weights), abs=1e-13)


# -- rates -----------------------------------------------------------------------

def test_zero_field_rate_is_half():
    cfg, _ = _pair([1, -1], [1, 1])
    cfg.h1[:] = 0.0
    p = ModelParams(3.0, 2.0, 0.0, 2)
    assert flip_rate(1, 0, cfg, p) == 0.5


@pytest.mark.parametrize("line,expected_field", [(1, 0.5), (2, -0.5)])
def test_rate_sign_of_coupling(line, expected_field):
    cfg, _ = _pair([1], [1])
    cfg.h1[:] = 0.0
    cfg.h2[:] = 0.0
    p = ModelParams(1.0, 1.0, 0.5, 1)
    want = glauber_rate(1, expected_field, 1.0)
    assert flip_rate(line, 0, cfg, p) == pytest.approx(want, rel=1e-15)
    assert want == pytest.approx(0.2689414 if line == 1 else 0.7310586, abs=1e-7)


@given(st.floats(-800, 800), st.sampled_from([-1, 1]), st.sampled_from([-1, 1]))
def test_rates_finite_in_open_interval_or_saturated(beta_h, a, b):
    cfg, _ = _pair([a], [b])
    cfg.h1[:] = beta_h
    r = flip_rate(1, 0, cfg, ModelParams(1.0, 1.0, 0.0, 1))
    assert 0.0 <= r <= 1.0 and math.isfinite(r)


def test_rate_rejects_bad_line():
    cfg, _ = _pair([1], [1])
    with pytest.raises(ValueError):
        flip_rate(3, 0, cfg, ModelParams(1.0, 1.0, 0.0, 1))


# -- initial data ------------------------------------------------------------------

@pytest.mark.parametrize("value", [1.0, -1.0])
def test_deterministic_profiles(value):
    p = ModelParams(1.0, 1.0, 0.0, 64)
    kernels = (make_discrete_kernel(KernelSpec(), 64),) * 2
    cfg = sample_initial(lambda r: value + 0 * r, lambda r: 0 * r, p, kernels, np.random.default_rng(1))
    assert np.all(cfg.s1 == int(value))


def test_zero_profile_concentrates():
    n = 4096
    p = ModelParams(1.0, 1.0, 0.0, n)
    kernels = (make_discrete_kernel(KernelSpec(), n),) * 2
    hits = 0
    for seed in range(200):
        cfg = sample_initial(lambda r: 0 * r, lambda r: 0 * r, p, kernels, np.random.default_rng(seed))
        hits += abs(cfg.s1.mean()) < 4 / math.sqrt(n)
    # P(|mean| >= 4/sqrt(N)) is about 6e-5 per seed
    assert hits / 200 >= 0.99


def test_profile_out_of_range_rejected():
    p = ModelParams(1.0, 1.0, 0.0, 8)
    kernels = (make_discrete_kernel(KernelSpec(), 8),) * 2
    with pytest.raises(DomainError):
        sample_initial(lambda r: 1.5 + 0 * r, lambda r: 0 * r, p, kernels, np.random.default_rng(0))


def test_spins_must_be_plus_minus_one():
    with pytest.raises(DomainError):
        _pair([1, 0], [1, 1])


# -- pairings ----------------------------------------------------------------------

def test_inner_product_examples():
    assert inner_product(np.ones(9), lambda r: 1 + 0 * r, 9) == 1.0
    assert inner_product(np.tile([1, -1], 4), lambda r: 1 + 0 * r, 8) == 0.0
    rng = np.random.default_rng(2)
    s = rng.choice([-1, 1], 8)
    ref = sum(s[x] * math.cos(2 * math.pi * x / 8) for x in range(8)) / 8
    assert inner_product(s, lambda r: np.cos(2 * np.pi * r), 8) == pytest.approx(ref, abs=1e-14)


def test_correlation_field():
    rng = np.random.default_rng(3)
    s1 = rng.choice([-1, 1], 16)
    s2 = rng.choice([-1, 1], 16)
    assert np.all(correlation_field(_pair(s1, s1)[0]) == 1)
    assert np.all(correlation_field(_pair(s1, -s1)[0]) == -1)
    np.testing.assert_array_equal(correlation_field(_pair(s1, s2)[0]), [a * b for a, b in zip(s1, s2)])
