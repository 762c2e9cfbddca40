import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kacturing.errors import ConfigError, DomainError
from kacturing.harness import test_function as basis_function
from kacturing.kmc import closed_form_drift
from kacturing.lattice import KernelSpec, ModelParams, PairConfig, make_discrete_kernel
from kacturing.macro import (
    MacroState,
    MeanFieldState,
    PdeParams,
    convolve,
    eval_macro_observable,
    integrate_ode,
    integrate_pde,
    mean_field_rhs,
    pairings_over_time,
    pde_rhs,
    with_variant,
)

from oracles import conv_loop, mean_field_rhs_mp

GAUSS = KernelSpec.gaussian(0.1)
SPECS = [KernelSpec(), GAUSS, KernelSpec("top-hat", 0.15), KernelSpec("raised-cosine", 0.3)]


def _const(c):
    return lambda r: c + 0 * r


def _zero_state(m=64):
    z = np.zeros(m)
    return MacroState(z, z.copy(), z.copy())


# -- right-hand side ---------------------------------------------------------------

def test_rhs_at_origin():
    params = PdeParams(1.3, 0.6, 0.4, GAUSS, GAUSS)
    du1, du2, dv = pde_rhs(_zero_state(), params)
    assert np.all(du1 == 0) and np.all(du2 == 0)
    np.testing.assert_allclose(dv, math.tanh(1.3 * 0.4) - math.tanh(0.6 * 0.4), atol=1e-15)


def test_origin_is_equilibrium_without_coupling():
    for f in pde_rhs(_zero_state(), PdeParams(2.0, 0.5, 0.0, GAUSS, GAUSS)):
        assert np.all(f == 0)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.shape)
@pytest.mark.parametrize("u1,u2", [(0.3, -0.2), (-0.9, 0.7), (0.0, 0.5)])
def test_homogeneous_rhs_is_mean_field(spec, u1, u2):
    m = 48
    st_ = MacroState(np.full(m, u1), np.full(m, u2), np.full(m, u1 * u2))
    du1, du2, _ = pde_rhs(st_, PdeParams(1.2, 0.9, 0.4, spec, spec))
    r1, r2 = mean_field_rhs(MeanFieldState(u1, u2), 1.2, 0.9, 0.4)
    np.testing.assert_allclose(du1, r1, atol=1e-14)
    np.testing.assert_allclose(du2, r2, atol=1e-14)


@pytest.mark.parametrize("m1,m2,v", [(0.25, -0.5, 0.25), (0.0, 0.0, 0.5), (-0.75, 0.5, -0.25)])
@pytest.mark.parametrize("which", [1, 2, 3])
def test_homogeneous_rhs_equals_microscopic_drift(m1, m2, v, which):
    """With uniform kernels the local fields are exact means, so the drift of
    the pairings with G = 1 must coincide with the limit equations."""
    n = 16
    k1, k2 = round(n * (1 + m1) / 2), round(n * (1 + m2) / 2)
    # choose overlaps so that mean(s1 * s2) = v
    both_up = round(n * (1 + m1 + m2 + v) / 4)
    s1 = np.array([1] * k1 + [-1] * (n - k1))
    s2 = np.array([1] * both_up + [-1] * (k1 - both_up) + [1] * (k2 - both_up) + [-1] * (n - k1 - k2 + both_up))
    assert (s1.mean(), s2.mean(), (s1 * s2).mean()) == (m1, m2, v)
    params = ModelParams(1.1, 0.8, 0.6, n)
    kernels = (make_discrete_kernel(KernelSpec(), n),) * 2
    micro = closed_form_drift(PairConfig.from_spins(s1, s2, kernels), params, kernels, basis_function("1"), which).value
    state = MacroState(np.full(8, m1), np.full(8, m2), np.full(8, v))
    macro = pde_rhs(state, PdeParams(1.1, 0.8, 0.6))[which - 1]
    np.testing.assert_allclose(macro, micro, atol=1e-14)


def test_alternative_variant_differs_only_in_v():
    rng = np.random.default_rng(0)
    m = 32
    st_ = MacroState(rng.uniform(-0.5, 0.5, m), rng.uniform(-0.5, 0.5, m), rng.uniform(-0.3, 0.3, m))
    p = PdeParams(1.0, 1.5, 0.7, GAUSS, KernelSpec("top-hat", 0.2))
    a = pde_rhs(st_, p)
    b = pde_rhs(st_, with_variant(p, "alternative-sign"))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert np.max(np.abs(a[2] - b[2])) > 1e-3


@pytest.mark.parametrize("spec", SPECS[1:], ids=lambda s: s.shape)
def test_convolution_paths(spec):
    rng = np.random.default_rng(1)
    u = rng.uniform(-1, 1, 40)
    w = make_discrete_kernel(spec, 40).weights
    ref = conv_loop(u, w)
    np.testing.assert_allclose(convolve(u, spec, "direct"), ref, atol=1e-14)
    np.testing.assert_allclose(convolve(u, spec, "fft"), ref, atol=1e-14)


def test_param_validation():
    with pytest.raises(ConfigError):
        PdeParams(1, 1, 0.1, v_equation="other")
    with pytest.raises(DomainError):
        PdeParams(1, 1, -0.1)
    with pytest.raises(DomainError):
        MacroState.from_profiles(_const(1.2), _const(0.0), 16)


# -- integration -------------------------------------------------------------------

def test_zero_horizon_returns_initial_state():
    s0 = MacroState.from_profiles(lambda r: 0.4 * np.cos(2 * np.pi * r), _const(0.1), 32)
    traj = integrate_pde(s0, PdeParams(1, 1, 0.5, GAUSS, GAUSS), 0.0, 0.01)
    assert len(traj) == 1
    np.testing.assert_array_equal(traj[0].u1, s0.u1)
    out = integrate_ode(MeanFieldState(0.2, -0.3), 1, 1, 0.5, 0.0, 0.01)
    assert (out[0].m1, out[0].m2) == (0.2, -0.3)


def test_factorization_without_coupling():
    s0 = MacroState.from_profiles(lambda r: 0.6 * np.sin(2 * np.pi * r), lambda r: 0.3 - 0.5 * np.cos(4 * np.pi * r), 64)
    traj = integrate_pde(s0, PdeParams(1.4, 0.8, 0.0, GAUSS, KernelSpec("top-hat", 0.2)), 2.0, 0.01,
                         np.linspace(0, 2, 21))
    assert max(np.max(np.abs(s.v - s.u1 * s.u2)) for s in traj) < 1e-8


def test_correlation_relaxes_to_coupling_value():
    b1, b2, lam = 1.5, 0.5, 0.8
    traj = integrate_pde(_zero_state(16), PdeParams(b1, b2, lam, GAUSS, GAUSS), 2.0, 0.01, np.linspace(0, 2, 11))
    v_inf = (math.tanh(b1 * lam) - math.tanh(b2 * lam)) / 2
    for s in traj:
        assert np.max(np.abs(s.u1)) == 0 and np.max(np.abs(s.u2)) == 0
        np.testing.assert_allclose(s.v, v_inf * (1 - math.exp(-2 * s.time)), atol=1e-9)


def test_dt_bounds():
    with pytest.raises(ConfigError):
        integrate_pde(_zero_state(), PdeParams(1, 1, 0.1), 1.0, 0.2)
    with pytest.raises(ConfigError):
        integrate_ode(MeanFieldState(0, 0), 1, 1, 0.1, 1.0, 0.0)


def test_sample_times_are_hit_exactly():
    ts = [0.0, 0.013, 0.5, 0.77]
    traj = integrate_pde(_zero_state(8), PdeParams(1, 1, 0.3), 0.77, 0.05, ts)
    assert [s.time for s in traj] == ts


@settings(max_examples=25)
@given(
    beta1=st.floats(0.1, 4.0), beta2=st.floats(0.1, 4.0), lam=st.floats(0.0, 3.0),
    a1=st.floats(-1, 1), a2=st.floats(-1, 1), k=st.integers(0, 3),
)
def test_invariant_region_is_preserved(beta1, beta2, lam, a1, a2, k):
    psi1 = lambda r: a1 * np.cos(2 * np.pi * k * r)
    psi2 = lambda r: a2 * np.sin(2 * np.pi * (k + 1) * r)
    traj = integrate_pde(MacroState.from_profiles(psi1, psi2, 32),
                         PdeParams(beta1, beta2, lam, GAUSS, KernelSpec("top-hat", 0.25)), 2.0, 0.02,
                         np.linspace(0, 2, 5))
    assert max(s.sup_norm() for s in traj) <= 1 + 1e-9


# -- mean field --------------------------------------------------------------------

def test_mean_field_origin_equilibrium():
    assert mean_field_rhs(MeanFieldState(0, 0), 1.7, 0.4, 0.9) == (0.0, 0.0)


@pytest.mark.parametrize("m2", [-0.8, 0.0, 0.55])
def test_mean_field_curie_weiss_when_decoupled(m2):
    d1, _ = mean_field_rhs(MeanFieldState(0.3, m2), 1.3, 1.0, 0.0)
    assert d1 == pytest.approx(-0.3 + math.tanh(1.3 * 0.3), abs=1e-16)


def test_mean_field_high_precision_point():
    got = mean_field_rhs(MeanFieldState(0.3, -0.2), 1.2, 0.9, 0.4)
    np.testing.assert_allclose(got, mean_field_rhs_mp(0.3, -0.2, 1.2, 0.9, 0.4), atol=1e-15)


def test_zero_beta_decay():
    ts = np.linspace(0, 3, 7)
    traj = integrate_ode(MeanFieldState(0.8, -0.6), 0.0, 0.0, 0.7, 3.0, 0.01, ts)
    for s in traj:
        assert s.m1 == pytest.approx(0.8 * math.exp(-s.time), abs=1e-10)
        assert s.m2 == pytest.approx(-0.6 * math.exp(-s.time), abs=1e-10)


def test_ode_matches_homogeneous_pde():
    ts = np.linspace(0, 2, 11)
    pde = integrate_pde(MacroState.from_profiles(_const(0.5), _const(-0.3), 16), PdeParams(1.4, 0.7, 0.6), 2.0, 0.01, ts)
    ode = integrate_ode(MeanFieldState(0.5, -0.3), 1.4, 0.7, 0.6, 2.0, 0.01, ts)
    for a, b in zip(pde, ode):
        assert np.max(np.abs(a.u1 - b.m1)) < 1e-8 and np.max(np.abs(a.u2 - b.m2)) < 1e-8


# -- observables ---------------------------------------------------------------------

def test_macro_observables():
    m = 256
    r = np.arange(m) / m
    cos = lambda x: np.cos(2 * np.pi * x)
    st_ = MacroState(np.cos(2 * np.pi * r), np.full(m, 0.25), np.zeros(m))
    assert eval_macro_observable(st_, cos)[0] == pytest.approx(0.5, abs=1e-10)
    assert eval_macro_observable(st_, _const(1.0))[1] == pytest.approx(0.25, abs=1e-15)
    assert eval_macro_observable(st_, _const(0.0)) == (0.0, 0.0, 0.0)
    assert pairings_over_time([st_, st_], cos).shape == (2, 3)
