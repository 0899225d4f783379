import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from bzmild import grid as G
from bzmild.grid import GridSpec
from bzmild.semigroup import (KERNEL, SPECTRAL, PropagatorConfig, damped, evolve, heat, heat_array,
                              lattice_kernel, skewed_heat)

MODES = [SPECTRAL, KERNEL]


def ring_laplacian(n):
    a = -2 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    a[0, -1] = a[-1, 0] = 1
    return a


@pytest.mark.parametrize("n,s", [(8, 0.3), (16, 2.5), (10, 40.0)])
def test_lattice_kernel_matches_matrix_exponential(n, s):
    offsets, weights = lattice_kernel(n, s)
    row = expm(s * ring_laplacian(n))[0]
    got = np.zeros(n)
    np.add.at(got, offsets % n, weights)
    assert np.max(np.abs(got - row)) < 1e-14
    assert np.all(weights > 0)
    assert weights.sum() == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("mode", MODES)
def test_constant_fixed(mode, grid2):
    f = G.constant(grid2, 0.7)
    assert np.allclose(heat(f, 3.0, 1.0, mode).values, 0.7, atol=1e-15, rtol=0)


def test_zero_time_identity(grid1, rng):
    f = G.random_uniform(grid1, -1, 1, rng)
    for mode in MODES:
        assert np.array_equal(heat(f, 0.0, 1.0, mode).values, f.values)


def test_negative_time(grid1):
    with pytest.raises(ValueError):
        heat(G.constant(grid1, 1.0), -1.0)


def test_single_mode_spectral(grid1):
    f = G.single_mode(grid1, 1, 1.0)
    t = 5.0
    k = 2 * np.pi / grid1.extent
    assert np.allclose(heat(f, t, 1.0, SPECTRAL).values, math.exp(-k * k * t) * f.values, atol=1e-14)


def test_single_mode_kernel_near_continuum():
    g = GridSpec(1, 100.0, 256)
    f = G.single_mode(g, 1, 1.0)
    k = 2 * np.pi / g.extent
    out = heat(f, 5.0, 1.0, KERNEL).values
    assert np.max(np.abs(out - math.exp(-k * k * 5.0) * f.values)) < 1e-5


def test_damped_constant(grid1, p):
    f = G.constant(grid1, 2.0)
    for mode in MODES:
        assert np.allclose(damped(f, 0.7, p, mode).values, 2.0 * math.exp(-0.7), rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(1e-4, 50.0), d=st.floats(0.1, 2.0), dim=st.sampled_from([1, 2]))
def test_kernel_maximum_principle(seed, t, d, dim):
    g = GridSpec(dim, 20.0, 16)
    f = G.random_uniform(g, -1.0, 3.0, seed)
    out = heat(f, t, d, KERNEL).values
    assert out.max() <= f.values.max()
    assert out.min() >= f.values.min()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.floats(1e-3, 5.0), t=st.floats(1e-3, 5.0))
def test_spectral_semigroup_law_and_mean(seed, s, t):
    g = GridSpec(1, 50.0, 64)
    f = G.random_uniform(g, -1.0, 1.0, seed)
    two = heat(heat(f, s, 1.0, SPECTRAL), t, 1.0, SPECTRAL).values
    one = heat(f, s + t, 1.0, SPECTRAL).values
    assert np.max(np.abs(two - one)) <= 1e-12
    assert abs(one.mean() - f.values.mean()) <= 1e-12


def test_kernel_semigroup_law(grid1, rng):
    f = G.random_uniform(grid1, -1.0, 1.0, rng)
    two = heat(heat(f, 0.4, 1.0, KERNEL), 0.9, 1.0, KERNEL).values
    assert np.max(np.abs(two - heat(f, 1.3, 1.0, KERNEL).values)) <= 1e-12


def test_gaussian_half_steps_spectral(grid1):
    f = G.gaussian_bump(grid1, 50.0, 3.0, 1.0)
    a = heat(heat(f, 0.5, 1.0, SPECTRAL), 0.5, 1.0, SPECTRAL).values
    assert np.max(np.abs(a - heat(f, 1.0, 1.0, SPECTRAL).values)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(0.0, 20.0))
def test_damped_decay(seed, t):
    from bzmild.model import preset_params
    p = preset_params(1.0)
    g = GridSpec(1, 30.0, 32)
    f = G.random_uniform(g, -2.0, 2.0, seed)
    for mode in MODES:
        assert G.sup_norm(damped(f, t, p, mode)) <= math.exp(-t) * G.sup_norm(f) + 1e-12


def test_evolve_zero_eta_is_heat(grid1, rng):
    f = G.random_uniform(grid1, -1, 1, rng)
    out = evolve(f, lambda t: 0.0, 0.0, 0.37, PropagatorConfig(KERNEL, substeps_per_unit=100))
    assert np.max(np.abs(out.values - heat(f, 0.37).values)) <= 1e-12


def test_evolve_constant_eta(grid1):
    f = G.constant(grid1, 1.0)
    out = evolve(f, lambda t: 2.5, 0.1, 0.5, PropagatorConfig(KERNEL, substeps_per_unit=10))
    assert np.allclose(out.values, math.exp(-2.5 * 0.4), rtol=1e-14)


def test_evolve_backwards(grid1):
    with pytest.raises(ValueError):
        evolve(G.constant(grid1, 1.0), lambda t: 0.0, 1.0, 0.5)


def test_evolve_second_order(grid1, rng):
    f = G.band_limited(grid1, -1, 1, rng)
    x = grid1.coords()[0]

    def eta(t):
        return 3.0 * np.sin(2 * np.pi * x / grid1.extent + 4 * t)

    runs = [evolve(f, eta, 0.0, 0.2, PropagatorConfig(KERNEL, substeps_per_unit=n)).values for n in (50, 100, 3200)]
    ratio = np.abs(runs[0] - runs[2]).max() / np.abs(runs[1] - runs[2]).max()
    assert 3.5 < ratio < 4.5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.1, 500.0))
def test_evolve_four_thirds_bound(seed, a):
    g = GridSpec(1, 20.0, 32)
    r = np.random.default_rng(seed)
    f = G.random_uniform(g, -1, 1, r)
    pattern = r.uniform(-a, a, g.shape)
    t = 1 / (4 * a)
    out = evolve(f, lambda s: pattern * math.cos(7 * s), 0.0, t, PropagatorConfig(substeps_per_unit=int(64 / t) + 1))
    assert G.sup_norm(out) <= 4 / 3 * G.sup_norm(f)


def test_batch_matches_loop(grid1, rng):
    batch = rng.uniform(size=(3, 64))
    for mode in MODES:
        out = heat_array(batch, 0.8, 0.6, grid1, mode)
        for i in range(3):
            assert np.array_equal(out[i], heat_array(batch[i], 0.8, 0.6, grid1, mode))


def test_skew_hook_restores(grid1):
    f = G.constant(grid1, 1.0)
    with skewed_heat(1.01):
        assert heat(f, 1.0).values[0] == pytest.approx(1.01)
    assert heat(f, 1.0).values[0] == 1.0


def test_spectral_gibbs_tolerance():
    cfg = PropagatorConfig(SPECTRAL)
    assert cfg.tolerance(2.0) == pytest.approx(2e-9)
    assert PropagatorConfig(KERNEL).tolerance(2.0) == 0.0
