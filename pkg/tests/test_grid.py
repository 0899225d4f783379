import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bzmild import grid as G
from bzmild.grid import Field, GridSpec, StatePair


@pytest.mark.parametrize("kw", [dict(dim=3, extent=1.0, points=8), dict(dim=1, extent=0.0, points=8),
                                dict(dim=1, extent=1.0, points=7), dict(dim=1, extent=1.0, points=6)])
def test_gridspec_validation(kw):
    with pytest.raises(ValueError):
        GridSpec(**kw)


def test_field_is_read_only(grid1):
    f = G.constant(grid1, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_field_rejects_nan_and_shape(grid1):
    with pytest.raises(FloatingPointError):
        Field(grid1, np.full(grid1.shape, np.nan))
    with pytest.raises(ValueError):
        Field(grid1, np.zeros(3))


def test_statepair_grid_mismatch(grid1, grid2):
    with pytest.raises(ValueError):
        StatePair(G.constant(grid1, 0.0), G.constant(grid2, 0.0))


def test_norms(grid1):
    f = G.single_mode(grid1, 1, 2.0, baseline=0.5)
    assert G.sup_norm(f) == pytest.approx(2.5)
    assert G.min_value(f) == pytest.approx(-1.5)
    assert G.max_value(f) == pytest.approx(2.5)


def test_gradient_of_sine():
    g = GridSpec(1, 2 * np.pi, 256)
    f = G.single_mode(g, 1, 1.0, phase="sin")
    # centred differences: sin(dx)/dx
    assert G.grad_sup_norm(f) == pytest.approx(np.sin(g.spacing) / g.spacing, rel=1e-12)


def test_gradient_2d(grid2):
    f = G.single_mode(grid2, (1, 1), 1.0)
    k = 2 * np.pi / grid2.extent
    expected = np.sqrt(2) * np.sin(k * grid2.spacing) / grid2.spacing
    assert G.grad_sup_norm(f) == pytest.approx(expected, rel=1e-2)


def test_constant_gradient_zero(grid2):
    assert G.grad_sup_norm(G.constant(grid2, 3.0)) == 0.0


def test_gaussian_bump_periodic(grid1):
    f = G.gaussian_bump(grid1, 0.0, 2.0, 1.0)
    assert f.values[0] == 1.0
    assert f.values[1] == pytest.approx(f.values[-1])


def test_make_field_unknown(grid1):
    with pytest.raises(ValueError):
        G.make_field(grid1, "nope")


@settings(max_examples=30, deadline=None)
@given(lo=st.floats(-5, 5), width=st.floats(1e-3, 5), seed=st.integers(0, 2**31), dim=st.sampled_from([1, 2]))
def test_band_limited_range_attained(lo, width, seed, dim):
    g = GridSpec(dim, 10.0, 16)
    f = G.band_limited(g, lo, lo + width, seed)
    assert f.values.min() == pytest.approx(lo, abs=1e-12)
    assert f.values.max() == pytest.approx(lo + width, abs=1e-12 * max(1, abs(lo) + width))
    assert np.all((f.values >= lo) & (f.values <= lo + width))


def test_band_limited_deterministic(grid1):
    a = G.band_limited(grid1, 0, 1, 7).values
    b = G.band_limited(grid1, 0, 1, 7).values
    assert np.array_equal(a, b)


def test_band_limited_batch(grid1, rng):
    arr = G.band_limited_array(grid1, 0.2, 0.8, rng, batch=(5,))
    assert arr.shape == (5, 64)
    assert np.allclose(arr.min(axis=1), 0.2) and np.allclose(arr.max(axis=1), 0.8)
