import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hodgekit import ScalarField, TorusGrid, complex_derivative, multiplier_apply, transform
from hodgekit.spectral import d_dz, d_dzbar, derivative_symbol, laplacian_symbol

from conftest import fd4, observed_order


def test_grid_rejects_bad_sizes():
    for n, N in ((1, 12), (2, 4), (3, 8), (1, 0)):
        with pytest.raises(ValueError):
            TorusGrid(n, N)


def test_sample_count_and_volume():
    g = TorusGrid(2, 8)
    assert g.size == 8 ** 4 == np.prod(g.shape)
    assert g.volume == pytest.approx((2 * np.pi) ** 4)


def test_constant_field_transforms_to_zero_mode(grid1):
    f = ScalarField(grid1, np.ones(grid1.shape, complex))
    c = transform(f, "forward").values
    assert c[0, 0] == pytest.approx(1.0)
    c[0, 0] = 0.0
    assert np.abs(c).max() == 0.0


def test_single_mode_coefficient():
    g = TorusGrid(2, 8)
    f = ScalarField.from_function(g, lambda gr: np.exp(1j * gr.x(0)))
    c = transform(f, "forward").values
    expect = np.zeros(g.shape)
    expect[1, 0, 0, 0] = 1.0
    np.testing.assert_allclose(c, expect, atol=1e-15)


def test_zero_slot_holds_mean(grid1, rng):
    v = grid1.random_values(rng) + 0.3
    assert grid1.fft(v)[0, 0] == pytest.approx(v.mean(), abs=1e-15)


@pytest.mark.parametrize("n,N", [(1, 64), (2, 16)])
def test_round_trip(n, N, rng):
    g = TorusGrid(n, N)
    f = ScalarField(g, g.random_values(rng))
    back = transform(transform(f, "forward"), "inverse")
    assert not back.spectral
    assert np.abs(back.values - f.values).max() / np.abs(f.values).max() <= 1e-13


def test_transform_direction_checks(grid1):
    f = ScalarField(grid1, np.zeros(grid1.shape, complex))
    with pytest.raises(ValueError):
        transform(f, "inverse")
    with pytest.raises(ValueError):
        transform(f, "sideways")


@pytest.mark.parametrize("n,N", [(1, 32), (2, 8)])
def test_parseval(n, N, rng):
    g = TorusGrid(n, N)
    f = ScalarField(g, g.random_values(rng))
    phys, spec = f.norm(), f.to_spectral().norm()
    assert abs(phys - spec) / phys <= 1e-12


def test_dz_of_exp_ix(grid1):
    f = ScalarField.from_function(grid1, lambda g: np.exp(1j * g.x(0)))
    out = complex_derivative(f, 1, "z").values
    np.testing.assert_allclose(out, 0.5j * f.values, atol=1e-14)


def test_dzbar_matches_symbolic_derivative():
    # exp(i z) is not periodic, so the only periodic holomorphic functions are
    # constants; check the symbolic rule on a trig polynomial and the kernel
    import sympy as sp
    x, y = sp.symbols("x y", real=True)
    expr = sp.exp(sp.I * (2 * x + y)) + 3 * sp.exp(-sp.I * (x - 2 * y)) + sp.cos(x) * sp.sin(3 * y)
    dzbar = sp.Rational(1, 2) * (sp.diff(expr, x) + sp.I * sp.diff(expr, y))
    g = TorusGrid(1, 16)
    fn = sp.lambdify((x, y), expr, "numpy")
    dfn = sp.lambdify((x, y), dzbar, "numpy")
    X, Y = np.broadcast_arrays(g.x(0), g.y(0))
    out = d_dzbar(g, fn(X, Y).astype(complex), 0)
    np.testing.assert_allclose(out, dfn(X, Y), atol=1e-13)
    # the kernel of d/dzbar among Fourier modes is only the constants
    sym = g.dzbar_symbols[0]
    assert np.count_nonzero(np.abs(sym) < 1e-15) == 1


def test_dzbar_matches_fourth_order_differences():
    def err(N):
        g = TorusGrid(1, N)
        x, y = g.x(0), g.y(0)
        f = np.broadcast_to(np.exp(1j * (x + 2 * y)) + 0.5 * np.exp(-1j * (2 * x - y)) + np.cos(3 * x) * np.exp(1j * y),
                            g.shape)
        fd = 0.5 * (fd4(f, g.spacing, 0) + 1j * fd4(f, g.spacing, 1))
        sp = d_dzbar(g, f, 0)
        return np.abs(fd - sp).max() / np.abs(sp).max()

    orders = observed_order([err(N) for N in (32, 64, 128)])
    assert np.all(orders >= 3.9), orders


def test_derivative_index_range(grid1):
    with pytest.raises(IndexError):
        derivative_symbol(grid1, 0, "z")
    with pytest.raises(IndexError):
        derivative_symbol(grid1, 2, "zbar")
    with pytest.raises(ValueError):
        derivative_symbol(grid1, 1, "x")


def test_derivatives_commute():
    g = TorusGrid(2, 8)
    for a in range(1, 3):
        for b in range(1, 3):
            lhs = derivative_symbol(g, a, "z") * derivative_symbol(g, b, "zbar")
            rhs = derivative_symbol(g, b, "zbar") * derivative_symbol(g, a, "z")
            assert np.array_equal(lhs, rhs)


def test_dz_dzbar_is_quarter_laplacian(grid1):
    np.testing.assert_allclose(4 * grid1.dz_symbols[0] * grid1.dzbar_symbols[0], laplacian_symbol(grid1),
                               atol=1e-12)


def test_multiplier_identity_and_mean(grid1, rng):
    f = ScalarField(grid1, grid1.random_values(rng) + 1.0)
    np.testing.assert_allclose(multiplier_apply(f, 1.0).values, f.values, atol=1e-14)
    np.testing.assert_allclose(multiplier_apply(f, grid1.zero_mode).values, f.values.mean(), atol=1e-14)


def test_multiplier_keeps_representation(grid1, rng):
    f = ScalarField(grid1, grid1.random_values(rng)).to_spectral()
    out = multiplier_apply(f, grid1.green_symbol)
    assert out.spectral


def test_multiplier_shape_mismatch(grid1):
    f = ScalarField(grid1, np.zeros(grid1.shape, complex))
    with pytest.raises(ValueError):
        multiplier_apply(f, np.ones((3, 3)))


@pytest.mark.parametrize("n,N", [(1, 32), (2, 8)])
def test_green_then_laplacian_is_id_minus_mean(n, N, rng):
    g = TorusGrid(n, N)
    f = ScalarField(g, g.random_values(rng) + 2.0)
    out = multiplier_apply(multiplier_apply(f, g.green_symbol), -0.5 * laplacian_symbol(g)).values
    expect = f.values - f.values.mean()
    assert np.abs(out - expect).max() / np.abs(f.values).max() <= 1e-12


def test_batched_derivatives_match_scalar(grid1, rng):
    v = grid1.random_values(rng, leading=(3,))
    out = d_dz(grid1, v, 0)
    for i in range(3):
        np.testing.assert_allclose(out[i], d_dz(grid1, v[i], 0), atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       seed=st.integers(0, 2 ** 31))
def test_operations_are_complex_linear(a, b, seed):
    g = TorusGrid(1, 16)
    r = np.random.default_rng(seed)
    f, h = (ScalarField(g, g.random_values(r)) for _ in range(2))
    lin = a * f + b * h
    for kind in ("z", "zbar"):
        lhs = complex_derivative(lin, 1, kind).values
        rhs = a * complex_derivative(f, 1, kind).values + b * complex_derivative(h, 1, kind).values
        assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + abs(a) + abs(b))
    lhs = transform(lin, "forward").values
    rhs = a * g.fft(f.values) + b * g.fft(h.values)
    assert np.abs(lhs - rhs).max() <= 1e-13 * (1 + abs(a) + abs(b))


def test_random_values_band_limit(rng):
    g = TorusGrid(1, 32)
    c = g.fft(g.random_values(rng, band=3))
    assert np.abs(c[~g.band_mask(3)]).max() < 1e-15
    with pytest.raises(ValueError):
        g.random_values(rng, band=16)
