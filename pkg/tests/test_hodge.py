import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hodgekit import (BeltramiField, FormField, TorusGrid, basis_form, contract, d, dbar, dbar_adjoint, del_,
                      del_adjoint, green, harmonic_projection, laplacian_dbar, laplacian_del, norms, scalar_form,
                      t_operator)
from hodgekit.forms import FormSum

G1 = TorusGrid(1, 16)
G2 = TorusGrid(2, 8)
BIDEGREES = [(G, p, q) for G in (G1, G2) for p in range(G.n + 1) for q in range(G.n + 1)]


def _rel(x, ref):
    return x.norm() / ref.norm()


def test_del_of_top_form_vanishes(rng):
    out = del_(FormField.random(G2, 2, 1, rng))
    assert out.is_empty and out.norm() == 0.0


def test_dbar_of_f_dz():
    f = np.broadcast_to(np.exp(1j * G1.x(0)), G1.shape)
    out = dbar(FormField.from_components(G1, 1, 0, {((0,), ()): f}))
    # dbar(f dz) = f_zbar dzbar ^ dz = -f_zbar dz ^ dzbar with f_zbar = (i/2) f
    np.testing.assert_allclose(out.component((0,), (0,)), -0.5j * f, atol=1e-15)


def test_d_of_exact_form_vanishes(rng):
    u = scalar_form(G2, G2.random_values(rng))
    du = d(u)
    assert isinstance(du, FormSum)
    assert d(du).norm() <= 1e-12 * du.norm()


def test_dbar_adjoint_of_holomorphic_degree_form_is_zero(rng):
    out = dbar_adjoint(FormField.random(G2, 1, 0, rng))
    assert out.is_empty and out.norm() == 0.0


def test_dbar_adjoint_explicit_multiplier():
    f = np.broadcast_to(np.exp(1j * G1.y(0)), G1.shape)
    out = dbar_adjoint(FormField.from_components(G1, 0, 1, {((), (0,)): f}))
    # -2 d/dz (e^{iy}) = -2 * (1/2)(d_x - i d_y) e^{iy} = -e^{iy}
    np.testing.assert_allclose(out.data[0], -f, atol=1e-14)


@pytest.mark.parametrize("G,p,q", BIDEGREES)
def test_adjointness(G, p, q):
    r = np.random.default_rng(7 + 10 * p + q)
    worst = 0.0
    for _ in range(10):
        a = FormField.random(G, p, q, r)
        if q < G.n:
            b = FormField.random(G, p, q + 1, r)
            worst = max(worst, abs(dbar(a).inner(b) - a.inner(dbar_adjoint(b))) / (dbar(a).norm() * b.norm()))
        if p < G.n:
            b = FormField.random(G, p + 1, q, r)
            worst = max(worst, abs(del_(a).inner(b) - a.inner(del_adjoint(b))) / (del_(a).norm() * b.norm()))
    assert worst <= 1e-12


@pytest.mark.parametrize("G,p,q", BIDEGREES)
def test_d_squared(G, p, q, rng):
    s = FormField.random(G, p, q, rng)
    ns = s.norm()
    assert dbar(dbar(s)).norm() <= 1e-13 * ns
    assert del_(del_(s)).norm() <= 1e-13 * ns
    assert (del_(dbar(s)) + dbar(del_(s))).norm() <= 1e-13 * ns


@pytest.mark.parametrize("G,p,q", BIDEGREES)
def test_green_relations(G, p, q, rng):
    s = FormField.random(G, p, q, rng)
    s = s + FormField.constant(G, p, q, np.ones(len(s.keys)))
    h = harmonic_projection(s)
    assert _rel(laplacian_dbar(green(s)) - (s - h), s) <= 1e-12
    assert _rel(green(laplacian_dbar(s)) - (s - h), s) <= 1e-12
    assert _rel(dbar(green(s)) - green(dbar(s)), s) <= 1e-12
    assert _rel(dbar_adjoint(green(s)) - green(dbar_adjoint(s)), s) <= 1e-12
    assert harmonic_projection(green(s)).norm() <= 1e-12 * s.norm()
    assert green(h).norm() <= 1e-12 * s.norm()
    for x in (dbar(h), harmonic_projection(dbar(s)), dbar_adjoint(h), harmonic_projection(dbar_adjoint(s))):
        assert x.norm() <= 1e-12 * s.norm()


def test_harmonic_and_green_on_constants():
    c = FormField.constant(G2, 1, 1, [1.0, 2.0j, -1.0, 0.5])
    assert np.array_equal(harmonic_projection(c).data, c.data)
    assert green(c).norm() == 0.0


@pytest.mark.parametrize("G,p,q", BIDEGREES)
def test_box_is_half_negative_laplacian(G, p, q, rng):
    s = FormField.random(G, p, q, rng)
    lap = G.ifft(G.fft(s.data) * (-G.k2))
    np.testing.assert_allclose(laplacian_dbar(s).data, -0.5 * lap, atol=1e-12 * np.abs(lap).max())


@pytest.mark.parametrize("G,p,q", BIDEGREES)
def test_kahler_identity(G, p, q, rng):
    s = FormField.random(G, p, q, rng)
    assert _rel(laplacian_dbar(s) - laplacian_del(s), s) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.integers(0, 2), q=st.integers(0, 2))
def test_green_self_adjoint_nonnegative(seed, p, q):
    r = np.random.default_rng(seed)
    a, b = FormField.random(G2, p, q, r), FormField.random(G2, p, q, r)
    assert abs(green(a).inner(b) - a.inner(green(b))) <= 1e-12 * a.norm() * b.norm()
    val = green(a).inner(a)
    assert abs(val.imag) <= 1e-12 * a.norm() ** 2 and val.real >= 0.0


def test_t_operator_bidegree_and_top_form(rng):
    out = t_operator(FormField.random(G2, 1, 1, rng))
    assert out.bidegree == (2, 0)
    top = t_operator(FormField.random(G2, 2, 0, rng))
    assert top.is_empty and top.norm() == 0.0


def test_t_operator_is_composition(rng):
    s = FormField.random(G2, 1, 2, rng)
    ref = dbar_adjoint(green(del_(s)))
    assert (t_operator(s) - ref).norm() <= 1e-13 * s.norm()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.integers(0, 2), q=st.integers(0, 2), dim=st.sampled_from([1, 2]))
def test_quasi_isometry_and_energy(seed, p, q, dim):
    G = G1 if dim == 1 else G2
    if p > G.n or q > G.n:
        return
    r = np.random.default_rng(seed)
    g = FormField.random(G, p, q, r) + FormField.constant(G, p, q, r.standard_normal(len(FormField.zeros(G, p, q).keys)))
    ng = g.norm()
    tg = t_operator(g)
    assert tg.norm() <= ng * (1 + 1e-12)
    if not tg.is_empty:
        da = del_adjoint(g)
        energy = ng ** 2 - harmonic_projection(g).norm() ** 2 - da.inner(green(da)).real - dbar(green(del_(g))).norm() ** 2
        assert abs(tg.norm() ** 2 - energy) <= 1e-10 * ng ** 2


@pytest.mark.parametrize("G", [G1, G2])
def test_neumann_ratio_bounded_by_sup_norm(G, rng):
    n = G.n
    phi = BeltramiField.random(G, rng, 0.9, band=G.N // 4)
    sup = phi.sup_norm()
    x = FormField.random(G, n, 0, rng)
    ratios = []
    for _ in range(30):
        nxt = -t_operator(contract(phi, x))
        ratios.append(nxt.norm() / x.norm())
        x = nxt
    assert max(ratios) <= sup + 1e-6


def test_norm_conventions():
    for G in (G1, G2):
        assert FormField.zeros(G, 1, 1).norm() == 0.0
        dz = basis_form(G, (0,), ())
        assert dz.norm() ** 2 == pytest.approx(2 * (2 * np.pi) ** (2 * G.n), rel=1e-14)
        l2, sup = norms(dz)
        assert sup == pytest.approx(np.sqrt(2.0))


@pytest.mark.parametrize("G,p,q", BIDEGREES)
def test_parseval_for_forms(G, p, q, rng):
    s = FormField.random(G, p, q, rng)
    spec = np.sqrt(2.0 ** (p + q) * G.volume * np.sum(np.abs(G.fft(s.data)) ** 2))
    assert abs(spec - s.norm()) <= 1e-12 * s.norm()


def test_norms_of_sums(rng):
    a, b = FormField.random(G2, 1, 0, rng), FormField.random(G2, 0, 1, rng)
    l2, sup = norms(a + b)
    assert l2 == pytest.approx(np.hypot(a.norm(), b.norm()))
    assert sup == pytest.approx(np.sqrt((a.pointwise_norm2() + b.pointwise_norm2()).max()))


def test_operators_act_on_sums(rng):
    a, b = FormField.random(G2, 1, 0, rng), FormField.random(G2, 0, 1, rng)
    s = dbar(a + b)
    assert (s - (dbar(a) + dbar(b))).norm() == 0.0
