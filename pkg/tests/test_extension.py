import numpy as np
import pytest

from hodgekit import BeltramiField, FormField, TorusGrid, contract, t_operator
from hodgekit.cartan import integrability_residual
from hodgekit.config import iteration_bound
from hodgekit.deformation import beltrami_from_map, map_with_sup_norm
from hodgekit.extension import (InadmissibleInput, SolveReport, estimate_ratio, extend, first_order_extension,
                                fixed_point_map, solve_extension, solve_pq_extension, uniqueness_gap)
from hodgekit.forms import exp_contraction

from conftest import split_field

G1 = TorusGrid(1, 32)
G2 = TorusGrid(2, 16)


@pytest.fixture(scope="module")
def map_phi():
    out = {}
    for g, sup in ((G1, 0.6), (G2, 0.3), (G2, 0.5)):
        out[(g.n, sup)] = beltrami_from_map(map_with_sup_norm(g, np.random.default_rng(11), sup))
    return out


def omega0(g):
    return FormField.constant(g, g.n, 0, [1.0 - 0.5j])


def test_zero_field_one_iteration():
    for g in (G1, G2):
        om, rep = solve_extension(omega0(g), BeltramiField.zeros(g))
        assert rep.converged and rep.iterations == 1
        assert np.array_equal(om.data, omega0(g).data)


def test_constant_field_returns_input():
    phi = BeltramiField.constant(G2, [[0.2, 0.1j], [-0.3, 0.25]])
    om, rep = solve_extension(omega0(G2), phi)
    assert rep.iterations <= 2
    assert (om - omega0(G2)).norm() == 0.0
    rho, rep = extend(omega0(G2), phi)
    assert rep.dclosed_residual == 0.0


def test_extend_zero_field_is_identity():
    rho, rep = extend(omega0(G1), BeltramiField.zeros(G1))
    assert (rho - omega0(G1)).norm() == 0.0
    assert rep.dclosed_residual == 0.0


def test_map_field_dimension_two(map_phi):
    phi = map_phi[(2, 0.3)]
    om, rep = solve_extension(omega0(G2), phi)
    assert rep.converged
    assert rep.extension_residual <= 1e-10
    assert rep.contraction_ratio <= 0.35
    assert rep.contraction_ratio <= phi.sup_norm() + 0.05
    assert rep.iterations <= iteration_bound(phi.sup_norm(), 1e-10)
    assert rep.harmonic_defect <= 1e-10
    assert rep.fixed_point_residual <= 1e-10
    # fixed-point certificate recomputed here
    fp = (om - omega0(G2) + t_operator(contract(phi, om))).norm() / omega0(G2).norm()
    assert fp <= 1e-10


def test_dclosed_certificate_dimension_one(map_phi):
    phi = map_phi[(1, 0.6)]
    rho, rep = extend(omega0(G1), phi)
    assert rep.dclosed_residual <= 1e-9
    assert set(rho.parts) == {(1, 0), (0, 1)}


def test_report_invariants(map_phi):
    _, rep = solve_extension(omega0(G2), map_phi[(2, 0.5)])
    assert rep.converged and rep.extension_residual <= rep.tol
    h = np.asarray(rep.residual_history)
    assert np.all(h > 0)
    assert len(h) == rep.iterations
    d = rep.to_dict()
    assert d["iterations"] == rep.iterations and isinstance(d["residual_history"], list)


def test_uniqueness_gap(map_phi):
    z = BeltramiField.zeros(G2)
    assert uniqueness_gap(omega0(G2), z, [1, 2]) == 0.0
    gap = uniqueness_gap(omega0(G2), map_phi[(2, 0.5)], [0, 1, 2, 3, 4])
    assert gap <= 1e-9


def test_seeding_with_solution_is_a_fixed_point(map_phi):
    phi = map_phi[(2, 0.3)]
    om, _ = solve_extension(omega0(G2), phi)
    again, rep = solve_extension(omega0(G2), phi, initial=om)
    assert rep.iterations == 1
    assert rep.residual_history[0] <= 1e-10


def test_linearity_in_initial_form(map_phi):
    phi = map_phi[(2, 0.3)]
    a, b = 0.7 - 0.2j, -1.3
    o1, o2 = FormField.constant(G2, 2, 0, [1.0]), FormField.constant(G2, 2, 0, [0.4j])
    s1, _ = solve_extension(o1, phi)
    s2, _ = solve_extension(o2, phi)
    s12, _ = solve_extension(o1 * a + o2 * b, phi)
    scale = (o1 * a + o2 * b).norm()
    assert (s12 - (s1 * a + s2 * b)).norm() / scale <= 1e-9


def test_pq_variant_reduces_to_extension(map_phi):
    phi = map_phi[(2, 0.3)]
    a, ra = solve_extension(omega0(G2), phi)
    b, rb = solve_pq_extension(omega0(G2), phi)
    assert np.array_equal(a.data, b.data)
    assert ra.residual_history == rb.residual_history


def test_pq_constant_field_keeps_input():
    s0 = FormField.constant(G2, 1, 1, [1.0, 0.5, -0.2j, 1.0])
    s, rep = solve_pq_extension(s0, BeltramiField.constant(G2, [[0.1, 0.2], [0.0, -0.3]]))
    assert (s - s0).norm() == 0.0 and rep.iterations <= 2


def test_pq_system_on_map_field(map_phi):
    phi = map_phi[(2, 0.3)]
    s0 = FormField.constant(G2, 1, 1, [1.0, 0.0, 0.0, 1.0])
    s, rep = solve_pq_extension(s0, phi)
    assert rep.extension_residual <= 1e-9
    assert rep.del_residual is not None and np.isfinite(rep.del_residual)


def test_inadmissible_inputs():
    g = TorusGrid(2, 8)
    big = BeltramiField.constant(g, [[1.2, 0.0], [0.0, 0.1]])
    with pytest.raises(InadmissibleInput):
        solve_extension(omega0(g), big)
    rough = BeltramiField.random(g, np.random.default_rng(0), 0.5)
    with pytest.raises(InadmissibleInput, match="integrable"):
        solve_extension(omega0(g), rough)
    wavy = FormField(g, 2, 0, np.exp(1j * np.broadcast_to(g.x(0), g.shape))[None])
    with pytest.raises(InadmissibleInput, match="harmonic"):
        solve_extension(wavy, BeltramiField.zeros(g))
    with pytest.raises(InadmissibleInput):
        solve_extension(FormField.zeros(g, 2, 0), BeltramiField.zeros(g))
    with pytest.raises(InadmissibleInput):
        solve_extension(FormField.constant(g, 1, 1, [1, 0, 0, 1]), BeltramiField.zeros(g))


def test_dimension_one_skips_integrability(rng):
    phi = BeltramiField.random(G1, rng, 0.5)
    om, rep = solve_extension(omega0(G1), phi)
    assert rep.converged and rep.extension_residual <= 1e-10


def test_nonconvergence_withholds_solution(map_phi):
    sol, rep = solve_extension(omega0(G2), map_phi[(2, 0.5)], max_iter=2)
    assert sol is None and not rep.converged
    assert rep.iterations == 2 and "no convergence" in rep.message


def test_fixed_point_map_step(map_phi):
    phi = map_phi[(2, 0.3)]
    step = fixed_point_map(omega0(G2), phi, omega0(G2))
    assert (step - (omega0(G2) - t_operator(contract(phi, omega0(G2))))).norm() == 0.0


def test_first_order_expansion_dimension_one(rng):
    eta = BeltramiField.random(G1, rng, 1.0, band=4)
    errs = []
    for t in (0.04, 0.02, 0.01):
        rho, _ = extend(omega0(G1), eta * t, tol=1e-13)
        errs.append((rho - first_order_extension(omega0(G1), eta, t)).norm())
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(abs(r - 4.0) <= 0.5 for r in ratios), ratios


def test_first_order_expansion_dimension_two():
    # t * eta stays integrable for every t, so the family is exactly linear
    eta = split_field(G2, np.random.default_rng(42), 3)
    errs = []
    for t in (0.04, 0.02, 0.01):
        rho, _ = extend(omega0(G2), eta * t, tol=1e-13)
        errs.append((rho - first_order_extension(omega0(G2), eta, t)).norm())
    assert abs(errs[0] / errs[1] - 4.0) <= 0.5 and abs(errs[1] / errs[2] - 4.0) <= 0.5


def test_split_field_is_integrable():
    eta = split_field(G2, np.random.default_rng(3), 3)
    assert integrability_residual(eta) == 0.0 and integrability_residual(eta * 0.7) == 0.0


def test_estimate_ratio():
    assert estimate_ratio([1.0, 0.5, 0.25, 0.125, 1e-16]) == pytest.approx(0.5)
    assert estimate_ratio([1e-3]) == 0.0
    assert SolveReport().converged is False
