"""Lie derivatives, Lie brackets and the Cartan-type identities for Beltrami fields.

Conventions, for ``phi`` of valence k and ``psi`` of valence k':

* ``L_phi = (-1)^k d i_phi + i_phi d``, split by type into
  ``L^{1,0} = (-1)^k del i_phi + i_phi del`` and ``L^{0,1}`` with dbar;
* ``[phi, psi]^j = sum_i phi^i ^ d_i psi^j - (-1)^(k k') psi^i ^ d_i phi^j``;
* ``dbar phi`` acts on each vector component as a (0, k)-form.

With these, ``i_[phi,psi] = L_phi i_psi - (-1)^(k(k'+1)) i_psi L_phi`` and
``phi`` is integrable iff ``dbar phi = [phi, phi] / 2``.

Identities involving products are exact on the grid only when the products
are alias-free, i.e. when every factor is band-limited well inside N/2.  The
residual functions return norms relative to ``||sigma||``.
"""

from __future__ import annotations

import numpy as np

from .forms import BeltramiField, DegreeError, Form, FormField, FormSum, as_sum, contract, exp_contraction, wedge
from .hodge import d, dbar, del_


def _component_derivative(phi: BeltramiField, a: int, kind: str, j: int) -> FormField:
    return FormField(phi.grid, 0, phi.valence, phi.deriv(a, kind)[j])


def lie_bracket(phi: BeltramiField, psi: BeltramiField) -> BeltramiField:
    """Bracket of vector-valued forms; a field of valence k + k'."""
    if phi.grid != psi.grid:
        raise ValueError("fields live on different grids")
    grid, n = phi.grid, phi.n
    k, kp = phi.valence, psi.valence
    out = BeltramiField.zeros(grid, k + kp)
    if k + kp > n:
        return out
    sign = (-1) ** (k * kp)
    for j in range(n):
        acc = FormField.zeros(grid, 0, k + kp)
        for i in range(n):
            acc = acc + wedge(phi.part(i), _component_derivative(psi, i, "z", j))
            acc = acc - sign * wedge(psi.part(i), _component_derivative(phi, i, "z", j))
        out.data[j] = acc.data
    return out


def dbar_beltrami(phi: BeltramiField) -> BeltramiField:
    """``dbar`` applied to each vector component (valence k -> k + 1)."""
    grid, n = phi.grid, phi.n
    out = BeltramiField.zeros(grid, phi.valence + 1)
    if phi.valence + 1 > n:
        return out
    for j in range(n):
        acc = FormField.zeros(grid, 0, phi.valence + 1)
        for b in range(n):
            dzb = FormField.from_components(grid, 0, 1, {((), (b,)): 1.0})
            acc = acc + wedge(dzb, _component_derivative(phi, b, "zbar", j))
        out.data[j] = acc.data
    return out


def integrability_residual(phi: BeltramiField) -> float:
    """L2 norm of ``dbar phi - [phi, phi] / 2``; zero exactly for n = 1."""
    if phi.valence != 1:
        raise DegreeError("integrability is defined for valence-1 fields")
    return (dbar_beltrami(phi) - lie_bracket(phi, phi) * 0.5).norm()


def _i(phi: BeltramiField, sigma: Form) -> Form:
    return contract(phi, sigma, strict=False)


def lie_derivative_parts(phi: BeltramiField, sigma: Form) -> tuple[Form, Form]:
    """``(L^{1,0}_phi sigma, L^{0,1}_phi sigma)``; contraction of (0, q) data is zero."""
    s = (-1) ** phi.valence
    i_sigma = as_sum(_i(phi, sigma))
    l10 = as_sum(del_(i_sigma)) * s + _i(phi, as_sum(del_(sigma)))
    l01 = as_sum(dbar(i_sigma)) * s + _i(phi, as_sum(dbar(sigma)))
    return l10, l01


def lie_derivative(phi: BeltramiField, sigma: Form) -> FormSum:
    """``L_phi sigma = (-1)^k d i_phi sigma + i_phi d sigma``."""
    return as_sum(d(as_sum(_i(phi, sigma)))) * (-1) ** phi.valence + _i(phi, as_sum(d(sigma)))


def _rel(diff: Form, sigma: Form) -> float:
    scale = sigma.norm()
    return diff.norm() / scale if scale > 0 else diff.norm()


def cartan_residual(phi: BeltramiField, psi: BeltramiField, sigma: Form) -> float:
    """``||i_[phi,psi] sigma - (L_phi i_psi - (-1)^(k(k'+1)) i_psi L_phi) sigma|| / ||sigma||``."""
    sign = (-1) ** (phi.valence * (psi.valence + 1))
    lhs = as_sum(_i(lie_bracket(phi, psi), sigma))
    rhs = lie_derivative(phi, _i(psi, sigma)) - _i(psi, lie_derivative(phi, sigma)) * sign
    return _rel(lhs - rhs, sigma)


def bracket_contraction_residual(phi: BeltramiField, sigma: Form) -> float:
    """Self-bracket specialization by type:
    ``[phi,phi] _| sigma = 2 phi_|del phi_|sigma - del(phi_|phi_|sigma) - phi_|phi_|del sigma``.
    """
    lhs = as_sum(_i(lie_bracket(phi, phi), sigma))
    ii = as_sum(_i(phi, _i(phi, sigma)))
    rhs = (as_sum(_i(phi, as_sum(del_(as_sum(_i(phi, sigma)))))) * 2.0
           - as_sum(del_(ii)) - as_sum(_i(phi, _i(phi, as_sum(del_(sigma))))))
    return _rel(lhs - rhs, sigma)


def conjugated_d(phi: BeltramiField, sigma: Form) -> FormSum:
    """``e^{-i_phi} d e^{i_phi} sigma`` evaluated directly."""
    return exp_contraction(-phi, as_sum(d(exp_contraction(phi, sigma))))


def conjugation_residual(phi: BeltramiField, sigma: Form) -> float:
    """Residual of ``e^{-i_phi} d e^{i_phi} = d - L_phi - i_{[phi,phi]/2}`` on ``sigma``."""
    lhs = conjugated_d(phi, sigma)
    rhs = as_sum(d(sigma)) - lie_derivative(phi, sigma) - as_sum(_i(lie_bracket(phi, phi) * 0.5, sigma))
    return _rel(lhs - rhs, sigma)


def integrable_conjugation_residual(phi: BeltramiField, sigma: Form) -> float:
    """Residual of ``e^{-i_phi} d e^{i_phi} = d + del i_phi - i_phi del``, valid for integrable phi."""
    lhs = conjugated_d(phi, sigma)
    rhs = as_sum(d(sigma)) + as_sum(del_(as_sum(_i(phi, sigma)))) - as_sum(_i(phi, as_sum(del_(sigma))))
    return _rel(lhs - rhs, sigma)


def dbar_contraction_residual(phi: BeltramiField, sigma: Form) -> float:
    """Residual of the commutator rule ``dbar i_phi - i_phi dbar = i_{dbar phi}``."""
    lhs = as_sum(dbar(as_sum(_i(phi, sigma)))) - _i(phi, as_sum(dbar(sigma)))
    return _rel(lhs - as_sum(_i(dbar_beltrami(phi), sigma)), sigma)
