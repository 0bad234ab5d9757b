"""Dolbeault operators, their adjoints, Green operator and harmonic projection.

Every operator acts on Fourier coefficients: ``d/dz_a`` and ``d/dzbar_a`` are
diagonal multipliers and the basis reshuffling is the sign tables of
:mod:`hodgekit.forms`.  On the flat torus the dbar-Laplacian on any (p, q)-form
is ``-1/2`` times the componentwise Laplacian, so the Green operator is the
multiplier ``2 / |k|^2`` off the constant mode.
"""

from __future__ import annotations

import numpy as np

from .forms import Form, FormField, apply_unary, lift

# ----------------------------------------------------------- spectral kernels


def _dbar_coef(grid, coef, p, q):
    out = np.zeros((len(FormField.zeros(grid, p, q + 1).keys),) + grid.shape, complex)
    for b in range(grid.n):
        apply_unary(grid.n, p, q, "ext_zbar", b, coef * grid.dzbar_symbols[b], out)
    return out


def _del_coef(grid, coef, p, q):
    out = np.zeros((len(FormField.zeros(grid, p + 1, q).keys),) + grid.shape, complex)
    for a in range(grid.n):
        apply_unary(grid.n, p, q, "ext_z", a, coef * grid.dz_symbols[a], out)
    return out


def _dbar_adj_coef(grid, coef, p, q):
    out = np.zeros((len(FormField.zeros(grid, p, q - 1).keys),) + grid.shape, complex)
    for b in range(grid.n):
        apply_unary(grid.n, p, q, "int_zbar", b, -2.0 * coef * grid.dz_symbols[b], out)
    return out


def _del_adj_coef(grid, coef, p, q):
    out = np.zeros((len(FormField.zeros(grid, p - 1, q).keys),) + grid.shape, complex)
    for a in range(grid.n):
        apply_unary(grid.n, p, q, "int_z", a, -2.0 * coef * grid.dzbar_symbols[a], out)
    return out


def _spectral_op(kernel, dp, dq):
    def op(sigma: FormField) -> FormField:
        grid = sigma.grid
        out = FormField.zeros(grid, sigma.p + dp, sigma.q + dq, sigma.weight)
        if sigma.is_empty or out.is_empty:
            return out
        coef = kernel(grid, grid.fft(sigma.data), sigma.p, sigma.q)
        return out.like(grid.ifft(coef))
    return op


_dbar = _spectral_op(_dbar_coef, 0, 1)
_del = _spectral_op(_del_coef, 1, 0)
_dbar_adj = _spectral_op(_dbar_adj_coef, 0, -1)
_del_adj = _spectral_op(_del_adj_coef, -1, 0)


@lift
def dbar(sigma: FormField) -> FormField:
    """``dbar sigma = sum_b dzbar^b ^ d/dzbar_b sigma``: (p, q) -> (p, q + 1)."""
    return _dbar(sigma)


@lift
def del_(sigma: FormField) -> FormField:
    """``del sigma = sum_a dz^a ^ d/dz_a sigma``: (p, q) -> (p + 1, q)."""
    return _del(sigma)


@lift
def d(sigma: FormField):
    """Exterior derivative ``del + dbar`` (returns a FormSum)."""
    return _del(sigma) + _dbar(sigma)


@lift
def dbar_adjoint(sigma: FormField) -> FormField:
    """L2 adjoint of dbar, ``-2 sum_b d/dz_b (d/dzbar_b _| sigma)``: (p, q) -> (p, q - 1)."""
    return _dbar_adj(sigma)


@lift
def del_adjoint(sigma: FormField) -> FormField:
    """L2 adjoint of del, ``-2 sum_a d/dzbar_a (d/dz_a _| sigma)``: (p, q) -> (p - 1, q)."""
    return _del_adj(sigma)


def _laplacian(sigma: FormField, up, down, dp: int, dq: int) -> FormField:
    """``up down + down up`` composed on Fourier coefficients (one transform pair).

    ``up`` raises the bidegree by ``(dp, dq)`` and ``down`` is its adjoint.
    """
    grid, p, q = sigma.grid, sigma.p, sigma.q
    coef = grid.fft(sigma.data)
    out = np.zeros_like(coef)
    if p - dp >= 0 and q - dq >= 0:
        out += up(grid, down(grid, coef, p, q), p - dp, q - dq)
    if p + dp <= grid.n and q + dq <= grid.n:
        out += down(grid, up(grid, coef, p, q), p + dp, q + dq)
    return sigma.like(grid.ifft(out))


@lift
def laplacian_dbar(sigma: FormField) -> FormField:
    """``dbar dbar* + dbar* dbar``, assembled from the first-order kernels."""
    return _laplacian(sigma, _dbar_coef, _dbar_adj_coef, 0, 1)


@lift
def laplacian_del(sigma: FormField) -> FormField:
    """``del del* + del* del``."""
    return _laplacian(sigma, _del_coef, _del_adj_coef, 1, 0)


@lift
def green(sigma: FormField) -> FormField:
    """Green operator of the dbar-Laplacian: inverse on the orthogonal complement of constants."""
    g = sigma.grid
    return sigma.like(g.ifft(g.fft(sigma.data) * g.green_symbol))


@lift
def harmonic_projection(sigma: FormField) -> FormField:
    """L2 projection onto harmonic forms, which on the flat torus are the constant-coefficient ones."""
    return sigma.like(np.broadcast_to(sigma.data.mean(axis=sigma.grid.axes, keepdims=True), sigma.data.shape).copy())


@lift
def t_operator(sigma: FormField) -> FormField:
    """``T = dbar* G del``: (p, q) -> (p + 1, q - 1), one forward and one inverse FFT.

    A (p, 0) input maps to the zero space of bidegree (p + 1, -1).
    """
    grid = sigma.grid
    out = FormField.zeros(grid, sigma.p + 1, sigma.q - 1, sigma.weight)
    if sigma.is_empty or out.is_empty:
        return out
    coef = _del_coef(grid, grid.fft(sigma.data), sigma.p, sigma.q) * grid.green_symbol
    return out.like(grid.ifft(_dbar_adj_coef(grid, coef, sigma.p + 1, sigma.q)))


def norms(sigma: Form) -> tuple[float, float]:
    """``(L2 norm, sup norm)`` of a form; the sup is of the pointwise norm."""
    if isinstance(sigma, FormField):
        return sigma.norm(), sigma.sup_norm()
    sup2 = sum(f.pointwise_norm2() for f in sigma)
    return sigma.norm(), float(np.sqrt(np.max(sup2))) if sigma.parts else 0.0
