"""Quasi-periodic solutions of the Beltrami equation ``df/dzbar = mu df/dz`` (n = 1).

For a periodic coefficient ``mu`` with ``sup|mu| < 1`` the (1, 0)-form
``h = (I + T mu)^{-1} dz`` solves ``dbar h = -del(mu _| h)``, which says that
``omega = e^{i_mu} h = h + mu h`` is closed.  A closed 1-form on the torus is
``A dz + B dzbar + du`` with ``u`` periodic, so ``f = A z + B zbar + u`` has
``df/dz = h_z`` and ``df/dzbar = mu h_z``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .deformation import TorusMap, beltrami_from_map
from .extension import SolveReport, solve_pq_extension
from .forms import BeltramiField, FormField, FormSum, as_sum, exp_contraction
from .spectral import TorusGrid


class NotClosedError(ValueError):
    """Raised when a 1-form handed to the integrator is not closed."""

    def __init__(self, residual: float):
        super().__init__(f"1-form is not closed: ||d omega|| / ||omega|| = {residual:.3e}")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class QuasiPeriodicMap:
    """``f(z) = A z + B zbar + u(z)`` with ``u`` periodic, sampled on an n = 1 grid.

    ``f(z + lam) = f(z) + A lam + B conj(lam)`` for every lattice vector ``lam``.
    """

    grid: TorusGrid
    A: complex
    B: complex
    periodic: np.ndarray = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        z = np.broadcast_to(self.grid.z(0), self.grid.shape)
        return self.A * z + self.B * np.conj(z) + self.periodic

    def dz(self) -> np.ndarray:
        g = self.grid
        return self.A + g.ifft(g.fft(self.periodic) * g.dz_symbols[0])

    def dzbar(self) -> np.ndarray:
        g = self.grid
        return self.B + g.ifft(g.fft(self.periodic) * g.dzbar_symbols[0])

    @property
    def orientation_margin(self) -> float:
        """``|A| - |B|``; positive for orientation-preserving quasi-periodic maps."""
        return abs(self.A) - abs(self.B)

    def normalized(self) -> "QuasiPeriodicMap":
        """Post-compose with ``w -> (w - f(0)) / A`` so that ``A = 1`` and ``f(0) = 0``."""
        f0 = self.periodic[(0,) * self.grid.ndim]
        return QuasiPeriodicMap(self.grid, 1.0 + 0j, self.B / self.A, (self.periodic - f0) / self.A)

    def equation_residual(self, mu: BeltramiField) -> float:
        """``sup |df/dzbar - mu df/dz| / sup |df/dz|`` with spectral derivatives."""
        fz = self.dz()
        r = self.dzbar() - mu.data[0, 0] * fz
        return float(np.abs(r).max() / np.abs(fz).max())


@dataclass
class MapReport:
    solve: SolveReport
    equation_residual: float = np.nan
    type_split_residual: float = np.nan
    integration_residual: float = np.nan
    orientation_margin: float = np.nan
    A: complex = 0j
    B: complex = 0j

    def to_dict(self) -> dict:
        out = asdict(self)
        out["A"] = [self.A.real, self.A.imag]
        out["B"] = [self.B.real, self.B.imag]
        return out


def _check_mu(mu: BeltramiField) -> float:
    if mu.grid.n != 1:
        raise ValueError("the Beltrami map solver works in complex dimension 1")
    sup = mu.sup_norm()
    if sup >= 1.0:
        raise ValueError(f"sup|mu| = {sup:.6g} >= 1")
    return sup


def solve_one_form(mu: BeltramiField, h0: FormField, tol: float = 1e-10, max_iter: int = 400):
    """``h = (I + T mu)^{-1} h0`` for a constant (1, 0)-form ``h0``; returns ``(h, SolveReport)``."""
    _check_mu(mu)
    if h0.bidegree != (1, 0):
        raise ValueError("h0 must be a (1,0)-form")
    return solve_pq_extension(h0, mu, tol, max_iter)


def _one_form_parts(omega) -> tuple[np.ndarray, np.ndarray, TorusGrid]:
    s = as_sum(omega)
    return s[(1, 0)].data[0], s[(0, 1)].data[0], s.grid


def integrate_closed_one_form(omega, closed_tol: float = 1e-8):
    """Split a closed 1-form as ``A dz + B dzbar + du``; returns ``(A, B, u, reconstruction_error)``.

    ``u`` has zero mean and is the least-squares spectral antiderivative, exact
    when ``omega`` is discretely closed.  Errors are relative to ``||omega||``.
    """
    P, Q, g = _one_form_parts(omega)
    sz, szb = g.dz_symbols[0], g.dzbar_symbols[0]
    Ph, Qh = g.fft(P), g.fft(Q)
    scale = np.sqrt(np.sum(np.abs(Ph) ** 2 + np.abs(Qh) ** 2))
    if scale == 0:
        return 0j, 0j, np.zeros(g.shape, complex), 0.0
    closed = np.sqrt(np.sum(np.abs(sz * Qh - szb * Ph) ** 2)) / scale
    if closed > closed_tol:
        raise NotClosedError(float(closed))
    A, B = complex(Ph[0, 0]), complex(Qh[0, 0])
    denom = np.abs(sz) ** 2 + np.abs(szb) ** 2
    uh = np.zeros_like(Ph)
    nz = denom > 0
    uh[nz] = (np.conj(sz[nz]) * Ph[nz] + np.conj(szb[nz]) * Qh[nz]) / denom[nz]
    rec_P = sz * uh
    rec_Q = szb * uh
    rec_P[0, 0] += A
    rec_Q[0, 0] += B
    err = np.sqrt(np.sum(np.abs(rec_P - Ph) ** 2 + np.abs(rec_Q - Qh) ** 2)) / scale
    return A, B, g.ifft(uh), float(err)


def solve_beltrami_map(mu: BeltramiField, tol: float = 1e-10, max_iter: int = 400):
    """Normalized quasi-periodic solution of ``df/dzbar = mu df/dz``.

    Returns ``(f, MapReport)``; ``f`` is ``None`` if the Neumann solve did not converge.

    Examples
    --------
    >>> from hodgekit import TorusGrid, BeltramiField
    >>> f, rep = solve_beltrami_map(BeltramiField.constant(TorusGrid(1, 16), [[0.5]]))
    >>> round(f.A.real, 12), round(f.B.real, 12)
    (1.0, 0.5)
    """
    _check_mu(mu)
    g = mu.grid
    h0 = FormField.constant(g, 1, 0, [1.0])
    h, srep = solve_one_form(mu, h0, tol, max_iter)
    rep = MapReport(srep)
    if h is None:
        return None, rep
    omega = exp_contraction(mu, h)
    A, B, u, rep.integration_residual = integrate_closed_one_form(omega)
    raw = QuasiPeriodicMap(g, A, B, u)
    P, Q, _ = _one_form_parts(omega)
    fz = raw.dz()
    split = np.sqrt(np.sum(np.abs(fz - P) ** 2) + np.sum(np.abs(mu.data[0, 0] * fz - Q) ** 2))
    rep.type_split_residual = float(split / np.sqrt(np.sum(np.abs(P) ** 2)))
    f = raw.normalized()
    rep.equation_residual = f.equation_residual(mu)
    rep.orientation_margin = f.orientation_margin
    rep.A, rep.B = complex(f.A), complex(f.B)
    return f, rep


def manufactured_mu(F: TorusMap) -> BeltramiField:
    """``mu = F_zbar / F_z`` for a map of the plane with periodic perturbation."""
    if F.grid.n != 1:
        raise ValueError("manufactured_mu is defined for n = 1")
    if np.min(np.abs(F.a)) == 0.0:
        raise ValueError("F_z vanishes on the grid")
    return beltrami_from_map(F)


def normalize_samples(values: np.ndarray, A: complex) -> np.ndarray:
    """Apply the same affine normalization as :meth:`QuasiPeriodicMap.normalized` to raw samples."""
    return (values - values.flat[0]) / A
