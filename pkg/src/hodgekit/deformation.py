"""Integrable Beltrami differentials generated by explicit torus diffeomorphisms.

A map ``w = F(z)`` with ``F^i = A_ij z^j + B_ij zbar^j + s^i`` (``s`` periodic and
band-limited) has Jacobian blocks ``a = dw/dz`` and ``b = dw/dzbar``, and
``dw = a (dz + phi dzbar)`` with ``phi = a^{-1} b``.  This ``phi`` defines the
complex structure in which the ``w^i`` are holomorphic, so it is integrable.

``phi`` is rational in trig polynomials, hence not band-limited; spectral
derivatives of its samples alias.  The exact derivatives
``d phi = a^{-1} (d b - (d a) phi)`` are attached to the field as a jet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .forms import BeltramiField, spectral_norms
from .spectral import TorusGrid


class SingularMapError(ValueError):
    """Jacobian (or its holomorphic block) degenerates somewhere on the grid."""


@dataclass(frozen=True, eq=False)
class TorusMap:
    """``F^i(z) = sum_j A_ij z^j + B_ij zbar^j + s^i(z)`` with periodic ``s``.

    Parameters
    ----------
    grid : TorusGrid
    coeffs : ndarray, shape ``(n, *grid.shape)``
        Fourier coefficients of the periodic parts ``s^i`` (numpy FFT order,
        ``fftn(norm="forward")`` convention).  Nyquist frequencies must vanish.
    linear, antilinear : ndarray, shape ``(n, n)``
        ``A`` and ``B``; default identity and zero.
    eps_jac : float
        Minimum admissible ``|det|`` of the real Jacobian and of ``a``.
    """

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)
    linear: np.ndarray | None = None
    antilinear: np.ndarray | None = None
    eps_jac: float = 1e-3

    def __post_init__(self):
        n = self.grid.n
        if self.coeffs.shape != (n,) + self.grid.shape:
            raise ValueError(f"coefficients must have shape {(n,) + self.grid.shape}")
        nyq = np.zeros(self.grid.shape, dtype=bool)
        for a in range(self.grid.ndim):
            idx = [slice(None)] * self.grid.ndim
            idx[a] = self.grid.N // 2
            nyq[tuple(idx)] = True
        if np.any(self.coeffs[:, nyq]):
            raise ValueError("perturbation must not use Nyquist frequencies")
        object.__setattr__(self, "linear", np.eye(n, dtype=complex) if self.linear is None
                           else np.asarray(self.linear, complex).reshape(n, n))
        object.__setattr__(self, "antilinear", np.zeros((n, n), complex) if self.antilinear is None
                           else np.asarray(self.antilinear, complex).reshape(n, n))
        jac = self.real_jacobian_det()
        if np.min(np.abs(jac)) < self.eps_jac:
            raise SingularMapError(f"real Jacobian determinant reaches {np.min(np.abs(jac)):.3e}")
        if jac.min() < 0 < jac.max():
            raise SingularMapError("real Jacobian determinant changes sign between grid points")
        if np.min(np.abs(np.linalg.det(self.a))) < self.eps_jac:
            raise SingularMapError("holomorphic Jacobian block is singular on the grid")

    # constructors
    @classmethod
    def identity(cls, grid: TorusGrid) -> "TorusMap":
        return cls(grid, np.zeros((grid.n,) + grid.shape, complex))

    @classmethod
    def from_terms(cls, grid: TorusGrid, terms, linear=None, antilinear=None, eps_jac: float = 1e-3) -> "TorusMap":
        """Build from ``terms[i] = [(coef, k), ...]`` meaning ``s^i = sum coef * exp(i k.x)``.

        ``k`` lists integer frequencies along ``(x_1, y_1, ..., x_n, y_n)``.
        """
        n = grid.n
        if len(terms) != n:
            raise ValueError(f"need {n} component term lists, got {len(terms)}")
        coeffs = np.zeros((n,) + grid.shape, complex)
        for i, comp in enumerate(terms):
            for coef, k in comp:
                k = tuple(int(v) for v in k)
                if len(k) != grid.ndim:
                    raise ValueError(f"frequency {k} must have {grid.ndim} entries")
                if any(abs(v) >= grid.N // 2 for v in k):
                    raise ValueError(f"frequency {k} not resolved on N={grid.N}")
                coeffs[(i,) + tuple(v % grid.N for v in k)] += complex(coef)
        return cls(grid, coeffs, linear, antilinear, eps_jac)

    @classmethod
    def random(cls, grid: TorusGrid, rng: np.random.Generator, amplitude: float,
               band: int = 1) -> "TorusMap":
        """Identity plus a random periodic perturbation with ``max |d s / d zbar|`` scaled to ``amplitude``."""
        vals = grid.random_values(rng, band, leading=(grid.n,))
        coef = grid.fft(vals) * grid.band_mask(band)
        zero = (slice(None),) + (0,) * grid.ndim
        coef[zero] = 0.0
        dbar = np.stack([grid.ifft(coef * s) for s in grid.dzbar_symbols], axis=-1)
        scale = spectral_norms(np.moveaxis(dbar, 0, -2)).max()
        return cls(grid, coef * (amplitude / scale))

    # samples
    def _d(self, kinds: str) -> np.ndarray:
        """Derivatives of the periodic part; ``kinds`` like 'z', 'zb', 'z,zb' (outer first)."""
        g = self.grid
        out = self.coeffs[None]
        for kind in kinds.split(","):
            syms = g.dz_symbols if kind == "z" else g.dzbar_symbols
            out = np.stack([out * s for s in syms], axis=0)
        return out

    @cached_property
    def values(self) -> np.ndarray:
        """``F^i`` at grid points, shape ``(n, *grid.shape)``."""
        g = self.grid
        z = np.stack([np.broadcast_to(g.z(a), g.shape) for a in range(g.n)])
        lin = np.einsum("ij,j...->i...", self.linear, z) + np.einsum("ij,j...->i...", self.antilinear, np.conj(z))
        return lin + g.ifft(self.coeffs)

    def _block(self, kind: str, const: np.ndarray) -> np.ndarray:
        # (j, 1, i, grid) -> matrix field (*grid, i, j)
        d = self.grid.ifft(self._d(kind)[:, 0])
        return np.moveaxis(d, (1, 0), (-2, -1)) + const

    @cached_property
    def a(self) -> np.ndarray:
        """``a[..., i, j] = d F^i / d z_j``."""
        return self._block("z", self.linear)

    @cached_property
    def b(self) -> np.ndarray:
        """``b[..., i, j] = d F^i / d zbar_j``."""
        return self._block("zb", self.antilinear)

    def second(self, outer: str, inner: str) -> np.ndarray:
        """``out[c, ..., i, j] = d_outer_c d_inner_j F^i`` (exact)."""
        d = self.grid.ifft(self._d(f"{inner},{outer}")[:, :, 0])  # (c, j, i, grid)
        return np.moveaxis(d, (2, 1), (-2, -1))

    def real_jacobian_det(self) -> np.ndarray:
        a, b = self.a, self.b
        if self.grid.n == 1:
            return (np.abs(a) ** 2 - np.abs(b) ** 2)[..., 0, 0]
        big = np.block([[a, b], [np.conj(b), np.conj(a)]])
        return np.linalg.det(big).real


def beltrami_from_map(F: TorusMap) -> BeltramiField:
    """``phi = a^{-1} b``, with exact first derivatives attached as a jet."""
    ainv = np.linalg.inv(F.a)
    phi = ainv @ F.b
    jet = {}
    for kind, key in (("z", "z"), ("zb", "zbar")):
        da = F.second(kind, "z")
        db = F.second(kind, "zb")
        dphi = ainv[None] @ (db - da @ phi[None])
        jet[key] = np.moveaxis(dphi, (-2, -1), (1, 2))
    return BeltramiField.from_matrix_field(F.grid, phi, jet)


def claim_identity_terms(F: TorusMap, phi: BeltramiField, spectral_rhs: bool = True):
    """Both sides of ``tr(a^{-1} dbar_j a) - phi^i_jbar tr(a^{-1} d_i a) = d_i phi^i_jbar``.

    The left side uses exact derivatives of the map; the right side is the
    divergence of the sampled ``phi`` (spectral when ``spectral_rhs``, else the jet).
    Returns arrays of shape ``(n, *grid.shape)`` indexed by ``j``.
    """
    g = F.grid
    ainv = np.linalg.inv(F.a)
    tr_zb = np.einsum("...ik,c...ki->c...", ainv, F.second("zb", "z"))
    tr_z = np.einsum("...ik,c...ki->c...", ainv, F.second("z", "z"))
    lhs = tr_zb - np.einsum("ij...,i...->j...", phi.data, tr_z)
    src = phi.without_jet() if spectral_rhs else phi
    rhs = sum(src.deriv(i, "z")[i] for i in range(g.n))
    return lhs, rhs


def claim_identity_residual(F: TorusMap, phi: BeltramiField, spectral_rhs: bool = True) -> np.ndarray:
    """L2 residual of the trace identity for each ``jbar``; rejects a ``phi`` not generated by ``F``."""
    ref = beltrami_from_map(F)
    if np.max(np.abs(ref.data - phi.data)) > 1e-10 * max(1.0, np.max(np.abs(ref.data))):
        raise ValueError("phi does not match the Beltrami differential of F")
    lhs, rhs = claim_identity_terms(F, phi, spectral_rhs)
    g = F.grid
    return np.sqrt(g.integrate(np.abs(lhs - rhs) ** 2).real)


@dataclass(frozen=True)
class FiniteDistance:
    ok: bool
    margin: float


def finite_distance_check(phi: BeltramiField, threshold: float = 1e-3) -> FiniteDistance:
    """Whether ``phi phibar`` stays away from eigenvalue 1: ``min |det(I - phi phibar)| > threshold``."""
    m = phi.matrix()
    eye = np.eye(phi.n)
    margin = float(np.min(np.abs(np.linalg.det(eye - m @ np.conj(m)))))
    return FiniteDistance(margin > threshold, margin)


def map_with_sup_norm(grid: TorusGrid, rng: np.random.Generator, target: float, band: int = 1,
                      rtol: float = 1e-6) -> TorusMap:
    """Random near-identity map whose Beltrami differential has ``sup_norm == target`` (to ``rtol``).

    The perturbation shape is drawn once; its amplitude is found by bisection.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target sup norm must lie in (0, 1)")
    shape = TorusMap.random(grid, rng, 1e-3, band).coeffs / 1e-3
    unit = TorusMap(grid, shape * 1e-3)
    da = (unit.a - np.eye(grid.n)) / 1e-3
    db = unit.b / 1e-3
    eye = np.eye(grid.n)

    def sup(amp):
        a = eye + amp * da
        if np.min(np.abs(np.linalg.det(a))) < 1e-3:
            return math.inf
        return float(spectral_norms(np.linalg.solve(a, amp * db)).max())

    lo, hi = 0.0, target
    while sup(hi) < target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if sup(mid) < target:
            lo = mid
        else:
            hi = mid
    return TorusMap(grid, shape * 0.5 * (lo + hi))
