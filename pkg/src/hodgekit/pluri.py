"""Local identities behind the extension of pluricanonical forms, on a Kaehler patch.

Sections of ``K^{m}`` are handled as (n, 0)-forms ``f dZ`` tagged with weight
``m - 1`` (the factor ``e = dZ^{m-1}``).  With the metric ``g = I + dd^c psi``
the line bundle ``K^{m-1}`` carries the Chern connection

    nabla'(beta (x) e) = (del beta + (-1)^deg(beta) beta ^ theta) (x) e,
    theta = -(m - 1) del log det g,

and the divergence of a Beltrami differential is
``div phi = (d_i phi^i_jbar + phi^i_jbar d_i log det g) dzbar^j``.

The defect ``Psi = dbar s + nabla'(phi _| s) - (m-1) div phi ^ s`` is computed
both from this global expression and from its local coefficient form
``(dbar_j f - phi^i_jbar d_i f - m f d_i phi^i_jbar) dzbar^j ^ dZ``; the metric
terms cancel pointwise between the two middle summands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cartan import integrability_residual
from .forms import BeltramiField, DegreeError, FormField, contract, wedge
from .hodge import d, dbar, del_
from .spectral import TorusGrid


@dataclass(frozen=True, eq=False)
class KahlerPatch:
    """Metric ``g_{i jbar} = delta_ij + d_i d_jbar psi`` from a real periodic potential.

    ``coeffs`` are the Fourier coefficients of ``psi`` (must describe a real field).
    """

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)
    min_margin: float = 0.0

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ValueError("potential coefficients must match the grid shape")
        if np.abs(self.grid.ifft(self.coeffs).imag).max() > 1e-12 * max(1.0, np.abs(self.coeffs).sum()):
            raise ValueError("Kaehler potential must be real")
        if self.positivity_margin <= self.min_margin:
            raise ValueError(f"metric not positive enough: margin {self.positivity_margin:.3e}")

    @classmethod
    def flat(cls, grid: TorusGrid) -> "KahlerPatch":
        return cls(grid, np.zeros(grid.shape, complex))

    @classmethod
    def from_terms(cls, grid: TorusGrid, terms, min_margin: float = 0.0) -> "KahlerPatch":
        """``psi = Re sum coef * exp(i k.x)`` over ``terms = [(coef, k), ...]``."""
        c = np.zeros(grid.shape, complex)
        for coef, k in terms:
            k = tuple(int(v) for v in k)
            if len(k) != grid.ndim or any(abs(v) >= grid.N // 2 for v in k):
                raise ValueError(f"frequency {k} invalid on this grid")
            c[tuple(v % grid.N for v in k)] += 0.5 * complex(coef)
            c[tuple(-v % grid.N for v in k)] += 0.5 * np.conj(complex(coef))
        return cls(grid, c, min_margin)

    @classmethod
    def random(cls, grid: TorusGrid, rng: np.random.Generator, strength: float = 0.3,
               band: int = 1) -> "KahlerPatch":
        """Random potential scaled so that ``max |g - I|`` (spectral norm) equals ``strength < 1``."""
        vals = grid.random_values(rng, band).real
        coef = grid.fft(vals) * grid.band_mask(band)
        unit = cls._hessian(grid, coef)
        scale = np.linalg.norm(unit, ord=2, axis=(-2, -1)).max()
        return cls(grid, coef * (strength / scale))

    @staticmethod
    def _hessian(grid, coef):
        n = grid.n
        out = np.empty(grid.shape + (n, n), complex)
        for i in range(n):
            for j in range(n):
                out[..., i, j] = grid.ifft(coef * grid.dz_symbols[i] * grid.dzbar_symbols[j])
        return out

    @property
    def potential(self) -> np.ndarray:
        return self.grid.ifft(self.coeffs).real

    @cached_property
    def g(self) -> np.ndarray:
        """``g[..., i, j] = g_{i jbar}``."""
        return np.eye(self.grid.n) + self._hessian(self.grid, self.coeffs)

    def dg(self, kind: str = "z") -> np.ndarray:
        """``out[k, ..., i, j] = d_k g_{i jbar}`` (``kind='z'``) or ``dbar_k`` (``'zbar'``)."""
        grid = self.grid
        syms = grid.dz_symbols if kind == "z" else grid.dzbar_symbols
        n = grid.n
        out = np.empty((n,) + grid.shape + (n, n), complex)
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    out[k, ..., i, j] = grid.ifft(self.coeffs * syms[k] * grid.dz_symbols[i] * grid.dzbar_symbols[j])
        return out

    @cached_property
    def det_g(self) -> np.ndarray:
        return np.linalg.det(self.g).real

    @cached_property
    def log_det_g(self) -> np.ndarray:
        return np.log(self.det_g)

    @cached_property
    def dlog_det_g(self) -> np.ndarray:
        """``d_k log det g = tr(g^{-1} d_k g)``, shape ``(n, *grid.shape)``, from exact derivatives of g."""
        ginv = np.linalg.inv(self.g)
        return np.einsum("...ij,k...ji->k...", ginv, self.dg("z"))

    @cached_property
    def positivity_margin(self) -> float:
        return float(np.linalg.eigvalsh(self.g).min())

    def kahler_symmetry_residual(self) -> float:
        """``max |d_k g_{i lbar} - d_i g_{k lbar}|``."""
        dg = self.dg("z")
        return float(np.abs(dg - np.einsum("k...il->i...kl", dg)).max())

    def kahler_form(self) -> FormField:
        """``omega = (i/2) g_{i jbar} dz^i ^ dzbar^j``."""
        n = self.grid.n
        comps = {((i,), (j,)): 0.5j * self.g[..., i, j] for i in range(n) for j in range(n)}
        return FormField.from_components(self.grid, 1, 1, comps)

    def closedness_residual(self) -> float:
        """``||d omega|| / ||omega||``."""
        om = self.kahler_form()
        return d(om).norm() / om.norm()


@dataclass(frozen=True, eq=False)
class PluriForm:
    """A section ``f dZ (x) dZ^{m-1}`` of ``K^m``."""

    grid: TorusGrid
    f: np.ndarray = field(repr=False)
    m: int = 2

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("pluricanonical power m must be an integer >= 2")

    @property
    def form(self) -> FormField:
        n = self.grid.n
        return FormField(self.grid, n, 0, np.broadcast_to(self.f, self.grid.shape)[None].astype(complex),
                         weight=self.m - 1)


def _weighted(sigma, m: int | None) -> tuple[FormField, int]:
    if isinstance(sigma, PluriForm):
        sigma = sigma.form
    if m is not None and sigma.weight != m - 1:
        raise DegreeError(f"form carries weight {sigma.weight}, expected {m - 1}")
    return sigma, sigma.weight + 1


def div_beltrami(phi: BeltramiField, patch: KahlerPatch) -> FormField:
    """``div phi = (d_i phi^i_jbar + phi^i_jbar d_i log det g) dzbar^j``."""
    grid = phi.grid
    L = patch.dlog_det_g
    coef = sum(phi.deriv(i, "z")[i] + phi.data[i] * L[i] for i in range(grid.n))
    return FormField(grid, 0, 1, coef)


def connection_form(patch: KahlerPatch, weight: int) -> FormField:
    """``theta = -weight * del log det g`` with ``nabla' e = theta (x) e``."""
    return FormField(patch.grid, 1, 0, -weight * patch.dlog_det_g)


def nabla_prime(beta: FormField, patch: KahlerPatch, m: int | None = None) -> FormField:
    """``del beta + (-1)^deg beta ^ theta`` on ``K^{m-1}``-valued forms (``m - 1 = beta.weight``)."""
    beta, m = _weighted(beta, m)
    out = del_(beta)
    if m == 1 or beta.p + 1 > beta.grid.n:
        return out
    theta = connection_form(patch, m - 1)
    return out + wedge(beta, theta) * ((-1) ** beta.degree)


def psi_defect(sigma, phi: BeltramiField, patch: KahlerPatch, m: int | None = None) -> FormField:
    """``Psi = dbar s + nabla'(phi _| s) - (m-1) div phi ^ s`` from the global operators."""
    sigma, m = _weighted(sigma, m)
    out = dbar(sigma) + nabla_prime(contract(phi, sigma), patch)
    if m > 1:
        out = out - wedge(div_beltrami(phi, patch), sigma) * (m - 1)
    return out


def local_coefficients(f: np.ndarray, phi: BeltramiField, m: int) -> np.ndarray:
    """``c_j = dbar_j f - phi^i_jbar d_i f - m f d_i phi^i_jbar`` (spectral derivatives of ``f``)."""
    g = phi.grid
    fh = g.fft(f)
    df = [g.ifft(fh * s) for s in g.dz_symbols]
    dbf = [g.ifft(fh * s) for s in g.dzbar_symbols]
    divphi = sum(phi.deriv(i, "z")[i] for i in range(g.n))
    return np.stack([dbf[j] - sum(phi.data[i, j] * df[i] for i in range(g.n)) - m * f * divphi[j]
                     for j in range(g.n)])


def psi_defect_local(sigma, phi: BeltramiField, m: int | None = None) -> FormField:
    """``Psi`` from the local coefficient formula, as ``c_j dzbar^j ^ dZ``."""
    sigma, m = _weighted(sigma, m)
    n = sigma.grid.n
    c = local_coefficients(sigma.data[0], phi, m)
    return FormField(sigma.grid, n, 1, (-1) ** n * c, weight=sigma.weight)


def _bracket(sigma: FormField, phi: BeltramiField, patch: KahlerPatch, m: int) -> FormField:
    out = nabla_prime(contract(phi, sigma), patch)
    return out - wedge(div_beltrami(phi, patch), sigma) * (m - 1)


def defect_propagation_residual(sigma, phi: BeltramiField, patch: KahlerPatch, m: int | None = None,
                                integrability_tol: float = 1e-8) -> float:
    """``||dbar(B(s)) + B(Psi)|| / (||s|| + 1)`` with ``B(x) = nabla'(phi_|x) - (m-1) div phi ^ x``."""
    sigma, m = _weighted(sigma, m)
    if sigma.grid.n < 2:
        raise DegreeError("the propagation identity is vacuous for n = 1")
    if integrability_residual(phi) > integrability_tol:
        raise ValueError("phi must be integrable")
    psi = psi_defect(sigma, phi, patch)
    lhs = dbar(_bracket(sigma, phi, patch, m))
    rhs = -_bracket(psi, phi, patch, m)
    return (lhs - rhs).norm() / (sigma.norm() + 1.0)


@dataclass(frozen=True)
class CouplingResult:
    global_norm: float
    local_norm: float
    difference: float
    consistent: bool


def extension_coupling(sigma, phi: BeltramiField, patch: KahlerPatch, m: int | None = None,
                       zero_tol: float = 1e-9) -> CouplingResult:
    """Compare the global extension-equation residual with the local holomorphy system.

    ``consistent`` holds when the two residual forms agree to ``zero_tol``
    relative to ``max(1, ||s||)``, so one vanishes exactly when the other does.
    """
    sigma, m = _weighted(sigma, m)
    glob = psi_defect(sigma, phi, patch)
    loc = psi_defect_local(sigma, phi)
    diff = (glob - loc).norm()
    scale = max(1.0, sigma.norm())
    return CouplingResult(glob.norm() / scale, loc.norm() / scale, diff / scale, diff <= zero_tol * scale)
