"""Discrete function space on the flat torus [0, 2*pi)^(2n).

Fields are complex arrays sampled on a uniform grid with axes ordered
``(x_1, y_1, ..., x_n, y_n)`` and ``z_a = x_a + i y_a``.  The spectral
representation stores the Fourier coefficients ``c_k`` of
``f = sum_k c_k exp(i k.x)`` in numpy FFT order, so the zero-frequency slot
holds the field mean.  Derivative, Laplacian and Green operators are all
diagonal multipliers on these coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Square flat complex torus of complex dimension ``n`` with ``N`` samples per real axis.

    The flat metric is ``omega = (i/2) sum dz^a ^ dzbar^a``; the volume element is
    ``dx_1 dy_1 ... dx_n dy_n`` so the total volume is ``(2*pi)^(2n)``.
    """

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"samples per axis must be a power of two >= 8, got {self.N}")

    @property
    def ndim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.ndim

    @property
    def size(self) -> int:
        return self.N ** self.ndim

    @property
    def volume(self) -> float:
        return TWO_PI ** self.ndim

    @property
    def spacing(self) -> float:
        return TWO_PI / self.N

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing array axes holding the grid (fields may carry leading component axes)."""
        return tuple(range(-self.ndim, 0))

    @cached_property
    def _coords(self):
        pts = np.arange(self.N) * self.spacing
        return np.meshgrid(*([pts] * self.ndim), indexing="ij", sparse=True)

    def x(self, a: int) -> np.ndarray:
        """Real coordinate x_a (0-based ``a``), broadcastable to ``shape``."""
        return self._coords[2 * a]

    def y(self, a: int) -> np.ndarray:
        return self._coords[2 * a + 1]

    def z(self, a: int) -> np.ndarray:
        return self.x(a) + 1j * self.y(a)

    @cached_property
    def _freqs(self):
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        return np.meshgrid(*([k] * self.ndim), indexing="ij", sparse=True)

    def kx(self, a: int) -> np.ndarray:
        """Integer frequencies along x_a in centered convention (-N/2 .. N/2-1)."""
        return self._freqs[2 * a]

    def ky(self, a: int) -> np.ndarray:
        return self._freqs[2 * a + 1]

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 summed over all 2n real axes."""
        total = np.zeros(self.shape)
        for kk in self._freqs:
            total = total + kk.astype(float) ** 2
        return total

    @cached_property
    def dz_symbols(self) -> tuple[np.ndarray, ...]:
        """Multipliers of d/dz_a = (d/dx_a - i d/dy_a) / 2."""
        return tuple(0.5 * (1j * self.kx(a) + self.ky(a)) for a in range(self.n))

    @cached_property
    def dzbar_symbols(self) -> tuple[np.ndarray, ...]:
        """Multipliers of d/dzbar_a = (d/dx_a + i d/dy_a) / 2."""
        return tuple(0.5 * (1j * self.kx(a) - self.ky(a)) for a in range(self.n))

    @cached_property
    def green_symbol(self) -> np.ndarray:
        """Inverse of the dbar-Laplacian symbol |k|^2/2 off the zero mode, 0 on it."""
        g = np.zeros(self.shape)
        nz = self.k2 > 0
        g[nz] = 2.0 / self.k2[nz]
        return g

    @cached_property
    def zero_mode(self) -> np.ndarray:
        m = np.zeros(self.shape)
        m[(0,) * self.ndim] = 1.0
        return m

    def fft(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(values, axes=self.axes, norm="forward")

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(coeffs, axes=self.axes, norm="forward")

    def band_mask(self, band: int) -> np.ndarray:
        """True on frequencies with every |k_axis| <= band."""
        mask = np.ones(self.shape, dtype=bool)
        for kk in self._freqs:
            mask = mask & (np.abs(kk) <= band)
        return mask

    def random_values(self, rng: np.random.Generator, band: int | None = None,
                      leading: tuple[int, ...] = (), decay: float = 0.0) -> np.ndarray:
        """Random complex band-limited samples, default hard band limit N/4.

        ``decay`` > 0 damps coefficients as ``exp(-decay * |k|)``.
        """
        band = self.N // 4 if band is None else band
        if not 0 <= band < self.N // 2:
            raise ValueError(f"band must lie in [0, N/2), got {band}")
        shape = leading + self.shape
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        weight = self.band_mask(band) * np.exp(-decay * np.sqrt(self.k2))
        return self.ifft(c * weight / np.sqrt(weight.sum()))

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature over the torus: mean of samples times the volume."""
        return values.mean(axis=self.axes) * self.volume

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.sum(self.integrate(a * np.conj(b))))


@dataclass(frozen=True)
class ScalarField:
    """Complex scalar field in physical or spectral representation."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)
    spectral: bool = False

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"expected samples of shape {self.grid.shape}, got {self.values.shape}")

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "ScalarField":
        """Sample ``fn(grid)`` -> array broadcastable to the grid shape."""
        vals = np.broadcast_to(np.asarray(fn(grid), dtype=complex), grid.shape)
        return cls(grid, np.array(vals))

    def physical(self) -> "ScalarField":
        return transform(self, "inverse") if self.spectral else self

    def to_spectral(self) -> "ScalarField":
        return self if self.spectral else transform(self, "forward")

    def norm(self) -> float:
        """L2 norm; computed by quadrature or by Parseval depending on representation."""
        if self.spectral:
            return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.volume))
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2).real))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        other = other if other.spectral == self.spectral else transform(other, "forward" if self.spectral else "inverse")
        return ScalarField(self.grid, self.values + other.values, self.spectral)

    def __mul__(self, c) -> "ScalarField":
        return ScalarField(self.grid, self.values * c, self.spectral)

    __rmul__ = __mul__


def transform(f: ScalarField, direction: str) -> ScalarField:
    """Forward (physical -> spectral) or inverse FFT, flipping the representation tag."""
    if direction == "forward":
        if f.spectral:
            raise ValueError("field is already spectral")
        return ScalarField(f.grid, f.grid.fft(f.values), True)
    if direction == "inverse":
        if not f.spectral:
            raise ValueError("field is already physical")
        return ScalarField(f.grid, f.grid.ifft(f.values), False)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def derivative_symbol(grid: TorusGrid, index: int, kind: str) -> np.ndarray:
    """Multiplier of d/dz_a (``kind='z'``) or d/dzbar_a (``kind='zbar'``); ``index`` is 1-based."""
    if not 1 <= index <= grid.n:
        raise IndexError(f"derivative index {index} outside [1, {grid.n}]")
    if kind == "z":
        return grid.dz_symbols[index - 1]
    if kind == "zbar":
        return grid.dzbar_symbols[index - 1]
    raise ValueError(f"kind must be 'z' or 'zbar', got {kind!r}")


def multiplier_apply(f: ScalarField, multiplier) -> ScalarField:
    """Pointwise product in spectral space; returns a field in the input's representation."""
    m = np.asarray(multiplier)
    if m.shape not in ((), f.grid.shape) and np.broadcast_shapes(m.shape, f.grid.shape) != f.grid.shape:
        raise ValueError(f"multiplier shape {m.shape} incompatible with grid {f.grid.shape}")
    spec = f.to_spectral()
    out = ScalarField(f.grid, spec.values * m, True)
    return out if f.spectral else transform(out, "inverse")


def complex_derivative(f: ScalarField, index: int, kind: str) -> ScalarField:
    """d/dz_a or d/dzbar_a, exact on band-limited data."""
    return multiplier_apply(f, derivative_symbol(f.grid, index, kind))


def laplacian_symbol(grid: TorusGrid) -> np.ndarray:
    """Symbol of the scalar Laplacian sum_a (d_xx + d_yy)."""
    return -grid.k2


def d_dz(grid: TorusGrid, values: np.ndarray, a: int) -> np.ndarray:
    """Spectral d/dz_a on raw samples (0-based ``a``); leading axes are batched."""
    return grid.ifft(grid.fft(values) * grid.dz_symbols[a])


def d_dzbar(grid: TorusGrid, values: np.ndarray, a: int) -> np.ndarray:
    return grid.ifft(grid.fft(values) * grid.dzbar_symbols[a])
