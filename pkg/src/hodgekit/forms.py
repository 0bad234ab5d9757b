"""Typed (p, q)-forms, Beltrami differentials and their pointwise algebra.

A (p, q)-form is stored as ``sum f_{IJ} dz^I ^ dzbar^J`` over strictly increasing
0-based multi-indices with all holomorphic factors first.  Signs of every
reordering are tabulated once per (n, bidegree) and applied to stacked
component arrays, so the same tables serve physical samples and Fourier
coefficients alike.

The pointwise inner product is fixed repo-wide by ``<dz^a, dz^b> = 2 delta_ab``
(and likewise for ``dzbar``), so a basis element of bidegree (p, q) has squared
norm ``2^(p+q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations, product
from typing import Iterable, Union

import numpy as np

from .spectral import TorusGrid


class DegreeError(ValueError):
    """Raised when an operation would leave the admissible bidegree range."""


# ---------------------------------------------------------------- combinatorics

def _combos(n: int, r: int) -> list[tuple[int, ...]]:
    if r < 0 or r > n:
        return []
    return list(combinations(range(n), r))


@lru_cache(maxsize=None)
def form_keys(n: int, p: int, q: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """Ordered component keys ``(I, J)`` of a (p, q)-form in complex dimension n."""
    return tuple(product(_combos(n, p), _combos(n, q)))


@lru_cache(maxsize=None)
def _key_index(n: int, p: int, q: int) -> dict:
    return {k: i for i, k in enumerate(form_keys(n, p, q))}


def _merge_sign(a: tuple[int, ...], b: tuple[int, ...]):
    """Sign of sorting the concatenation a + b (both sorted); 0 on repeated index."""
    if set(a) & set(b):
        return 0, ()
    inversions = sum(1 for x in a for y in b if x > y)
    return (-1) ** inversions, tuple(sorted(a + b))


@lru_cache(maxsize=None)
def wedge_table(n: int, p1: int, q1: int, p2: int, q2: int):
    """Entries ``(i1, i2, i_out, sign)`` of the wedge product (p1,q1) x (p2,q2)."""
    out_index = _key_index(n, p1 + p2, q1 + q2)
    base = (-1) ** (q1 * p2)
    rows = []
    for i1, (I1, J1) in enumerate(form_keys(n, p1, q1)):
        for i2, (I2, J2) in enumerate(form_keys(n, p2, q2)):
            s1, I = _merge_sign(I1, I2)
            s2, J = _merge_sign(J1, J2)
            if s1 and s2:
                rows.append((i1, i2, out_index[(I, J)], base * s1 * s2))
    return tuple(rows)


@lru_cache(maxsize=None)
def unary_table(n: int, p: int, q: int, op: str, a: int):
    """Sign tables ``(i_in, i_out, sign)`` for basis-level unary operations.

    ``op`` is one of ``ext_z`` (dz^a ^ .), ``ext_zbar`` (dzbar^a ^ .),
    ``int_z`` (interior product with d/dz_a) and ``int_zbar``.
    """
    rows = []
    if op == "ext_z":
        target = _key_index(n, p + 1, q)
        for i, (I, J) in enumerate(form_keys(n, p, q)):
            s, I2 = _merge_sign((a,), I)
            if s:
                rows.append((i, target[(I2, J)], s))
    elif op == "ext_zbar":
        target = _key_index(n, p, q + 1)
        for i, (I, J) in enumerate(form_keys(n, p, q)):
            s, J2 = _merge_sign((a,), J)
            if s:
                rows.append((i, target[(I, J2)], s * (-1) ** p))
    elif op == "int_z":
        target = _key_index(n, p - 1, q)
        for i, (I, J) in enumerate(form_keys(n, p, q)):
            if a in I:
                pos = I.index(a)
                rows.append((i, target[(I[:pos] + I[pos + 1:], J)], (-1) ** pos))
    elif op == "int_zbar":
        target = _key_index(n, p, q - 1)
        for i, (I, J) in enumerate(form_keys(n, p, q)):
            if a in J:
                pos = J.index(a)
                rows.append((i, target[(I, J[:pos] + J[pos + 1:])], (-1) ** (p + pos)))
    else:
        raise ValueError(op)
    return tuple(rows)


_UNARY_SHIFT = {"ext_z": (1, 0), "ext_zbar": (0, 1), "int_z": (-1, 0), "int_zbar": (0, -1)}


def apply_unary(n: int, p: int, q: int, op: str, a: int, data: np.ndarray, out: np.ndarray) -> None:
    """Accumulate ``op`` applied to component stack ``data`` into ``out`` (in place)."""
    for i_in, i_out, s in unary_table(n, p, q, op, a):
        if s > 0:
            out[i_out] += data[i_in]
        else:
            out[i_out] -= data[i_in]


def spectral_norms(mats: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a stack ``(..., r, c)``.

    Closed forms for the 1x1 and 2x2 cases; batched SVD is much slower there.
    """
    r, c = mats.shape[-2:]
    if r == 1 or c == 1:
        return np.sqrt(np.sum(np.abs(mats) ** 2, axis=(-2, -1)))
    if (r, c) == (2, 2):
        fro2 = np.sum(np.abs(mats) ** 2, axis=(-2, -1))
        det = np.abs(mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0])
        disc = np.sqrt(np.maximum(fro2 ** 2 - 4.0 * det ** 2, 0.0))
        return np.sqrt(0.5 * (fro2 + disc))
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


# ---------------------------------------------------------------------- forms

@dataclass(frozen=True, eq=False)
class FormField:
    """A (p, q)-form on the torus, optionally tagged with a canonical-bundle weight.

    ``data`` has shape ``(C(n,p) * C(n,q), *grid.shape)`` with components in
    :func:`form_keys` order.  Bidegrees outside ``[0, n]`` are allowed and
    denote the zero space (no components).  ``weight`` is the power ``m - 1`` of
    ``K_M`` the form takes values in (0 for ordinary forms).
    """

    grid: TorusGrid
    p: int
    q: int
    data: np.ndarray = field(repr=False)
    weight: int = 0

    def __post_init__(self):
        want = (len(self.keys),) + self.grid.shape
        if self.data.shape != want:
            raise ValueError(f"({self.p},{self.q})-form expects data of shape {want}, got {self.data.shape}")

    # construction
    @classmethod
    def zeros(cls, grid: TorusGrid, p: int, q: int, weight: int = 0) -> "FormField":
        return cls(grid, p, q, np.zeros((len(form_keys(grid.n, p, q)),) + grid.shape, complex), weight)

    @classmethod
    def from_components(cls, grid: TorusGrid, p: int, q: int, comps: dict, weight: int = 0) -> "FormField":
        """Build from ``{(I, J): samples or scalar}``; missing components are zero."""
        out = cls.zeros(grid, p, q, weight)
        index = _key_index(grid.n, p, q)
        for key, vals in comps.items():
            I, J = (tuple(sorted(k)) for k in key)
            out.data[index[(I, J)]] = np.broadcast_to(vals, grid.shape)
        return out

    @classmethod
    def constant(cls, grid: TorusGrid, p: int, q: int, coeffs, weight: int = 0) -> "FormField":
        """Constant-coefficient form from a flat sequence in component order."""
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        keys = form_keys(grid.n, p, q)
        if coeffs.size != len(keys):
            raise ValueError(f"({p},{q})-form needs {len(keys)} coefficients, got {coeffs.size}")
        data = np.broadcast_to(coeffs.reshape((-1,) + (1,) * grid.ndim), (len(keys),) + grid.shape)
        return cls(grid, p, q, np.array(data), weight)

    @classmethod
    def random(cls, grid: TorusGrid, p: int, q: int, rng: np.random.Generator,
               band: int | None = None, weight: int = 0) -> "FormField":
        n = len(form_keys(grid.n, p, q))
        return cls(grid, p, q, grid.random_values(rng, band, leading=(n,)), weight)

    # metadata
    @property
    def keys(self):
        return form_keys(self.grid.n, self.p, self.q)

    @property
    def bidegree(self) -> tuple[int, int]:
        return (self.p, self.q)

    @property
    def degree(self) -> int:
        return self.p + self.q

    @property
    def is_empty(self) -> bool:
        return len(self.keys) == 0

    def component(self, I: Iterable[int], J: Iterable[int]) -> np.ndarray:
        return self.data[_key_index(self.grid.n, self.p, self.q)[(tuple(I), tuple(J))]]

    def like(self, data: np.ndarray) -> "FormField":
        return FormField(self.grid, self.p, self.q, data, self.weight)

    # arithmetic
    def _check(self, other: "FormField"):
        if other.grid != self.grid or other.bidegree != self.bidegree or other.weight != self.weight:
            raise DegreeError(f"cannot combine ({self.p},{self.q})/w{self.weight} with "
                              f"({other.p},{other.q})/w{other.weight}")

    def __add__(self, other):
        if isinstance(other, FormSum):
            return FormSum.of(self) + other
        if other.bidegree != self.bidegree:
            return FormSum.of(self, other)
        self._check(other)
        return self.like(self.data + other.data)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self.like(-self.data)

    def __mul__(self, c):
        """Scalar or pointwise multiplication by a grid-shaped function."""
        return self.like(self.data * np.asarray(c))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.like(self.data / c)

    # norms
    def pointwise_norm2(self) -> np.ndarray:
        return (2.0 ** (self.p + self.q)) * np.sum(np.abs(self.data) ** 2, axis=0)

    def inner(self, other: "FormField") -> complex:
        self._check(other)
        return (2.0 ** (self.p + self.q)) * self.grid.inner(self.data, other.data)

    def norm(self) -> float:
        if self.is_empty:
            return 0.0
        return float(np.sqrt(self.grid.integrate(self.pointwise_norm2()).real))

    def sup_norm(self) -> float:
        if self.is_empty:
            return 0.0
        return float(np.sqrt(self.pointwise_norm2().max()))


class FormSum:
    """Sum of forms of mixed bidegree, keyed by bidegree.

    Distinct bidegrees are orthogonal, so norms add in quadrature.
    """

    def __init__(self, grid: TorusGrid, parts: dict | None = None, weight: int = 0):
        self.grid = grid
        self.weight = weight
        self.parts: dict[tuple[int, int], FormField] = {}
        for f in (parts or {}).values():
            self._accumulate(f)

    @classmethod
    def of(cls, *forms: FormField) -> "FormSum":
        if not forms:
            raise ValueError("need at least one form")
        out = cls(forms[0].grid, weight=forms[0].weight)
        for f in forms:
            out._accumulate(f)
        return out

    def _accumulate(self, f: FormField) -> None:
        if f.is_empty:
            return
        if f.weight != self.weight:
            raise DegreeError(f"weight mismatch {f.weight} vs {self.weight}")
        if f.bidegree in self.parts:
            self.parts[f.bidegree] = self.parts[f.bidegree] + f
        else:
            self.parts[f.bidegree] = f

    def __getitem__(self, bidegree) -> FormField:
        if bidegree in self.parts:
            return self.parts[bidegree]
        return FormField.zeros(self.grid, *bidegree, weight=self.weight)

    def __iter__(self):
        return iter(self.parts.values())

    def __add__(self, other):
        out = FormSum(self.grid, dict(self.parts), self.weight)
        for f in (other if isinstance(other, FormSum) else [other]):
            out._accumulate(f)
        return out

    __radd__ = __add__

    def __neg__(self):
        return FormSum(self.grid, {k: -v for k, v in self.parts.items()}, self.weight)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return FormSum(self.grid, {k: v * c for k, v in self.parts.items()}, self.weight)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(sum(f.norm() ** 2 for f in self.parts.values())))

    def __repr__(self):
        return f"FormSum({sorted(self.parts)})"


Form = Union[FormField, FormSum]


def as_sum(x: Form) -> FormSum:
    return x if isinstance(x, FormSum) else FormSum.of(x)


def lift(fn):
    """Extend a linear operation on FormField to FormSum by acting on each part."""
    def wrapper(x, *args, **kwargs):
        if isinstance(x, FormSum):
            out = FormSum(x.grid, weight=x.weight)
            for part in x:
                res = fn(part, *args, **kwargs)
                out = out + res
            return out
        return fn(x, *args, **kwargs)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


def norm(x: Form) -> float:
    return x.norm()


def scalar_form(grid: TorusGrid, values) -> FormField:
    """A function viewed as a (0, 0)-form."""
    return FormField(grid, 0, 0, np.broadcast_to(np.asarray(values, complex), grid.shape)[None].copy())


def basis_form(grid: TorusGrid, I: Iterable[int] = (), J: Iterable[int] = (), coeff=1.0) -> FormField:
    """``coeff * dz^I ^ dzbar^J`` for sorted 0-based index sets."""
    I, J = tuple(I), tuple(J)
    return FormField.from_components(grid, len(I), len(J), {(I, J): coeff})


def wedge(alpha: Form, beta: Form) -> Form:
    """Exterior product; graded-commutative, bidegrees add."""
    if isinstance(alpha, FormSum) or isinstance(beta, FormSum):
        parts = [wedge(a, b) for a in as_sum(alpha) for b in as_sum(beta)]
        out = FormSum(alpha.grid, weight=alpha.weight + beta.weight)
        for f in parts:
            out = out + f
        return out
    if alpha.grid != beta.grid:
        raise ValueError("forms live on different grids")
    n = alpha.grid.n
    p, q = alpha.p + beta.p, alpha.q + beta.q
    if p > n or q > n:
        raise DegreeError(f"wedge of ({alpha.p},{alpha.q}) and ({beta.p},{beta.q}) exceeds dimension {n}")
    out = FormField.zeros(alpha.grid, p, q, alpha.weight + beta.weight)
    for i1, i2, io, s in wedge_table(n, alpha.p, alpha.q, beta.p, beta.q):
        out.data[io] += s * alpha.data[i1] * beta.data[i2]
    return out


@lift
def interior(sigma: FormField, a: int) -> FormField:
    """Interior product with d/dz_a (0-based); zero space when p = 0."""
    out = FormField.zeros(sigma.grid, sigma.p - 1, sigma.q, sigma.weight)
    apply_unary(sigma.grid.n, sigma.p, sigma.q, "int_z", a, sigma.data, out.data)
    return out


# ------------------------------------------------------------ Beltrami fields

@dataclass(frozen=True, eq=False)
class BeltramiField:
    """A T^{1,0}-valued (0, k)-form ``sum_i phi^i (x) d/dz_i``.

    ``data[i, j]`` holds the coefficient of ``dzbar^{J_j} (x) d/dz_i`` with
    ``J_j`` the j-th increasing k-subset; for valence 1 this is ``phi^i_jbar``.

    ``jet`` optionally carries exact first derivatives as a dict with keys
    ``"z"`` and ``"zbar"``, each of shape ``(n, *data.shape)`` (derivative
    direction first).  Fields built from analytic constructions (see
    :mod:`hodgekit.deformation`) supply it because their samples are not
    band-limited; otherwise derivatives are spectral.
    """

    grid: TorusGrid
    data: np.ndarray = field(repr=False)
    valence: int = 1
    jet: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        n = self.grid.n
        want = (n, len(_combos(n, self.valence))) + self.grid.shape
        if self.data.shape != want:
            raise ValueError(f"valence-{self.valence} field expects data of shape {want}, got {self.data.shape}")

    @classmethod
    def zeros(cls, grid: TorusGrid, valence: int = 1) -> "BeltramiField":
        shape = (grid.n, len(_combos(grid.n, valence))) + grid.shape
        return cls(grid, np.zeros(shape, complex), valence)

    @classmethod
    def constant(cls, grid: TorusGrid, matrix) -> "BeltramiField":
        """Valence-1 field with ``phi^i_jbar = matrix[i][j]`` everywhere."""
        m = np.asarray(matrix, dtype=complex).reshape(grid.n, grid.n)
        data = np.broadcast_to(m.reshape(m.shape + (1,) * grid.ndim), m.shape + grid.shape)
        return cls(grid, np.array(data))

    @classmethod
    def from_matrix_field(cls, grid: TorusGrid, mat: np.ndarray, jet: dict | None = None) -> "BeltramiField":
        """From samples shaped ``(*grid.shape, n, n)`` with ``mat[..., i, j] = phi^i_jbar``."""
        return cls(grid, np.ascontiguousarray(np.moveaxis(mat, (-2, -1), (0, 1))), 1, jet)

    @classmethod
    def random(cls, grid: TorusGrid, rng: np.random.Generator, amplitude: float = 1.0,
               band: int | None = None, valence: int = 1) -> "BeltramiField":
        """Random band-limited field rescaled so that ``sup_norm == amplitude`` (valence 1)."""
        shape = (grid.n, len(_combos(grid.n, valence)))
        out = cls(grid, grid.random_values(rng, band, leading=shape), valence)
        return out * (amplitude / out.sup_norm()) if amplitude is not None else out

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def jkeys(self):
        return _combos(self.grid.n, self.valence)

    def part(self, i: int) -> FormField:
        """The (0, k)-form ``phi^i`` (0-based vector index)."""
        return FormField(self.grid, 0, self.valence, self.data[i])

    def parts(self) -> list[FormField]:
        return [self.part(i) for i in range(self.n)]

    def matrix(self) -> np.ndarray:
        """Samples as ``(*grid.shape, n, C(n,k))`` matrices."""
        return np.moveaxis(self.data, (0, 1), (-2, -1))

    def deriv(self, a: int, kind: str) -> np.ndarray:
        """d/dz_a or d/dzbar_a of the coefficients (0-based ``a``), jet-first."""
        if self.jet is not None:
            return self.jet[kind][a]
        return self._spectral_jet[kind][a]

    @cached_property
    def _spectral_jet(self) -> dict:
        g = self.grid
        coef = g.fft(self.data)
        return {"z": [g.ifft(coef * s) for s in g.dz_symbols],
                "zbar": [g.ifft(coef * s) for s in g.dzbar_symbols]}

    def without_jet(self) -> "BeltramiField":
        return BeltramiField(self.grid, self.data, self.valence)

    def sup_norm(self) -> float:
        """Sup over grid points of the largest singular value of ``(phi^i_jbar)``."""
        if not np.any(self.data):
            return 0.0
        return float(spectral_norms(self.matrix()).max())

    def frobenius_sup(self) -> float:
        """Sup over grid points of the Frobenius norm; bounds contraction on (n,0)-forms."""
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2, axis=(0, 1)).max()))

    def norm(self) -> float:
        """L2 norm of the coefficient field with the flat pointwise metric."""
        scale = 2.0 ** self.valence / 2.0
        return float(np.sqrt(scale * self.grid.integrate(np.sum(np.abs(self.data) ** 2, axis=(0, 1))).real))

    def _jet_map(self, fn):
        if self.jet is None:
            return None
        return {k: fn(v) for k, v in self.jet.items()}

    def __mul__(self, c):
        c = complex(c)
        return BeltramiField(self.grid, self.data * c, self.valence, self._jet_map(lambda v: v * c))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __add__(self, other: "BeltramiField"):
        if other.valence != self.valence or other.grid != self.grid:
            raise DegreeError("Beltrami fields of different valence or grid")
        jet = None
        if self.jet is not None and other.jet is not None:
            jet = {k: self.jet[k] + other.jet[k] for k in self.jet}
        return BeltramiField(self.grid, self.data + other.data, self.valence, jet)

    def __sub__(self, other):
        return self + (-other)


# ---------------------------------------------------------------- contraction

def _contract(phi: BeltramiField, sigma: FormField) -> FormField:
    p, q = sigma.p - 1, sigma.q + phi.valence
    if p < 0 or q > sigma.grid.n:
        return FormField.zeros(sigma.grid, p, q, sigma.weight)
    out = FormField.zeros(sigma.grid, p, q, sigma.weight)
    for i in range(phi.n):
        inner = interior(sigma, i)
        if inner.is_empty:
            continue
        out = out + wedge(phi.part(i), inner)
    return out


def contract(phi: BeltramiField, sigma: Form, strict: bool = True) -> Form:
    """``phi _| sigma = sum_i phi^i ^ (d/dz_i _| sigma)``: (p, q) -> (p - 1, q + k).

    With ``strict`` a (0, q) input raises :class:`DegreeError`; otherwise the
    result is the zero space of bidegree (-1, q + k).
    """
    if phi.grid != sigma.grid:
        raise ValueError("phi and sigma live on different grids")
    if isinstance(sigma, FormSum):
        out = FormSum(sigma.grid, weight=sigma.weight)
        for part in sigma:
            out = out + _contract(phi, part)
        return out
    if strict and sigma.p == 0:
        raise DegreeError("contraction needs holomorphic degree p >= 1")
    return _contract(phi, sigma)


def exp_contraction(phi: BeltramiField, sigma: Form) -> FormSum:
    """``e^{i_phi} sigma = sum_k i_phi^k sigma / k!`` (finite: terminates past degree p)."""
    if phi.valence != 1:
        raise DegreeError("exp_contraction needs a valence-1 field")
    total = as_sum(sigma)
    term = total
    k = 0
    while True:
        k += 1
        term = contract(phi, term, strict=False) * (1.0 / k)
        if not term.parts:
            return total
        total = total + term
