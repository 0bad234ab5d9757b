"""Neumann-series solver for the extension equation ``dbar s = -del(phi _| s)``.

The solution with harmonic part ``s0`` is the fixed point of
``s = s0 - T(phi _| s)`` with ``T = dbar* G del``.  Since ``||T|| <= 1`` and
contraction by ``phi`` has norm ``sup_norm(phi) < 1``, successive substitution
converges geometrically.  Convergence is declared on the fixed-point increment;
the equation residual and, for (n, 0)-forms, d-closedness of
``e^{i_phi} s`` are then recomputed as independent certificates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cartan import integrability_residual
from .forms import BeltramiField, FormField, as_sum, contract, exp_contraction
from .hodge import d, dbar, del_, harmonic_projection, t_operator


class InadmissibleInput(ValueError):
    """Solver preconditions violated (phi too large, not integrable, or non-harmonic data)."""


@dataclass
class SolveReport:
    """Convergence trace and certificates of one Neumann solve (all norms relative to ``||s0||``)."""

    iterations: int = 0
    residual_history: list = field(default_factory=list)
    extension_residual: float = math.nan
    fixed_point_residual: float = math.nan
    harmonic_defect: float = math.nan
    dclosed_residual: float | None = None
    del_residual: float | None = None
    contraction_ratio: float = 0.0
    sup_norm: float = 0.0
    converged: bool = False
    tol: float = 1e-10
    message: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_ratio(history, floor: float = 1e-13) -> float:
    """Median successive ratio of the increments that sit above round-off."""
    h = np.asarray([v for v in history if v > floor])
    if h.size < 2:
        return 0.0
    return float(np.median(h[1:] / h[:-1]))


def _check_inputs(s0: FormField, phi: BeltramiField, integrability_tol: float) -> float:
    if phi.grid != s0.grid:
        raise ValueError("phi and the initial form live on different grids")
    if phi.valence != 1:
        raise InadmissibleInput("phi must be a valence-1 Beltrami differential")
    sup = phi.sup_norm()
    if sup >= 1.0:
        raise InadmissibleInput(f"sup_norm(phi) = {sup:.6g} >= 1: no convergence guarantee")
    first = (Ellipsis,) + (slice(0, 1),) * phi.grid.ndim
    constant = phi.jet is None and np.array_equal(np.broadcast_to(phi.data[first], phi.data.shape), phi.data)
    if s0.grid.n > 1 and not constant:
        res = integrability_residual(phi)
        if res > integrability_tol:
            raise InadmissibleInput(f"phi is not integrable (residual {res:.3e})")
    scale = s0.norm()
    if scale == 0.0:
        raise InadmissibleInput("initial form is zero")
    if (s0 - harmonic_projection(s0)).norm() > 1e-12 * scale:
        raise InadmissibleInput("initial form must be harmonic (constant coefficients)")
    return sup


def fixed_point_map(s0: FormField, phi: BeltramiField, s: FormField) -> FormField:
    """One Neumann step ``s0 - T(phi _| s)``."""
    return s0 - t_operator(contract(phi, s, strict=False))


def extension_residual(s: FormField, phi: BeltramiField) -> float:
    """Absolute ``||dbar s + del(phi _| s)||``."""
    return (dbar(s) + del_(contract(phi, s, strict=False))).norm()


def solve_pq_extension(s0: FormField, phi: BeltramiField, tol: float = 1e-10, max_iter: int = 400,
                       initial: FormField | None = None, integrability_tol: float = 1e-8):
    """Solve ``s = s0 - T(phi _| s)`` for a harmonic (p, q)-form ``s0``.

    Returns ``(s, report)``; ``s`` is ``None`` when the iteration fails to
    converge within ``max_iter``.  The report carries ``||del s||`` as an
    observation (it is not forced to vanish for q > 0).
    """
    sup = _check_inputs(s0, phi, integrability_tol)
    scale = s0.norm()
    rep = SolveReport(sup_norm=sup, tol=tol)
    s = s0 if initial is None else initial
    for it in range(1, max_iter + 1):
        nxt = fixed_point_map(s0, phi, s)
        step = (nxt - s).norm() / scale
        rep.residual_history.append(step)
        s = nxt
        if step <= tol:
            rep.extension_residual = extension_residual(s, phi) / scale
            if rep.extension_residual <= tol:
                rep.iterations = it
                rep.converged = True
                break
    else:
        rep.iterations = max_iter
        rep.extension_residual = extension_residual(s, phi) / scale
    rep.contraction_ratio = estimate_ratio(rep.residual_history)
    rep.fixed_point_residual = (fixed_point_map(s0, phi, s) - s).norm() / scale
    rep.harmonic_defect = (harmonic_projection(s) - s0).norm() / scale
    rep.del_residual = del_(s).norm() / scale
    if not rep.converged:
        rep.message = f"no convergence in {max_iter} iterations (last step {rep.residual_history[-1]:.3e})"
        return None, rep
    return s, rep


def solve_extension(omega0: FormField, phi: BeltramiField, tol: float = 1e-10, max_iter: int = 400,
                    initial: FormField | None = None, integrability_tol: float = 1e-8):
    """Solve ``Omega = Omega0 - T(phi _| Omega)`` for a constant (n, 0)-form ``Omega0``.

    Examples
    --------
    >>> from hodgekit import TorusGrid, FormField, BeltramiField
    >>> g = TorusGrid(1, 16)
    >>> om, rep = solve_extension(FormField.constant(g, 1, 0, [1.0]), BeltramiField.zeros(g))
    >>> rep.iterations, rep.converged
    (1, True)
    """
    n = omega0.grid.n
    if omega0.bidegree != (n, 0):
        raise InadmissibleInput(f"expected an ({n},0)-form, got {omega0.bidegree}")
    return solve_pq_extension(omega0, phi, tol, max_iter, initial, integrability_tol)


def dclosed_residual(rho: object, scale: float) -> float:
    return as_sum(d(rho)).norm() / scale


def extend(omega0: FormField, phi: BeltramiField, tol: float = 1e-10, max_iter: int = 400, **kw):
    """Holomorphic (n, 0)-form ``e^{i_phi} (I + T phi)^{-1} Omega0`` on the deformed structure.

    Returns ``(rho, report)`` with ``rho`` a FormSum (``None`` on non-convergence);
    ``report.dclosed_residual`` is ``||d rho|| / ||Omega0||``.
    """
    omega, rep = solve_extension(omega0, phi, tol, max_iter, **kw)
    if omega is None:
        return None, rep
    rho = exp_contraction(phi, omega)
    rep.dclosed_residual = dclosed_residual(rho, omega0.norm())
    return rho, rep


def uniqueness_gap(omega0: FormField, phi: BeltramiField, seeds, tol: float = 1e-10,
                   max_iter: int = 400) -> float:
    """Max pairwise distance (relative to ``||Omega0||``) between solutions from different starts.

    ``seeds`` may mix initial forms and integers (random band-limited starts).
    """
    sols = []
    for s in seeds:
        init = s if isinstance(s, FormField) else (
            omega0 + FormField.random(omega0.grid, omega0.p, omega0.q, np.random.default_rng(s)))
        sol, rep = solve_pq_extension(omega0, phi, tol, max_iter, initial=init)
        if sol is None:
            raise RuntimeError(rep.message)
        sols.append(sol)
    scale = omega0.norm()
    return max(((a - b).norm() / scale for i, a in enumerate(sols) for b in sols[i + 1:]), default=0.0)


def first_order_extension(omega0: FormField, eta: BeltramiField, t: float):
    """Linearization in ``t`` of ``extend(omega0, t * eta)``: ``Omega0 + t (eta_|Omega0 - T(eta_|Omega0))``."""
    c = contract(eta, omega0)
    return as_sum(omega0) + (c - t_operator(c)) * t
