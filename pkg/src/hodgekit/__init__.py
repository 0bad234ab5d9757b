"""Spectral Hodge theory, Beltrami differentials and extension solvers on flat complex tori."""

from .spectral import ScalarField, TorusGrid, complex_derivative, multiplier_apply, transform
from .forms import (BeltramiField, DegreeError, FormField, FormSum, basis_form, contract,
                    exp_contraction, scalar_form, wedge)
from .hodge import (d, dbar, dbar_adjoint, del_, del_adjoint, green, harmonic_projection,
                    laplacian_dbar, laplacian_del, norms, t_operator)

__version__ = "0.1.0"
