"""Numerical semiconvex analysis and subsolution verification.

The package computes resolvent maps of convex perturbations of the
identity, argmin maps and their regularity diagnostics, partial
sup-convolutions, and runs a desk-scale verification harness for the
minimum principle: marginal functions of semiconcave fields whose jets
lie in a product subequation stay inside the base subequation.
"""

__version__ = "0.1.0"

from .fields import Box, CertificateError, DomainError, ScalarField, validate_certificates
from .jets import (
    BlockSplit,
    Jet2,
    SymMatrix,
    estimate_jet,
    is_upper_contact_jet,
    pullback_fiber,
    pullback_slice,
)
from .prox import (
    ResolventSolveReport,
    contraction_mu,
    resolvent_base,
    resolvent_full,
    verify_nonexpansive,
)
from .argmin import (
    ArgminResult,
    SupportVector,
    calmness_scan,
    functional_J,
    marginal_field,
    solve_argmin,
    solve_J_fixed_point,
    subdifferential_probe,
    tilde_shift,
    verify_functional_equation,
)
from .subequations import (
    MembershipVerdict,
    ProductMembershipConfig,
    Subequation,
    add_convex_quadratic,
    catalog,
    check_positivity,
    product_membership,
)
from .supconv import (
    SupConvField,
    add_fiber_quadratic,
    build_f_epsilon,
    partial_sup_convolve,
    verify_fiber_semiconcavity,
    verify_supconv_properties,
)

__all__ = [name for name in dir() if not name.startswith("_")]
