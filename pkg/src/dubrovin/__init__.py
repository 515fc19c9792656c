"""Flat sections of Dubrovin connections: constant, small quantum and big quantum products."""

from .algebra import (
    DEFAULT_HBAR,
    biquadratic_gw_data,
    ConnectionForm,
    FlatFrame,
    GwClass,
    GwData,
    ProductTable,
    check_frobenius,
    connection_matrices,
    constant_flat_frame,
    flatness_residual,
    pm_cup_table,
    pm_gw_data,
    quantum_connection_matrices,
    quantum_ode_system,
    truncated_polynomial_table,
)
from .linalg import BlockMatrix, block_entry_exp, compositions, elementary, mat_exp, max_norm
from .oracle import OdePath, OracleError, rk_integrate, rk_integrate_poly
from .projective import (
    GiventalTruncation,
    PmSystem,
    check_identity,
    closed_form_parts,
    givental_matrix,
    givental_ode_residual,
    givental_truncation,
    pm_closed_form,
    pm_flat_frame,
    pm_full_frame,
    pm_system,
)
from .series import (
    ConvergenceError,
    EgtFactorization,
    ExpLogSeries,
    ExpOdeSystem,
    ExpShiftedSeries,
    PowerSeries,
    big_quantum_coeffs,
    block_operator,
    companion_matrix,
    companion_residuals,
    egt_factorize,
    evaluate,
    frobenius_chain,
    product_form_coeff,
    recover_gw,
    recover_terms,
    scalar_binomial_identity,
    solve_via_block_exp,
    solve_via_egt,
    step_product_coeffs,
    subst1_coeffs,
    subst2_coeffs,
    subst2_domain,
    subst3_coeffs,
)
