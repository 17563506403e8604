"""Finite-N identities, scaling-limit sweeps and KPZ Laplace transforms."""

from .convergence import (
    DEFAULT_N_LIST,
    TRANSITION_KINDS,
    ConvergenceReport,
    atom_convergence,
    count_inversions,
    fit_exponent,
    make_report,
    marginal_convergence,
    scale_constant,
    transition_convergence,
)
from .identities import IdentityCheck, aw_laplace_rhs, aw_process_of, bw_identity_check, laplace_identity_check
from .joint import JointLawPlan, Level, aw_plan, cdh_plan, converge_aw, converge_cdh
from .kpz import (
    EXACT_MAX_N,
    LaplaceSweep,
    OracleEstimate,
    bld_oracle,
    g_finite,
    g_limit,
    laplace_convergence,
    phi_limit,
    phi_limit_parts,
    phi_n,
    phi_tilde_n,
)

__all__ = [
    "DEFAULT_N_LIST",
    "TRANSITION_KINDS",
    "ConvergenceReport",
    "atom_convergence",
    "count_inversions",
    "fit_exponent",
    "make_report",
    "marginal_convergence",
    "scale_constant",
    "transition_convergence",
    "IdentityCheck",
    "aw_laplace_rhs",
    "aw_process_of",
    "bw_identity_check",
    "laplace_identity_check",
    "JointLawPlan",
    "Level",
    "aw_plan",
    "cdh_plan",
    "converge_aw",
    "converge_cdh",
    "EXACT_MAX_N",
    "LaplaceSweep",
    "OracleEstimate",
    "bld_oracle",
    "g_finite",
    "g_limit",
    "laplace_convergence",
    "phi_limit",
    "phi_limit_parts",
    "phi_n",
    "phi_tilde_n",
]
