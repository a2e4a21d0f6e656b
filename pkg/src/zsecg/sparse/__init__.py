"""Sparse-representation core: coding, dictionary learning, residuals."""

from .dictionary import (DEFAULT_LAMBDA, DEFAULT_RIDGE, Annihilator,
                         Dictionary, LsOperator, build_annihilator,
                         build_ls_operator, dictionary_objective,
                         learn_dictionary, mod_update)
from .estimators import ResidualScorer, SparseDictionary
from .residuals import (ResidualKind, ResidualReport, lae_energies, lae_flops,
                        npe_energies, npe_flops, residual_lae, residual_npe,
                        residual_sae, sae_energies, sae_flops)
from .roc import auc
from .solvers import SparseCode, admm_lasso, kkt_residual, lasso_objective, omp

__all__ = [
    "DEFAULT_LAMBDA", "DEFAULT_RIDGE", "Annihilator", "Dictionary",
    "LsOperator", "ResidualKind", "ResidualReport", "ResidualScorer",
    "SparseCode", "SparseDictionary", "admm_lasso", "auc",
    "build_annihilator", "build_ls_operator", "dictionary_objective",
    "kkt_residual", "lae_energies", "lae_flops", "lasso_objective",
    "learn_dictionary", "mod_update", "npe_energies", "npe_flops", "omp",
    "residual_lae", "residual_npe", "residual_sae", "sae_energies",
    "sae_flops",
]
