"""G-optimal designs for MNL choice models and best-assortment identification."""
from .assortment import best_and_alternative, best_assortment, revenue, true_gap
from .bsi import BsiConfig, BsiTrace, run_bsi
from .design import Design, FwReport, frank_wolfe, g_value, init_design, lift_error
from .estimator import beta, fit_mle
from .lmo import LmoResult, dinkelbach, lmo_brute, lmo_lifted
from .milp import lmo_milp, solve_bnb
from .mnl import (OUTSIDE, ChoiceData, Instance, choice_probs, fisher_info, kappa,
                  lifted_info, load_instance, nll_loss_grad_hess, save_instance)
from .sim import Environment, gen_instance, sample_choice

__version__ = "0.1.0"

__all__ = [
    "OUTSIDE", "BsiConfig", "BsiTrace", "ChoiceData", "Design", "Environment", "FwReport",
    "Instance", "LmoResult", "best_and_alternative", "best_assortment", "beta",
    "choice_probs", "dinkelbach", "fisher_info", "fit_mle", "frank_wolfe", "g_value",
    "gen_instance", "init_design", "kappa", "lift_error", "lifted_info", "lmo_brute",
    "lmo_lifted", "lmo_milp", "load_instance", "nll_loss_grad_hess", "revenue", "run_bsi",
    "sample_choice", "save_instance", "solve_bnb", "true_gap",
]
