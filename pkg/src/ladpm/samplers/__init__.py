"""Lookahead samplers: DDPM, DDIM, tAB-DEIS, S-PNDM and DPM-Solver-2/3."""

from .deis import deis_coeff_table, deis_tab_coeffs, la_deis_step, lagrange_basis
from .run import METHODS, SamplerConfig, Trajectory, run_sampler
from .steps import (
    StepOut,
    la_ddim_step,
    la_ddpm_step,
    la_dpm_solver2_step,
    la_dpm_solver3_step,
    la_spndm_step,
    lookahead,
    spndm_first_step,
    xhat,
)

__all__ = [
    "METHODS",
    "SamplerConfig",
    "StepOut",
    "Trajectory",
    "deis_coeff_table",
    "deis_tab_coeffs",
    "la_ddim_step",
    "la_ddpm_step",
    "la_deis_step",
    "la_dpm_solver2_step",
    "la_dpm_solver3_step",
    "la_spndm_step",
    "lagrange_basis",
    "lookahead",
    "run_sampler",
    "spndm_first_step",
    "xhat",
]
