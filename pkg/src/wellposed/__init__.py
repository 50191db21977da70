"""Energy-growth verification for wave equations with singular time-dependent coefficients.

Modules
-------
moduli        moduli of continuity, blow-up rates and the psi families
coefficients  coefficient fields, test families and regularity certificates
mollify       clamped extension, mollification and the approximation bounds
energy        Fourier-mode solver, approximate energy, Gronwall budget, sweeps
analysis      growth fits, decay profiles and classification
experiment    configs, the pipeline and table output (``cli`` wraps it)
"""

from .analysis import Classification, DecayProfile, GrowthFit, check_decay, classify, fit_growth
from .coefficients import (Certificate, CoefficientField, check_hyperbolicity,
                           estimate_regularity_constant, make_test_coefficient, symbol)
from .energy import (EnergyTrace, ExponentModel, GronwallResult, IntegrationError, ModeState,
                     analytic_model, approximate_energy, coupling_eps, gronwall_bound,
                     integrate_mode, run_sweep, theoretical_exponent)
from .experiment import ExperimentConfig, emit, load_config, run_experiment
from .moduli import (BlowupSpec, DomainError, ModulusSpec, PsiSpec, eval_modulus, eval_nu,
                     validate_modulus, validate_psi)
from .mollify import (MollifiedCoefficient, MollifierKernel, QuadratureError, extend,
                      mollify_derivative, mollify_value, verify_prop23)

__version__ = "0.1.0"

__all__ = [
    "BlowupSpec", "Certificate", "Classification", "CoefficientField", "DecayProfile",
    "DomainError", "EnergyTrace", "ExperimentConfig", "ExponentModel", "GronwallResult",
    "GrowthFit", "IntegrationError", "ModeState", "ModulusSpec", "MollifiedCoefficient",
    "MollifierKernel", "PsiSpec", "QuadratureError", "analytic_model", "approximate_energy",
    "check_decay", "check_hyperbolicity", "classify", "coupling_eps", "emit",
    "estimate_regularity_constant", "eval_modulus", "eval_nu", "extend", "fit_growth",
    "gronwall_bound", "integrate_mode", "load_config", "make_test_coefficient",
    "mollify_derivative", "mollify_value", "run_experiment", "run_sweep", "symbol",
    "theoretical_exponent", "validate_modulus", "validate_psi", "verify_prop23",
]
