"""Variance lower bounds for estimating the time of a step input to a noisy
discrete LTI system, with the least-squares attacker and Monte Carlo checks."""

from .bound import BiasFunction, BoundReport, hcr_bound, s_minus, s_profile, s_tau, s_tau_eigen, scalar_bound, unit_convert
from .errors import ConfigError, EstimationError, NotDiagonalizableError, NumericDomainError, PrivacyHCRError
from .estimator import EstimationResult, estimate_change, step_signature
from .lti import (
    DiscreteLTISystem,
    EigenStructure,
    MeasurementSeries,
    StepScenario,
    eigen_structure,
    markov_parameter,
    markov_parameters,
    simulate_noiseless,
    simulate_noisy,
    zoh_discretize,
)
from .montecarlo import LikelihoodRatioMoment, TrialSummary, likelihood_ratio_moment, run_trials, snr, trial_seed

__version__ = "0.1.0"
