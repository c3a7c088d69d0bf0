"""Seeded Monte Carlo ensembles of the change-time estimator, SNR, and the
likelihood-ratio moment used to cross-check the bound's denominator."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .bound import BiasFunction, s_tau
from .errors import EstimationError, NumericDomainError
from .estimator import _Scanner
from .lti import DiscreteLTISystem, StepScenario, free_response, noise_generator, simulate_noiseless, step_response

__all__ = [
    "THREADS_ENV",
    "TrialSummary",
    "LikelihoodRatioMoment",
    "trial_seed",
    "thread_cap",
    "run_trials",
    "variance_standard_error",
    "empirical_bias_function",
    "snr",
    "likelihood_ratio_moment",
]

THREADS_ENV = "PRIVACY_HCR_THREADS"

# Fixed batch size keeps every floating-point reduction independent of the
# number of worker threads.
_CHUNK = 64


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Independent noise stream for one trial, derived from the master seed and trial index."""
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def variance_standard_error(x: NDArray) -> float:
    """Standard error of the sample variance from the fourth central moment.

    ``Var(s^2) ~ (m4 - (n-3)/(n-1) * s^4) / n``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return math.inf
    d = x - x.mean()
    s2 = float(d @ d) / (n - 1)
    m4 = float(np.mean(d ** 4))
    return math.sqrt(max(m4 - (n - 3) / (n - 1) * s2 * s2, 0.0) / n)


@dataclass(frozen=True)
class TrialSummary:
    """Aggregate of ``n_trials`` estimates of the change time.

    The variance is centred on the empirical mean of the estimates (unbiased
    ``n-1`` normalisation); ``empirical_bias`` is ``mean - k_star``.
    """

    n_trials: int
    k_star: int
    empirical_variance: float
    empirical_bias: float
    variance_se: float
    histogram: dict[int, int]
    master_seed: int
    excluded_trials: int
    dt: float = 1.0
    estimates: NDArray = field(default=None, repr=False, compare=False)

    @property
    def empirical_mean(self) -> float:
        return self.k_star + self.empirical_bias

    @property
    def variance_phys(self) -> float:
        return self.empirical_variance * (self.dt * self.dt)


def _run_chunk(scanner: _Scanner, clean_r: NDArray, sigma: float, master_seed: int,
               start: int, stop: int) -> NDArray:
    noise = np.stack([noise_generator(trial_seed(master_seed, i)).standard_normal(clean_r.size)
                      for i in range(start, stop)])
    idx, _, _, _ = scanner.estimate(clean_r[None, :] + sigma * noise)
    return idx


def run_trials(sys: DiscreteLTISystem, sc: StepScenario, n_trials: int, master_seed: int,
               fixed_amplitude: Optional[float] = None, threads: Optional[int] = None,
               ) -> TrialSummary:
    """Simulate ``n_trials`` noisy step responses and estimate each change time.

    Trial ``i`` draws its noise from ``trial_seed(master_seed, i)`` exactly as
    :func:`~privacy_hcr.lti.simulate_noisy` would, so any single trial can be
    reproduced in isolation. The summary is independent of ``threads``.
    """
    sys.require_noise()
    if n_trials < 1:
        raise NumericDomainError(f"n_trials must be >= 1, got {n_trials}")
    x0 = sc.initial_state(sys.n)
    # Noise is added to the free-response-removed signal; the estimator would
    # subtract the same known free response anyway.
    clean_r = simulate_noiseless(sys, sc).values - free_response(sys, x0, sc.N)
    try:
        scanner = _Scanner(sys, sc.N, fixed_amplitude=fixed_amplitude)
    except EstimationError:
        return TrialSummary(n_trials, sc.k_star, math.nan, math.nan, math.nan, {},
                            master_seed, n_trials, sys.dt, np.empty(0, dtype=int))

    bounds = [(s, min(s + _CHUNK, n_trials)) for s in range(0, n_trials, _CHUNK)]
    workers = min(threads or thread_cap(), len(bounds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda b: _run_chunk(scanner, clean_r, sys.sigma, master_seed, *b), bounds))
    else:
        parts = [_run_chunk(scanner, clean_r, sys.sigma, master_seed, *b) for b in bounds]
    idx = np.concatenate(parts)
    estimates = scanner.kappas[idx[idx >= 0]]
    estimates.setflags(write=False)

    n_ok = estimates.size
    if n_ok:
        mean = float(estimates.mean())
        var = float(np.var(estimates, ddof=1)) if n_ok > 1 else 0.0
    else:
        mean = var = math.nan
    values, counts = np.unique(estimates, return_counts=True)
    return TrialSummary(
        n_trials=n_trials,
        k_star=sc.k_star,
        empirical_variance=var,
        empirical_bias=mean - sc.k_star,
        variance_se=variance_standard_error(estimates),
        histogram={int(k): int(c) for k, c in zip(values, counts)},
        master_seed=master_seed,
        excluded_trials=n_trials - n_ok,
        dt=sys.dt,
        estimates=estimates,
    )


def empirical_bias_function(sys: DiscreteLTISystem, N: int, n_trials: int, master_seed: int,
                            amplitude: float = 1.0, fixed_amplitude: Optional[float] = None,
                            ) -> BiasFunction:
    """Measure the estimator bias ``g(k) = E[khat | k] - k`` for every ``k`` in ``0..N``.

    A change at ``k = N`` never reaches the outputs, so ``g(N)`` is measured on
    step-free data. Each ``k`` uses its own master seed ``master_seed + k``.
    """
    g = np.empty(N + 1)
    for k in range(N + 1):
        sc = StepScenario(k, N, amplitude=amplitude) if k < N else StepScenario(0, N, amplitude=0.0)
        summary = run_trials(sys, sc, n_trials, master_seed + k, fixed_amplitude)
        g[k] = summary.empirical_mean - k
    return BiasFunction(g)


def snr(sys: DiscreteLTISystem, sc: StepScenario) -> float:
    """Peak squared output deviation caused by the step, over the noise variance."""
    sys.require_noise()
    deviation = sc.amplitude * step_response(sys, sc.k_star, sc.N)
    return float(np.max(np.abs(deviation)) ** 2 / sys.sigma2)


@dataclass(frozen=True)
class LikelihoodRatioMoment:
    """Monte Carlo estimate of ``E[(P(Y|k+tau)/P(Y|k) - 1)^2 | k]``."""

    mean: float
    stderr: float
    n_samples: int

    def __float__(self) -> float:
        return self.mean


def likelihood_ratio_moment(sys: DiscreteLTISystem, k_star: int, tau: int, N: int,
                            n_samples: int = 100_000, seed: int = 0,
                            max_s: float = 5.0, max_n: int = 10) -> LikelihoodRatioMoment:
    """Sample the chi-square divergence between change times ``k_star`` and ``k_star+tau``.

    Draws ``Y ~ P(.|k_star)`` and averages ``(L - 1)^2`` with
    ``log L = log P(Y|k_star+tau) - log P(Y|k_star)``. For Gaussian noise the
    expectation equals ``expm1(s_tau(...))``; the sample is only trustworthy
    for small ``S`` since the estimator variance grows like ``exp(6 S)``.
    """
    sys.require_noise()
    if N > max_n:
        raise NumericDomainError(f"horizon N={N} exceeds the guard N <= {max_n}")
    if n_samples < 100_000:
        raise NumericDomainError(f"n_samples={n_samples} below the guard of 1e5")
    S = s_tau(sys, k_star, N, tau)
    if S > max_s:
        raise NumericDomainError(f"S={S:.3g} exceeds the guard S <= {max_s}")
    m0 = step_response(sys, k_star, N)
    m1 = step_response(sys, k_star + tau, N)
    rng = np.random.default_rng(seed)
    Y = m0 + sys.sigma * rng.standard_normal((n_samples, N + 1))
    log_l = -(((Y - m1) ** 2).sum(axis=1) - ((Y - m0) ** 2).sum(axis=1)) / (2 * sys.sigma2)
    z = np.expm1(log_l) ** 2
    return LikelihoodRatioMoment(float(z.mean()), float(z.std(ddof=1) / math.sqrt(n_samples)),
                                 n_samples)
