"""Hammersley-Chapman-Robbins lower bound on the variance of change-time estimators.

For a step that starts at ``k_star`` the information term ``S(tau)`` is the
squared l2 distance, in units of the noise variance, between the noiseless
outputs produced by a change at ``k_star`` and a change at ``k_star + tau``.
The bound is ``max_tau (tau + g(k_star+tau) - g(k_star))**2 / (exp(S(tau)) - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError, NumericDomainError
from .lti import DiscreteLTISystem, EigenStructure, markov_parameters

__all__ = [
    "BiasFunction",
    "BoundReport",
    "LOG_DOMAIN_THRESHOLD",
    "s_tau",
    "s_minus",
    "s_profile",
    "hcr_bound",
    "scalar_bound",
    "s_tau_eigen",
    "unit_convert",
]

# exp overflows double precision just above 709.78
LOG_DOMAIN_THRESHOLD = 700.0


@dataclass(frozen=True)
class BiasFunction:
    """Estimator bias ``g(k)`` tabulated on every candidate change time ``0..N``."""

    values: NDArray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ConfigError("bias values must be a nonempty sequence of finite numbers")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, N: int) -> "BiasFunction":
        return cls(np.zeros(N + 1))

    @classmethod
    def from_callable(cls, g: Callable[[int], float], N: int) -> "BiasFunction":
        return cls([g(k) for k in range(N + 1)])

    @property
    def N(self) -> int:
        return self.values.size - 1

    def __call__(self, k: int) -> float:
        return float(self.values[k])


@dataclass(frozen=True)
class BoundReport:
    """Result of a bound evaluation.

    ``bound_steps2`` is in squared sample steps and ``bound_phys`` in squared
    minutes. ``tau_star`` is ``None`` only when every quotient was 0/0.
    """

    k_star: int
    N: int
    taus: NDArray
    s_values: NDArray
    quotients: NDArray
    tau_star: Optional[int]
    bound_steps2: float
    bound_phys: float
    dt: float
    overflow_mode: bool

    @property
    def s_profile(self) -> list[tuple[int, float]]:
        return [(int(t), float(s)) for t, s in zip(self.taus, self.s_values)]

    @property
    def s_at_tau_star(self) -> float:
        if self.tau_star is None:
            return math.nan
        return float(self.s_values[self.tau_star - int(self.taus[0])])

    @property
    def perfect_privacy(self) -> bool:
        return math.isinf(self.bound_steps2)


def _check_horizon(k_star: int, N: int) -> None:
    if not 0 <= k_star < N:
        raise NumericDomainError(
            f"change time must satisfy 0 <= k_star < N (empty tau range), got k_star={k_star}, N={N}")


def _window_sums(h: NDArray, tau_max: int) -> Iterator[NDArray]:
    """Yield ``w_tau[m-1] = sum_{j=max(m-tau,0)}^{m-1} h[j]`` for ``tau = 1..tau_max``.

    Terms are accumulated with ``j`` descending, i.e. in the same order as a
    literal loop over ``l = k_star, k_star+1, ...``.
    """
    M = h.size
    w = np.zeros_like(h)
    for t in range(tau_max):
        w[t:] += h[:M - t]
        yield w


def s_profile(sys: DiscreteLTISystem, k_star: int, N: int,
              tau_max: Optional[int] = None) -> NDArray:
    """``S(tau)`` for ``tau = 1..tau_max`` (default ``N - k_star``)."""
    sys.require_noise()
    _check_horizon(k_star, N)
    M = N - k_star
    tau_max = M if tau_max is None else tau_max
    if not 1 <= tau_max <= M:
        raise NumericDomainError(f"tau must lie in 1..{M}, got {tau_max}")
    h = markov_parameters(sys, M)
    return np.array([np.dot(w, w) for w in _window_sums(h, tau_max)]) / sys.sigma2


def s_tau(sys: DiscreteLTISystem, k_star: int, N: int, tau: int) -> float:
    M = N - k_star
    if not 1 <= tau <= max(M, 0):
        raise NumericDomainError(f"tau must lie in 1..N-k_star={M}, got {tau}")
    return float(s_profile(sys, k_star, N, tau)[-1])


def s_minus(sys: DiscreteLTISystem, k_star: int, N: int, tau: int) -> float:
    """Information term for the backward shift ``k_star -> k_star - tau``.

    The outer sum runs over ``k = k_star-tau+1..N`` and the inner one over
    ``l = k_star-tau..min(k_star-1, k-1)``.
    """
    sys.require_noise()
    _check_horizon(k_star, N)
    if tau < 1:
        raise NumericDomainError(f"shift magnitude must be >= 1, got {tau}")
    if k_star - tau < 0:
        raise NumericDomainError(
            f"backward shift by {tau} from k_star={k_star} moves the change before time 0")
    h = markov_parameters(sys, N - k_star + tau)
    *_, w = _window_sums(h, tau)
    return float(np.dot(w, w)) / sys.sigma2


def _quotient(num_root: float, S: float) -> tuple[float, bool]:
    """``num_root**2 / expm1(S)`` and whether log-domain evaluation was used.

    Returns NaN for 0/0, which callers skip.
    """
    if S == 0.0:
        return (math.inf if num_root != 0.0 else math.nan), False
    if S > LOG_DOMAIN_THRESHOLD:
        if num_root == 0.0:
            return 0.0, True
        return math.exp(2.0 * math.log(num_root) - S), True
    return num_root * num_root / math.expm1(S), False


def _report(k_star: int, N: int, dt: float, taus: NDArray, S: NDArray,
            num_roots: NDArray) -> BoundReport:
    quotients = np.empty_like(S)
    overflow = False
    for i, (r, s) in enumerate(zip(num_roots, S)):
        quotients[i], used_log = _quotient(float(r), float(s))
        overflow |= used_log
    valid = ~np.isnan(quotients)
    if valid.any():
        # nanargmax returns the first maximizer, i.e. the smallest tau
        i_star = int(np.nanargmax(quotients))
        tau_star: Optional[int] = int(taus[i_star])
        bound = float(quotients[i_star])
    else:
        tau_star, bound = None, 0.0
    quotients.setflags(write=False)
    return BoundReport(k_star, N, taus, S, quotients, tau_star, bound,
                       unit_convert(bound, dt), dt, overflow)


def hcr_bound(sys: DiscreteLTISystem, k_star: int, N: int,
              g: Optional[BiasFunction | ArrayLike] = None) -> BoundReport:
    """Lower bound on ``Var(khat | k_star)`` for any estimator with bias ``g``.

    ``g`` defaults to zero (unbiased estimators). When supplied it must be
    tabulated on all of ``0..N``. A bound of ``+inf`` means the step leaves no
    trace in the output on this horizon.
    """
    sys.require_noise()
    _check_horizon(k_star, N)
    if g is None:
        g = BiasFunction.zero(N)
    elif not isinstance(g, BiasFunction):
        g = BiasFunction(g)
    if g.N != N:
        raise ConfigError(
            f"bias function must be defined on 0..{N} ({N + 1} values), got {g.values.size}")
    S = s_profile(sys, k_star, N)
    taus = np.arange(1, N - k_star + 1)
    num_roots = np.abs(taus + g.values[k_star + taus] - g.values[k_star])
    S.setflags(write=False)
    taus.setflags(write=False)
    return _report(k_star, N, sys.dt, taus, S, num_roots)


def scalar_bound(a: float, b: float, c: float, sigma2: float, k_star: int, N: int,
                 dt: float = 1.0) -> BoundReport:
    """Unbiased bound for a one-state plant using only the leading kernel term.

    ``S = sum_{k=k_star+1}^N (c a^(k-1-k_star) b)**2 / sigma2`` and the bound is
    ``1 / expm1(S)``.
    """
    if not a >= 0:
        raise NumericDomainError(f"scalar bound requires a >= 0, got {a}")
    if not sigma2 > 0:
        raise NumericDomainError("noise variance must be positive")
    _check_horizon(k_star, N)
    terms = c * b * float(a) ** np.arange(N - k_star)
    S = np.array([np.dot(terms, terms) / sigma2])
    return _report(k_star, N, dt, np.array([1]), S, np.array([1.0]))


def s_tau_eigen(es: EigenStructure, sigma2: float, k_star: int, N: int, tau: int,
                imag_tol: float = 1e-9) -> float:
    """``S(tau)`` evaluated from the modal expansion ``C A^j B = sum_i b_i lambda_i^j C v_i``."""
    if not sigma2 > 0:
        raise NumericDomainError("noise variance must be positive")
    _check_horizon(k_star, N)
    M = N - k_star
    if not 1 <= tau <= M:
        raise NumericDomainError(f"tau must lie in 1..{M}, got {tau}")
    h = es.markov_parameters(M)
    *_, w = _window_sums(h, tau)
    S = np.sum(w * w) / sigma2
    if abs(S.imag) > imag_tol * max(1.0, abs(S.real)):
        raise NumericDomainError(
            f"modal evaluation left an imaginary residue {S.imag:.3g}")
    return float(S.real)


def unit_convert(bound_steps2: float, dt: float) -> float:
    """Convert a variance in squared sample steps to squared minutes."""
    if not dt > 0:
        raise NumericDomainError(f"sample period must be > 0, got {dt}")
    return bound_steps2 * (dt * dt)
