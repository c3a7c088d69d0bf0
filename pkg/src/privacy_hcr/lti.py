"""Discrete-time SISO LTI plants, step scenarios and their simulated outputs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError, NotDiagonalizableError, NumericDomainError

SeedLike = Union[int, np.random.SeedSequence]

__all__ = [
    "DiscreteLTISystem",
    "StepScenario",
    "MeasurementSeries",
    "EigenStructure",
    "markov_parameter",
    "markov_parameters",
    "free_response",
    "step_response",
    "simulate_noiseless",
    "simulate_noisy",
    "zoh_discretize",
    "eigen_structure",
]


def _frozen_array(x: ArrayLike, dtype=float) -> NDArray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteLTISystem:
    """Single-input single-output plant ``x+ = A x + B u``, ``y = C x + e``.

    ``B`` and ``C`` are stored as flat length-``n`` vectors. ``sigma2`` is the
    variance of the additive measurement noise ``e`` and ``dt`` the sample
    period in minutes.
    """

    A: NDArray
    B: NDArray
    C: NDArray
    sigma2: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float).reshape(-1)
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise ConfigError(f"A must be square with n >= 1, got shape {A.shape}")
        if B.shape != (n,):
            raise ConfigError(f"B must have {n} entries, got {B.size}")
        if C.shape != (n,):
            raise ConfigError(f"C must have {n} entries, got {C.size}")
        for name, arr in (("A", A), ("B", B), ("C", C)):
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} has non-finite entries")
        sigma2 = float(self.sigma2)
        dt = float(self.dt)
        if not math.isfinite(sigma2) or sigma2 < 0:
            raise ConfigError(f"sigma2 must be finite and >= 0, got {self.sigma2}")
        if not math.isfinite(dt) or dt <= 0:
            raise ConfigError(f"dt must be finite and > 0, got {self.dt}")
        object.__setattr__(self, "A", _frozen_array(A))
        object.__setattr__(self, "B", _frozen_array(B))
        object.__setattr__(self, "C", _frozen_array(C))
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "dt", dt)

    @classmethod
    def scalar(cls, a: float, b: float, c: float, sigma2: float = 0.0,
               dt: float = 1.0) -> "DiscreteLTISystem":
        return cls([[a]], [b], [c], sigma2, dt)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def with_noise(self, sigma2: float) -> "DiscreteLTISystem":
        return replace(self, sigma2=sigma2)

    def require_noise(self) -> None:
        if self.sigma2 <= 0:
            raise NumericDomainError(
                "noise variance must be positive (sigma2 = 0 makes the change "
                "time exactly recoverable)")


@dataclass(frozen=True)
class StepScenario:
    """A unit-shape step ``u_k = amplitude`` for ``k >= k_star``, observed on ``0..N``."""

    k_star: int
    N: int
    x0: Optional[NDArray] = None
    amplitude: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise NumericDomainError(f"horizon N must be an integer >= 1, got {self.N}")
        if int(self.k_star) != self.k_star or not 0 <= self.k_star < self.N:
            raise NumericDomainError(
                f"change time must satisfy 0 <= k_star < N, got k_star={self.k_star}, N={self.N}")
        object.__setattr__(self, "k_star", int(self.k_star))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        if self.x0 is not None:
            object.__setattr__(self, "x0", _frozen_array(np.reshape(self.x0, -1)))

    def initial_state(self, n: int) -> NDArray:
        if self.x0 is None:
            return np.zeros(n)
        if self.x0.shape != (n,):
            raise ConfigError(f"x0 has {self.x0.size} entries but the system has n={n}")
        return np.array(self.x0)

    def inputs(self) -> NDArray:
        """Input sequence ``u_0..u_{N-1}``."""
        u = np.zeros(self.N)
        u[self.k_star:] = self.amplitude
        return u


@dataclass(frozen=True)
class MeasurementSeries:
    """Outputs ``y_0..y_N``."""

    values: NDArray
    noisy: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(np.reshape(self.values, -1)))

    @property
    def N(self) -> int:
        return self.values.size - 1

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EigenStructure:
    """Modal data of ``(A, B, C)``: ``B = V @ b_coeffs`` and ``cv = C @ V``.

    Eigenvalues are sorted by decreasing modulus.
    """

    lambdas: NDArray
    V: NDArray
    b_coeffs: NDArray
    cv: NDArray
    cond: float = field(default=1.0)

    def markov_parameters(self, count: int) -> NDArray:
        """Complex ``sum_i b_i lambda_i**j (C v_i)`` for ``j = 0..count-1``."""
        j = np.arange(count)
        weights = self.b_coeffs * self.cv
        return (self.lambdas[None, :] ** j[:, None]) @ weights


def markov_parameters(sys: DiscreteLTISystem, count: int) -> NDArray:
    """Return ``[C A^j B for j in range(count)]`` by repeated mat-vec products."""
    h = np.empty(count)
    v = np.array(sys.B)
    for j in range(count):
        h[j] = sys.C @ v
        v = sys.A @ v
    return h


def markov_parameter(sys: DiscreteLTISystem, j: int) -> float:
    if j < 0:
        raise NumericDomainError(f"Markov parameter index must be >= 0, got {j}")
    return float(markov_parameters(sys, j + 1)[-1])


def free_response(sys: DiscreteLTISystem, x0: ArrayLike, N: int) -> NDArray:
    """``C A^k x0`` for ``k = 0..N``."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (sys.n,):
        raise ConfigError(f"x0 has {x.size} entries but the system has n={sys.n}")
    y = np.empty(N + 1)
    for k in range(N + 1):
        y[k] = sys.C @ x
        x = sys.A @ x
    return y


def step_response(sys: DiscreteLTISystem, kappa: int, N: int,
                  markov: Optional[NDArray] = None) -> NDArray:
    """Zero-state output for a unit step starting at ``kappa``, ``k = 0..N``.

    ``kappa == N`` is allowed and yields all zeros (the step is never applied).
    Pass precomputed ``markov`` (length >= N) to avoid recomputing it.
    """
    if not 0 <= kappa <= N:
        raise NumericDomainError(f"step time must lie in 0..N, got {kappa} with N={N}")
    if markov is None:
        markov = markov_parameters(sys, N)
    s = np.zeros(N + 1)
    s[kappa + 1:] = np.cumsum(markov[:N - kappa])
    return s


def simulate_noiseless(sys: DiscreteLTISystem, sc: StepScenario) -> MeasurementSeries:
    x0 = sc.initial_state(sys.n)
    y = free_response(sys, x0, sc.N)
    if sc.amplitude != 0.0:
        y = y + sc.amplitude * step_response(sys, sc.k_star, sc.N)
    return MeasurementSeries(y, noisy=False)


def noise_generator(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def simulate_noisy(sys: DiscreteLTISystem, sc: StepScenario,
                   seed: SeedLike) -> MeasurementSeries:
    """Noiseless response plus i.i.d. ``N(0, sigma2)`` noise drawn from ``seed``.

    ``seed`` may be an integer or a :class:`numpy.random.SeedSequence`
    (as produced by :func:`privacy_hcr.montecarlo.trial_seed`).
    """
    sys.require_noise()
    clean = simulate_noiseless(sys, sc).values
    rng = noise_generator(seed)
    y = clean + sys.sigma * rng.standard_normal(sc.N + 1)
    return MeasurementSeries(y, noisy=True, seed=seed if isinstance(seed, int) else None)


def zoh_discretize(f: float, h: float, c: float, dt: float) -> DiscreteLTISystem:
    """Zero-order-hold sample ``xdot = -f x + h u`` with period ``dt``.

    Gives ``a = exp(-f dt)`` and ``b = (h/f)(1 - exp(-f dt))``, or ``b = h dt``
    for the pure integrator ``f = 0``. ``sigma2`` is left at zero.
    """
    if not dt > 0:
        raise NumericDomainError(f"sample period must be > 0, got {dt}")
    a = math.exp(-f * dt)
    b = h * dt if f == 0 else -h * math.expm1(-f * dt) / f
    return DiscreteLTISystem.scalar(a, b, c, sigma2=0.0, dt=dt)


def eigen_structure(sys: DiscreteLTISystem, cond_max: float = 1e12) -> EigenStructure:
    lambdas, V = np.linalg.eig(sys.A)
    order = np.argsort(-np.abs(lambdas), kind="stable")
    lambdas = lambdas[order].astype(complex)
    V = V[:, order].astype(complex)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > cond_max:
        raise NotDiagonalizableError(
            f"eigenvector matrix condition number {cond:.3g} exceeds {cond_max:.3g}; "
            "A is not (numerically) diagonalizable")
    b_coeffs = np.linalg.solve(V, sys.B.astype(complex))
    cv = sys.C @ V
    return EigenStructure(lambdas, V, b_coeffs, cv, cond)
