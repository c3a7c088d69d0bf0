"""Least-squares change-time estimator (the adversary).

For each candidate change time ``kappa`` the known free response is removed,
the step amplitude is fitted by least squares against the unit step signature
``s(kappa)`` and the residual energy is recorded. The estimate is the candidate
with the smallest residual, ties going to the earliest ``kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import EstimationError, NumericDomainError
from .lti import DiscreteLTISystem, MeasurementSeries, free_response, markov_parameters, step_response

__all__ = ["EstimationResult", "step_signature", "signature_matrix", "estimate_change"]


@dataclass(frozen=True)
class EstimationResult:
    """Outcome of :func:`estimate_change`.

    ``k_hat`` is ``None`` when the no-change hypothesis wins (only possible
    with ``include_null=True``). ``excluded`` lists candidates whose signature
    vanishes on the horizon, which makes their amplitude unidentifiable.
    """

    k_hat: Optional[int]
    u_hat: float
    kappas: NDArray
    u_hats: NDArray
    residuals: NDArray
    excluded: tuple[int, ...] = ()
    null_residual: Optional[float] = None

    @property
    def candidate_set(self) -> NDArray:
        return self.kappas

    def table(self) -> list[tuple[int, float, float]]:
        """Rows ``(kappa, u_hat(kappa), R(kappa))`` in ascending ``kappa``."""
        return [(int(k), float(u), float(r))
                for k, u, r in zip(self.kappas, self.u_hats, self.residuals)]


def step_signature(sys: DiscreteLTISystem, kappa: int, N: int) -> NDArray:
    """Unit-amplitude output deviation for a change at ``kappa``, indices ``0..N``."""
    if not 0 <= kappa < N:
        raise NumericDomainError(f"candidate change time must satisfy 0 <= kappa < N, got {kappa}")
    return step_response(sys, kappa, N)


def signature_matrix(sys: DiscreteLTISystem, kappas: Sequence[int], N: int) -> NDArray:
    """Stack ``step_signature(sys, kappa, N)`` for each candidate, one row each."""
    h = markov_parameters(sys, N)
    return np.array([step_response(sys, int(k), N, h) for k in kappas]).reshape(len(kappas), N + 1)


class _Scanner:
    """Precomputed regressors for repeated scans on one (system, horizon, candidates)."""

    def __init__(self, sys: DiscreteLTISystem, N: int, kappas: Optional[Sequence[int]] = None,
                 fixed_amplitude: Optional[float] = None, include_null: bool = False,
                 clamp: bool = False):
        if kappas is None:
            kappas = range(N)
        kappas = np.unique(np.asarray(list(kappas), dtype=int))
        if kappas.size == 0:
            raise NumericDomainError("candidate set is empty")
        if kappas[0] < 0 or kappas[-1] >= N:
            raise NumericDomainError(f"candidates must lie in 0..N-1={N - 1}")
        sigs = signature_matrix(sys, kappas, N)
        energy = np.einsum("ij,ij->i", sigs, sigs)
        excluded: tuple[int, ...] = ()
        if fixed_amplitude is None:
            dead = energy == 0.0
            excluded = tuple(int(k) for k in kappas[dead])
            kappas, sigs, energy = kappas[~dead], sigs[~dead], energy[~dead]
            if kappas.size == 0 and not include_null:
                raise EstimationError(
                    "every candidate has an identically zero step signature; "
                    "the amplitude is unidentifiable")
        self.sys = sys
        self.N = N
        self.kappas = kappas
        self.sigs = sigs
        self.energy = energy
        self.excluded = excluded
        self.fixed_amplitude = fixed_amplitude
        self.include_null = include_null
        self.clamp = clamp

    def scan(self, r: NDArray) -> tuple[NDArray, NDArray]:
        """Amplitudes and residual energies for a batch of free-response-removed outputs.

        ``r`` has shape ``(trials, N+1)``; both outputs have shape ``(trials, K)``.
        """
        if self.fixed_amplitude is None:
            u = (r @ self.sigs.T) / self.energy
            if self.clamp:
                u = np.clip(u, 0.0, 1.0)
        else:
            u = np.full((r.shape[0], self.kappas.size), float(self.fixed_amplitude))
        resid = r[:, None, :] - u[:, :, None] * self.sigs[None, :, :]
        return u, np.einsum("tkn,tkn->tk", resid, resid)

    def estimate(self, r: NDArray) -> tuple[NDArray, NDArray, NDArray, NDArray]:
        """Winning indices into ``kappas`` (``-1`` = no change), their amplitudes,
        and the full ``(u, R)`` tables from :meth:`scan`."""
        u, R = self.scan(r)
        if self.kappas.size:
            idx = np.argmin(R, axis=1)
            best = R[np.arange(R.shape[0]), idx]
            u_best = u[np.arange(R.shape[0]), idx]
        else:
            idx = np.full(r.shape[0], -1)
            best = np.full(r.shape[0], np.inf)
            u_best = np.zeros(r.shape[0])
        if self.include_null:
            null = np.einsum("tn,tn->t", r, r)
            wins = null < best
            idx = np.where(wins, -1, idx)
            u_best = np.where(wins, 0.0, u_best)
        return idx, u_best, u, R


def estimate_change(y: MeasurementSeries | ArrayLike, sys: DiscreteLTISystem,
                    x0: Optional[ArrayLike] = None, fixed_amplitude: Optional[float] = None,
                    candidates: Optional[Sequence[int]] = None, include_null: bool = False,
                    clamp: bool = False) -> EstimationResult:
    """Estimate the change time of a step from the measured outputs ``y_0..y_N``.

    Parameters
    ----------
    y : MeasurementSeries or array_like
        Measured outputs.
    sys : DiscreteLTISystem
        Model assumed known to the adversary.
    x0 : array_like, optional
        Known initial state; zero by default.
    fixed_amplitude : float, optional
        If given, the step amplitude is fixed to this value instead of being
        fitted by least squares.
    candidates : sequence of int, optional
        Candidate change times; ``0..N-1`` by default.
    include_null : bool
        Also score the no-change hypothesis ``R = sum r_k**2``.
    clamp : bool
        Clamp least-squares amplitudes to ``[0, 1]``.

    Raises
    ------
    EstimationError
        If every candidate has a zero signature in least-squares mode.
    """
    values = y.values if isinstance(y, MeasurementSeries) else np.asarray(y, dtype=float).reshape(-1)
    N = values.size - 1
    if N < 1:
        raise NumericDomainError("need at least two samples (N >= 1)")
    x0 = np.zeros(sys.n) if x0 is None else x0
    r = values - free_response(sys, x0, N)
    scanner = _Scanner(sys, N, candidates, fixed_amplitude, include_null, clamp)
    idx, u_best, u, R = scanner.estimate(r[None, :])
    i = int(idx[0])
    return EstimationResult(
        k_hat=None if i < 0 else int(scanner.kappas[i]),
        u_hat=float(u_best[0]),
        kappas=scanner.kappas,
        u_hats=u[0],
        residuals=R[0],
        excluded=scanner.excluded,
        null_residual=float(r @ r) if include_null else None,
    )
