"""Shared fixtures and literal-formula oracles.

The oracles here are deliberately naive transcriptions (dense matrix powers,
explicit loops, explicit state recursion) and share no code with the package.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from privacy_hcr import DiscreteLTISystem

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# -- oracles -----------------------------------------------------------------

def naive_markov(A, B, C, j):
    return float(np.asarray(C) @ np.linalg.matrix_power(np.asarray(A), j) @ np.asarray(B))


def naive_s_tau(A, B, C, sigma2, k_star, N, tau):
    total = 0.0
    for k in range(k_star + 1, N + 1):
        inner = 0.0
        for l in range(k_star, min(k_star + tau - 1, k - 1) + 1):
            inner += naive_markov(A, B, C, k - 1 - l)
        total += inner ** 2
    return total / sigma2


def naive_s_minus(A, B, C, sigma2, k_hat, N, tau):
    """Backward shift by ``tau``: outer k from k_hat-tau+1, inner l from k_hat-tau to min(k_hat-1, k-1)."""
    total = 0.0
    for k in range(k_hat - tau + 1, N + 1):
        inner = 0.0
        for l in range(k_hat - tau, min(k_hat - 1, k - 1) + 1):
            inner += naive_markov(A, B, C, k - 1 - l)
        total += inner ** 2
    return total / sigma2


def recursion_outputs(A, B, C, x0, k_star, N, amplitude=1.0):
    """Iterate x+ = A x + B u, y = C x for k = 0..N."""
    A, B, C = np.asarray(A, float), np.asarray(B, float).reshape(-1), np.asarray(C, float).reshape(-1)
    x = np.asarray(x0, float).reshape(-1).copy()
    ys = []
    for k in range(N + 1):
        ys.append(float(C @ x))
        u = amplitude if k >= k_star else 0.0
        x = A @ x + B * u
    return np.array(ys)


# -- random systems ----------------------------------------------------------

def random_stable_system(rng: np.random.Generator, n: int, sigma2: float = 1.0,
                         complex_pairs: bool = True, radius: float = 0.95) -> DiscreteLTISystem:
    """Real system with spectral radius < ``radius``; may contain complex pairs.

    Built as ``T D T^-1`` with ``D`` block diagonal (real poles and scaled
    rotations) and ``T`` a random well-conditioned basis.
    """
    blocks = []
    remaining = n
    while remaining:
        if complex_pairs and remaining >= 2 and rng.random() < 0.5:
            r = rng.uniform(0.1, radius)
            th = rng.uniform(0.2, math.pi - 0.2)
            blocks.append(r * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]))
            remaining -= 2
        else:
            blocks.append(np.array([[rng.uniform(-radius, radius)]]))
            remaining -= 1
    D = np.zeros((n, n))
    i = 0
    for blk in blocks:
        m = blk.shape[0]
        D[i:i + m, i:i + m] = blk
        i += m
    while True:
        T = rng.normal(size=(n, n))
        if np.linalg.cond(T) < 50:
            break
    A = T @ D @ np.linalg.inv(T)
    return DiscreteLTISystem(A, rng.normal(size=n), rng.normal(size=n), sigma2)


@pytest.fixture
def half_system():
    """One-state a=0.5, b=c=1, sigma2=1."""
    return DiscreteLTISystem.scalar(0.5, 1.0, 1.0, 1.0)


@pytest.fixture
def integrator():
    return DiscreteLTISystem.scalar(1.0, 1.0, 1.0, 1.0)


@pytest.fixture
def diag_system():
    return DiscreteLTISystem(np.diag([0.9, 0.5]), [1.0, 1.0], [1.0, 0.0], 1.0)
