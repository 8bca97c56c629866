"""Closed-form tail bounds and convergence rates for sign descent.

Probability bounds come back as :class:`Bound`, a ``float`` that also knows
whether it is vacuous (greater than 1).  Values are never clamped, so a
soundness check against a vacuous bound still compares real numbers.
"""
from __future__ import annotations

import math

import numpy as np

from .oracles import CRITICAL_SNR, snr_profile

SQRT3 = math.sqrt(3.0)


class Bound(float):
    @property
    def vacuous(self) -> bool:
        return self > 1.0


def _positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")


def gauss_tail(k: float, tau: float) -> Bound:
    """Gauss' inequality: P[|X - mode| > k] for unimodal X with E[(X - mode)^2] = tau^2."""
    _positive(k=k, tau=tau)
    r = k / tau
    if r > CRITICAL_SNR:
        return Bound(4.0 / (9.0 * r * r))
    return Bound(1.0 - r / SQRT3)


def lemma1_bound(S: float) -> Bound:
    """Bound on P[sign(g~_i) != sign(g_i)] at SNR ``S`` under unimodal symmetric noise."""
    if S < 0:
        raise ValueError(f"SNR must be nonnegative, got {S!r}")
    if S > CRITICAL_SNR:
        return Bound(2.0 / (9.0 * S * S))
    return Bound(0.5 - S / (2.0 * SQRT3))


def cantelli(lam: float, sigma: float) -> Bound:
    """One-sided Chebyshev: P[mu - X >= |lam|] <= 1 / (1 + lam^2 / sigma^2)."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    return Bound(1.0 / (1.0 + (lam / sigma) ** 2))


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"adversary fraction must lie in [0, 1/2), got {alpha!r}")


def vote_failure_bound(M: int, alpha: float, S: float) -> Bound:
    """P[majority vote is wrong on a coordinate] <= 1 / ((1 - 2 alpha) sqrt(M) S)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    _check_alpha(alpha)
    _positive(S=S)
    return Bound(1.0 / ((1.0 - 2.0 * alpha) * math.sqrt(M) * S))


def epsilon_lower_bound(S: float) -> float:
    """Lower bound on p - 1/2 for one honest worker's sign bit at SNR ``S``."""
    if S < 0:
        raise ValueError(f"SNR must be nonnegative, got {S!r}")
    if S > CRITICAL_SNR:
        return 0.5 - 2.0 / (9.0 * S * S)
    return S / (2.0 * SQRT3)


def epsilon_step_holds(S: float) -> bool:
    """Check 1/(4 eps^2) - 1 < 4/S^2 at the lower-bounded eps.

    This is the algebraic step that turns the Cantelli bound into the
    1/((1-2 alpha) sqrt(M) S) form.
    """
    _positive(S=S)
    eps = epsilon_lower_bound(S)
    return 1.0 / (4.0 * eps * eps) - 1.0 < 4.0 / (S * S)


THEOREM1_CONSTANT = 3.0
THEOREM1_TIGHT_CONSTANT = 1.5 * SQRT3


def theorem1_rhs(L1: float, f_gap: float, N: int, constant: float = THEOREM1_CONSTANT) -> float:
    """Mini-batch rate: constant * sqrt(||L||_1 (f0 - f*) / N).

    ``constant`` defaults to 3; pass ``THEOREM1_TIGHT_CONSTANT``
    (3 sqrt(3) / 2) for the sharper constant.
    """
    _positive(L1=L1, f_gap=f_gap, N=N)
    return constant * math.sqrt(L1 * f_gap / N)


def theorem2_rhs(L1: float, f_gap: float, sigma_l1: float, M: int, alpha: float, N: int) -> float:
    """Bound on the squared average l1 gradient norm under majority vote.

    ``N`` is gradient calls per worker, i.e. K^2 with batch size n = K.
    """
    _check_alpha(alpha)
    _positive(L1=L1, f_gap=f_gap, M=M, N=N)
    if sigma_l1 < 0:
        raise ValueError("sigma_l1 must be nonnegative")
    bracket = sigma_l1 / ((1.0 - 2.0 * alpha) * math.sqrt(M)) + math.sqrt(L1 * f_gap)
    return 4.0 / math.sqrt(N) * bracket**2


def mixed_norm_profile(g, sigma) -> tuple[float, int]:
    """Mixed norm together with the number of high-SNR coordinates."""
    g = np.asarray(g, dtype=np.float64)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), g.shape)
    S, high = snr_profile(g, sigma)
    low = S <= CRITICAL_SNR
    low_nonzero = low & (g != 0)
    if np.any(sigma[low_nonzero] <= 0):
        raise ValueError("sigma_i must be positive on low-SNR coordinates")
    value = np.abs(g[high]).sum() + np.sum(g[low_nonzero] ** 2 / sigma[low_nonzero])
    return float(value), int(high.size)


def mixed_norm(g, sigma) -> float:
    """l1 over high-SNR coordinates plus sum g_i^2 / sigma_i over the rest."""
    return mixed_norm_profile(g, sigma)[0]
