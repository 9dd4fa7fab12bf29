"""Receive beamforming by maximizing a generalized Rayleigh quotient.

The signal covariance ``H_k = p_k h_k h_k^H`` has rank one, so the maximizer
of ``w^H H_k w / w^H Hbar_k w`` is proportional to ``Hbar_k^{-1} h_k`` and a
single Cholesky solve replaces the generalized eigendecomposition.  The dense
eigensolver path is kept in :func:`reference_beamformer` for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .channel import NetworkScenario
from .errors import NumericalError

CHOLESKY_PIVOT_RTOL = 1e-15


@dataclass(frozen=True)
class CovariancePair:
    """Signal/interference-plus-noise covariances for one SU."""

    channel: np.ndarray
    power: float
    interference_matrix: np.ndarray

    @property
    def signal_matrix(self) -> np.ndarray:
        h = self.channel[:, None]
        return self.power * (h @ h.conj().T)


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def build_covariances(k: int, scenario: NetworkScenario, pi_row) -> CovariancePair:
    """Covariances for SU-k given its precedence row ``pi_row[j]`` (self entry ignored)."""
    h = scenario.channels
    p = scenario.tx_power
    Z = scenario.num_antennas
    row = np.asarray(pi_row, dtype=float).copy()
    row[k] = 0.0
    weighted = h * np.sqrt(row * p)[:, None]          # rows sqrt(pi_kj p_j) h_j
    Hbar = weighted.T @ weighted.conj()               # sum_j pi_kj p_j h_j h_j^H
    Hbar = _hermitize(Hbar) + scenario.noise_power * np.eye(Z)
    return CovariancePair(channel=np.array(h[k]), power=float(p[k]), interference_matrix=Hbar)


def rayleigh_quotient(w, pair: CovariancePair) -> float:
    w = np.asarray(w, dtype=complex)
    num = pair.power * abs(np.vdot(pair.channel, w)) ** 2
    den = np.real(np.vdot(w, pair.interference_matrix @ w))
    return float(num / den)


def canonical_phase(w: np.ndarray) -> np.ndarray:
    """Rotate ``w`` so its largest-magnitude entry is real and positive."""
    i = int(np.argmax(np.abs(w)))
    return w * (abs(w[i]) / w[i])


def optimal_beamformer(pair: CovariancePair) -> np.ndarray:
    """Unit-norm maximizer of the generalized Rayleigh quotient."""
    Hbar = pair.interference_matrix
    try:
        L = np.linalg.cholesky(Hbar)
    except np.linalg.LinAlgError:
        raise NumericalError("interference-plus-noise covariance is not positive definite") from None
    pivots = np.real(np.diag(L)) ** 2
    if np.min(pivots) < CHOLESKY_PIVOT_RTOL * np.real(np.trace(Hbar)):
        raise NumericalError("interference-plus-noise covariance is numerically singular")
    w = la.cho_solve((L, True), pair.channel)
    nrm = np.linalg.norm(w)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise NumericalError("degenerate beamformer (zero channel?)")
    return canonical_phase(w / nrm)


def reference_beamformer(pair: CovariancePair) -> np.ndarray:
    """Same optimum via the dense generalized Hermitian eigensolver (testing path)."""
    _, vecs = la.eigh(pair.signal_matrix, pair.interference_matrix)
    w = vecs[:, -1]
    return canonical_phase(w / np.linalg.norm(w))


def worst_case_beamformers(scenario: NetworkScenario) -> np.ndarray:
    """Combiners designed as if every SU were decoded first (all others interfere)."""
    K = scenario.num_sus
    ones = np.ones(K)
    return np.stack([optimal_beamformer(build_covariances(k, scenario, ones)) for k in range(K)])
