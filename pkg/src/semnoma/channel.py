"""Physical-layer model: Rayleigh channels, SINR, capacity and latency.

Conventions
-----------
``precedence[k, j] == 1`` means SU-k is decoded *before* SU-j and therefore
sees SU-j's signal as interference.  The diagonal is ignored.

Beamformers are stored as an array of shape ``(K, Z)``; row ``k`` is the
receive combiner applied to SU-k.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

INFEASIBLE_LATENCY = math.inf
"""Sentinel returned by :func:`system_latency` when a demand cannot be served."""

SCENARIO_FORMAT = "semnoma.scenario/1"


def dbm_to_watts(x):
    """Convert dBm to watts."""
    return 1e-3 * 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def watts_to_dbm(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float) / 1e-3)


def dbmhz_to_whz(x):
    """Convert a power spectral density in dBm/Hz to W/Hz."""
    return dbm_to_watts(x)


def whz_to_dbmhz(x):
    return watts_to_dbm(x)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkScenario:
    """One uplink NOMA experiment: K single-antenna SUs and a Z-antenna AP.

    All quantities are linear SI units (Hz, W, W/Hz, m).
    """

    channels: np.ndarray
    bandwidth: float
    noise_psd: float
    tx_power: np.ndarray
    distances: np.ndarray
    big_m: float | None = None
    weight: float = 1.0
    rng_seed: int | None = None

    def __post_init__(self):
        h = np.asarray(self.channels, dtype=complex)
        if h.ndim != 2:
            raise ConfigurationError(f"channels must be a (K, Z) array, got shape {h.shape}")
        K, Z = h.shape
        if K < 1 or Z < 1:
            raise ConfigurationError(f"need K >= 1 and Z >= 1, got K={K}, Z={Z}")
        if not np.all(np.isfinite(h)):
            raise ConfigurationError("channel entries must be finite")
        p = np.broadcast_to(np.asarray(self.tx_power, dtype=float), (K,))
        if not np.all(p > 0):
            raise ConfigurationError("all transmit powers must be positive")
        d = np.broadcast_to(np.asarray(self.distances, dtype=float), (K,))
        if not np.all(d > 0):
            raise ConfigurationError("distances must be positive")
        if not self.bandwidth > 0:
            raise ConfigurationError("bandwidth must be positive")
        if not self.noise_psd > 0:
            raise ConfigurationError("noise PSD must be positive")
        big_m = float(K + 1) if self.big_m is None else float(self.big_m)
        if not big_m > K:
            raise ConfigurationError(f"big_m must exceed K={K}, got {big_m}")
        object.__setattr__(self, "channels", _frozen(h))
        object.__setattr__(self, "tx_power", _frozen(p))
        object.__setattr__(self, "distances", _frozen(d))
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        object.__setattr__(self, "noise_psd", float(self.noise_psd))
        object.__setattr__(self, "big_m", big_m)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def num_sus(self) -> int:
        return self.channels.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.channels.shape[1]

    @property
    def noise_power(self) -> float:
        """Total in-band noise power B * sigma^2 (W)."""
        return self.bandwidth * self.noise_psd

    def replace(self, **changes) -> "NetworkScenario":
        return replace(self, **changes)

    def with_power_dbm(self, k: int, dbm: float) -> "NetworkScenario":
        p = np.array(self.tx_power)
        p[k] = dbm_to_watts(dbm)
        return replace(self, tx_power=p)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": SCENARIO_FORMAT,
            "num_sus": self.num_sus,
            "num_antennas": self.num_antennas,
            "bandwidth_hz": self.bandwidth,
            "noise_psd_dbm_hz": float(whz_to_dbmhz(self.noise_psd)),
            "tx_power_dbm": [float(x) for x in watts_to_dbm(self.tx_power)],
            "distances_m": [float(x) for x in self.distances],
            "big_m": self.big_m,
            "weight": self.weight,
            "rng_seed": self.rng_seed,
            "channels": [[[float(z.real), float(z.imag)] for z in row] for row in self.channels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkScenario":
        if d.get("format", SCENARIO_FORMAT) != SCENARIO_FORMAT:
            raise ConfigurationError(f"unsupported scenario format {d.get('format')!r}")
        try:
            h = np.array([[complex(re, im) for re, im in row] for row in d["channels"]])
            return cls(
                channels=h,
                bandwidth=d["bandwidth_hz"],
                noise_psd=float(dbmhz_to_whz(d["noise_psd_dbm_hz"])),
                tx_power=dbm_to_watts(d["tx_power_dbm"]),
                distances=d["distances_m"],
                big_m=d.get("big_m"),
                weight=d.get("weight", 1.0),
                rng_seed=d.get("rng_seed"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"scenario is missing field {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "NetworkScenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class LinkState:
    """Transmission-control variables for one step."""

    beamformers: np.ndarray
    precedence: np.ndarray
    demands: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.beamformers, dtype=complex)
        norms = np.linalg.norm(w, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ConfigurationError("beamformers must have unit norm")
        pi = np.asarray(self.precedence, dtype=float)
        if pi.shape != (w.shape[0], w.shape[0]):
            raise ConfigurationError("precedence must be K x K")
        q = np.zeros(w.shape[0]) if self.demands is None else np.asarray(self.demands, dtype=float)
        if np.any(q < 0):
            raise ConfigurationError("demands must be nonnegative")
        object.__setattr__(self, "beamformers", _frozen(w))
        object.__setattr__(self, "precedence", _frozen(pi))
        object.__setattr__(self, "demands", _frozen(q))


def pathloss_gain(distances, exponent: float, reference_gain_db: float = 0.0) -> np.ndarray:
    """Average power gain ``G0 * d**(-exponent)`` with a 1 m reference distance."""
    d = np.asarray(distances, dtype=float)
    return 10.0 ** (reference_gain_db / 10.0) * d ** (-float(exponent))


def rayleigh_channels(rng: np.random.Generator, distances, num_antennas: int,
                      exponent: float, reference_gain_db: float = 0.0) -> np.ndarray:
    """Draw CN(0, PL(d) I) channel vectors, one row per SU."""
    K = len(distances)
    g = rng.standard_normal((K, num_antennas, 2))
    h = (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)
    return h * np.sqrt(pathloss_gain(distances, exponent, reference_gain_db))[:, None]


def sample_rayleigh_scenario(seed: int, K: int, Z: int, distances: Sequence[float],
                             pathloss_exponent: float, *, reference_gain_db: float = 0.0,
                             bandwidth: float = 2e6, noise_psd_dbm_hz: float = -174.0,
                             tx_power_dbm: float | Sequence[float] = 30.0,
                             weight: float = 1.0, big_m: float | None = None) -> NetworkScenario:
    """Build a scenario with Rayleigh fading scaled by distance pathloss.

    Deterministic in ``seed``.
    """
    if K < 1 or Z < 1:
        raise ConfigurationError(f"need K >= 1 and Z >= 1, got K={K}, Z={Z}")
    d = np.asarray(distances, dtype=float)
    if d.shape != (K,):
        raise ConfigurationError(f"expected {K} distances, got {d.size}")
    if np.any(d <= 0):
        raise ConfigurationError("distances must be positive")
    rng = np.random.default_rng(seed)
    h = rayleigh_channels(rng, d, Z, pathloss_exponent, reference_gain_db)
    p = np.broadcast_to(dbm_to_watts(tx_power_dbm), (K,))
    return NetworkScenario(channels=h, bandwidth=bandwidth,
                           noise_psd=float(dbmhz_to_whz(noise_psd_dbm_hz)),
                           tx_power=p, distances=d, big_m=big_m, weight=weight,
                           rng_seed=seed)


def gain_matrix(scenario: NetworkScenario, beamformers) -> np.ndarray:
    """``G[k, j] = |h_j^H w_k|^2 p_j``: power of SU-j seen through SU-k's combiner."""
    w = np.asarray(beamformers, dtype=complex)
    proj = w @ scenario.channels.conj().T  # proj[k, j] = h_j^H w_k
    return np.abs(proj) ** 2 * scenario.tx_power[None, :]


def sinr_from_gains(gains: np.ndarray, precedence, noise_power: float) -> np.ndarray:
    G = np.asarray(gains, dtype=float)
    pi = np.array(precedence, dtype=float)
    np.fill_diagonal(pi, 0.0)
    interference = np.sum(pi * G, axis=1)
    return np.diag(G) / (interference + noise_power)


def sinr_all(scenario: NetworkScenario, beamformers, precedence) -> np.ndarray:
    return sinr_from_gains(gain_matrix(scenario, beamformers), precedence, scenario.noise_power)


def sinr(k: int, scenario: NetworkScenario, link: LinkState) -> float:
    """SINR of SU-k under the given combiners and decoding precedence."""
    h = scenario.channels
    p = scenario.tx_power
    w = link.beamformers[k]
    signal = abs(np.vdot(h[k], w)) ** 2 * p[k]
    interference = 0.0
    for j in range(scenario.num_sus):
        if j != k and link.precedence[k, j]:
            interference += link.precedence[k, j] * abs(np.vdot(h[j], w)) ** 2 * p[j]
    return float(signal / (interference + scenario.noise_power))


def rate_from_sinr(bandwidth: float, s):
    return bandwidth * np.log2(1.0 + np.asarray(s, dtype=float))


def capacity(k: int, scenario: NetworkScenario, link: LinkState) -> float:
    """Achievable rate B log2(1 + SINR_k) in bits/s."""
    return float(rate_from_sinr(scenario.bandwidth, sinr(k, scenario, link)))


def capacities(scenario: NetworkScenario, beamformers, precedence) -> np.ndarray:
    return rate_from_sinr(scenario.bandwidth, sinr_all(scenario, beamformers, precedence))


def system_latency(demands, rates) -> float:
    """Completion time ``max_k Q_k / R_k``.

    SUs with zero demand never bind.  Returns :data:`INFEASIBLE_LATENCY` if a
    positive demand faces a zero rate.
    """
    q = np.asarray(demands, dtype=float)
    r = np.asarray(rates, dtype=float)
    active = q > 0
    if not np.any(active):
        return 0.0
    if np.any(r[active] <= 0):
        return INFEASIBLE_LATENCY
    return float(np.max(q[active] / r[active]))


def per_su_latency(demands, rates) -> np.ndarray:
    q = np.asarray(demands, dtype=float)
    r = np.asarray(rates, dtype=float)
    out = np.zeros_like(q)
    active = q > 0
    with np.errstate(divide="ignore"):
        out[active] = np.where(r[active] > 0, q[active] / np.maximum(r[active], 1e-300), np.inf)
    return out
