"""IM-PPO environment, training loop, baselines and sweeps.

One environment step draws Rayleigh channels for fixed SU geometry, lets a
selection policy pick features per SU, fills in the transmission variables
(scheme-dependent) and scores the result:

    reward = -(lpips_sum + psi * min(T, latency_cap)) - penalty

Schemes
    IM-PPO     PPO over importance-pruned candidates; worst-case combiners + SCA order
    M-PPO      same, without pruning
    PLAIN-PPO  PPO also picks the order (categorical over K!) and the combiners
    ALL        every feature, SCA order
    RANDOM     each feature with probability 1/2, SCA order
    LOCATION   a learned (or ALL) selection with the order fixed by distance
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .beamforming import worst_case_beamformers
from .channel import (NetworkScenario, capacities, dbm_to_watts, dbmhz_to_whz, gain_matrix,
                      rayleigh_channels, system_latency)
from .decoding import DecodingOrder, ScaOptions, brute_force_order, sca_decoding
from .errors import ConfigurationError
from .ppo import Action, ActionSpace, Agent, PpoHyper, RolloutBuffer, ppo_update, save_checkpoint
from .recovery import SurrogateParams, lpips_scores
from .semantics import CatalogLayout, FeatureCatalog, synthesize_catalog, traffic_demand

log = logging.getLogger(__name__)

SCHEMES = ("IM-PPO", "M-PPO", "PLAIN-PPO", "ALL", "RANDOM", "LOCATION")
LEARNED = ("IM-PPO", "M-PPO", "PLAIN-PPO")
PLAIN_PPO_MAX_SUS = 5
SWEEP_AXES = ("bandwidth", "num_sus", "su_power")
SWEEP_COLUMNS = ("schema", "axis", "value", "scheme", "seed", "weighted_ll", "latency",
                 "lpips_sum", "reward", "penalty", "lpips_per_su", "ratio_per_su")
CURVE_COLUMNS = ("episode", "reward", "lpips_sum", "latency", "penalty", "policy_loss",
                 "value_loss", "clip_fraction", "approx_kl")
SWEEP_SCHEMA = "semnoma.sweep/1"


@dataclass(frozen=True)
class EnvConfig:
    """Everything that defines the environment, in config-file units (dBm, m, Hz)."""

    num_sus: int = 3
    num_antennas: int = 4
    bandwidth: float = 2e6
    noise_psd_dbm_hz: float = -174.0
    tx_power_dbm: tuple = (30.0,)
    distances: tuple = (200.0, 300.0, 400.0)
    pathloss_exponent: float = 3.76
    reference_gain_db: float = -35.3
    psi: float = 1.0
    penalty_weight: float = 10.0
    latency_cap: float = 10.0
    header_bits: float = 0.0
    horizon: int = 1
    shared_catalog: bool = False
    catalog_seed: int = 0
    layout: CatalogLayout = field(default_factory=CatalogLayout)
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    sca: ScaOptions = field(default_factory=ScaOptions)

    def __post_init__(self):
        object.__setattr__(self, "tx_power_dbm", tuple(np.atleast_1d(self.tx_power_dbm).astype(float)))
        object.__setattr__(self, "distances", tuple(np.atleast_1d(self.distances).astype(float)))
        if self.num_sus < 1 or self.num_antennas < 1:
            raise ConfigurationError("need num_sus >= 1 and num_antennas >= 1")
        if len(self.tx_power_dbm) not in (1, self.num_sus):
            raise ConfigurationError("tx_power_dbm needs one value or one per SU")
        if len(self.distances) != self.num_sus:
            raise ConfigurationError(f"{len(self.distances)} distances for {self.num_sus} SUs")
        if self.latency_cap <= 0 or self.horizon < 1 or self.penalty_weight < 0 or self.psi < 0:
            raise ConfigurationError("latency_cap, horizon must be positive; psi, penalty_weight >= 0")

    @property
    def powers_w(self) -> np.ndarray:
        return np.broadcast_to(dbm_to_watts(self.tx_power_dbm), (self.num_sus,)).copy()

    def with_num_sus(self, K: int) -> "EnvConfig":
        """Resize, spreading distances evenly over the current range."""
        lo, hi = min(self.distances), max(self.distances)
        d = tuple(np.linspace(lo, hi, K)) if K > 1 else (lo,)
        p = self.tx_power_dbm if len(self.tx_power_dbm) == 1 else (self.tx_power_dbm[0],)
        return replace(self, num_sus=K, distances=d, tx_power_dbm=p)

    def with_su_power(self, k: int, dbm: float) -> "EnvConfig":
        p = list(np.broadcast_to(self.tx_power_dbm, (self.num_sus,)))
        p[k] = float(dbm)
        return replace(self, tx_power_dbm=tuple(p))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tx_power_dbm"] = list(self.tx_power_dbm)
        d["distances"] = list(self.distances)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        if "layout" in d:
            d["layout"] = CatalogLayout(**{k: tuple(v) if isinstance(v, list) else v
                                           for k, v in d["layout"].items()})
        if "surrogate" in d:
            d["surrogate"] = SurrogateParams.from_dict(d["surrogate"])
        if "sca" in d:
            d["sca"] = ScaOptions(**d["sca"])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigurationError(f"unknown environment keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_scenario(cls, scenario: NetworkScenario, **overrides) -> "EnvConfig":
        """Template taken from a scenario file; channels are still redrawn every step."""
        from .channel import watts_to_dbm, whz_to_dbmhz
        base = dict(num_sus=scenario.num_sus, num_antennas=scenario.num_antennas,
                    bandwidth=scenario.bandwidth,
                    noise_psd_dbm_hz=float(whz_to_dbmhz(scenario.noise_psd)),
                    tx_power_dbm=tuple(float(x) for x in watts_to_dbm(scenario.tx_power)),
                    distances=tuple(float(x) for x in scenario.distances), psi=scenario.weight)
        base.update(overrides)
        return cls(**base)


def weighted_ll(lpips_total: float, latency: float, psi: float) -> float:
    """LPIPS sum plus psi times latency (lower is better)."""
    return float(lpips_total + psi * latency)


metric_weighted_ll = weighted_ll


@dataclass
class EpisodeRecord:
    state: np.ndarray
    selections: list
    order: DecodingOrder
    beamformers: np.ndarray
    demands: np.ndarray
    rates: np.ndarray
    lpips: np.ndarray
    lpips_sum: float
    latency: float
    latency_term: float
    penalty: float
    violations: int
    reward: float
    selection_ratio: np.ndarray
    next_state: np.ndarray | None = None

    def recompute_reward(self, psi: float) -> float:
        return -(self.lpips_sum + psi * self.latency_term) - self.penalty


def location_order(distances) -> DecodingOrder:
    """Ascending distance; equal distances keep index order."""
    return DecodingOrder(tuple(int(k) for k in np.argsort(np.asarray(distances), kind="stable")))


def beams_from_vector(z, K: int, Z: int) -> np.ndarray:
    """Squash a real vector with tanh and reshape into K unit-norm complex combiners."""
    a = np.tanh(np.asarray(z, dtype=float)).reshape(K, 2, Z)
    w = a[:, 0, :] + 1j * a[:, 1, :]
    n = np.linalg.norm(w, axis=1, keepdims=True)
    w = np.where(n > 1e-12, w / np.where(n > 1e-12, n, 1.0), 1.0 / math.sqrt(Z))
    return w


class SemanticNomaEnv:
    """Fixed geometry and catalog, fresh Rayleigh channels every step."""

    def __init__(self, config: EnvConfig, scheme: str = "IM-PPO", seed: int = 0,
                 catalog: FeatureCatalog | None = None):
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        K = config.num_sus
        if scheme == "PLAIN-PPO" and K > PLAIN_PPO_MAX_SUS:
            raise ConfigurationError(f"PLAIN-PPO supports at most {PLAIN_PPO_MAX_SUS} SUs (K! head)")
        self.config = config
        self.scheme = scheme
        self.catalog = catalog or synthesize_catalog(
            config.catalog_seed, config.layout, num_sus=K, shared=config.shared_catalog)
        if self.catalog.num_sus != K:
            raise ConfigurationError(f"catalog has {self.catalog.num_sus} SUs, config has {K}")
        self.rng = np.random.default_rng(seed)
        self._random_rng = np.random.default_rng([seed, 1])
        self.permutations = list(itertools.permutations(range(K))) if scheme == "PLAIN-PPO" else []
        self.n_features = [su.num_features for su in self.catalog]
        self.offsets = np.concatenate([[0], np.cumsum(self.n_features)])
        pruned = scheme in ("IM-PPO", "LOCATION")
        self.candidates = [su.pruned_mask() if pruned else su.full_mask() for su in self.catalog]
        self.prev_order = DecodingOrder(tuple(range(K)))
        self.steps = 0
        self.scenario = self._draw()
        self.beams = worst_case_beamformers(self.scenario)

    # -- spaces ----------------------------------------------------------

    @property
    def candidate_mask(self) -> np.ndarray:
        return np.concatenate(self.candidates)

    @property
    def action_space(self) -> ActionSpace:
        K, Z = self.config.num_sus, self.config.num_antennas
        if self.scheme == "PLAIN-PPO":
            return ActionSpace(int(self.offsets[-1]), len(self.permutations), 2 * K * Z)
        return ActionSpace(int(self.offsets[-1]))

    @property
    def state_dim(self) -> int:
        return len(self.observe())

    # -- dynamics ----------------------------------------------------------

    def _draw(self) -> NetworkScenario:
        c = self.config
        h = rayleigh_channels(self.rng, c.distances, c.num_antennas, c.pathloss_exponent,
                              c.reference_gain_db)
        return NetworkScenario(channels=h, bandwidth=c.bandwidth,
                               noise_psd=float(dbmhz_to_whz(c.noise_psd_dbm_hz)),
                               tx_power=c.powers_w, distances=np.array(c.distances),
                               weight=c.psi)

    def observe(self) -> np.ndarray:
        """Channel gains (dB/20 over noise) under worst-case combiners, order, candidate stats."""
        G = gain_matrix(self.scenario, self.beams) / self.scenario.noise_power
        gains = 10.0 * np.log10(G + 1e-12) / 20.0
        K = self.config.num_sus
        order = self.prev_order.positions / max(K - 1, 1)
        desc = []
        for su, cand in zip(self.catalog, self.candidates):
            desc.append(np.where(cand, su.importance, 0.0))
            desc.append(np.where(cand, su.sizes / 1e6, 0.0))
        return np.concatenate([gains.ravel(), order, *desc])

    def split_bits(self, bits) -> list:
        bits = np.asarray(bits, dtype=bool)
        return [bits[self.offsets[k]:self.offsets[k + 1]] for k in range(self.config.num_sus)]

    def random_selection(self) -> np.ndarray:
        return (self._random_rng.random(int(self.offsets[-1])) < 0.5) & self.candidate_mask

    def all_selection(self) -> np.ndarray:
        return self.candidate_mask.copy()

    def step(self, bits, action: Action | None = None) -> EpisodeRecord:
        """Score one selection under the current channels, then redraw them."""
        c = self.config
        K = c.num_sus
        bits = np.asarray(bits, dtype=bool)
        if bits.shape != (int(self.offsets[-1]),):
            raise ConfigurationError("selection vector has the wrong length")
        if np.any(bits & ~self.candidate_mask):
            raise ConfigurationError("selection includes features outside the candidate set")
        sels = self.split_bits(bits)
        q = np.array([traffic_demand(s, self.catalog, k, c.header_bits) for k, s in enumerate(sels)])

        if self.scheme == "PLAIN-PPO":
            if action is None:
                raise ConfigurationError("PLAIN-PPO steps need the full policy action")
            beams = beams_from_vector(action.continuous, K, c.num_antennas)
            order = DecodingOrder(self.permutations[action.choice])
        else:
            beams = self.beams
            if self.scheme == "LOCATION":
                order = location_order(c.distances)
            else:
                order = sca_decoding(self.scenario, beams, q, c.sca).order
        rates = capacities(self.scenario, beams, order.matrix)
        latency = system_latency(q, rates)
        violations = 0
        if not math.isfinite(latency):
            violations += 1
        else:
            violations += int(np.sum(q > rates * latency * (1 + 1e-9)))
        latency_term = min(latency, c.latency_cap)
        lp = lpips_scores(sels, self.catalog, c.surrogate)
        lp_sum = float(lp.sum())
        penalty = c.penalty_weight * violations
        reward = -(lp_sum + c.psi * latency_term) - penalty
        ratio = np.array([s.sum() / max(int(cand.sum()), 1) for s, cand in zip(sels, self.candidates)])
        state = self.observe()
        self.prev_order = order
        self.steps += 1
        self.scenario = self._draw()
        self.beams = worst_case_beamformers(self.scenario)
        return EpisodeRecord(state=state, selections=sels, order=order, beamformers=beams,
                             demands=q, rates=rates, lpips=lp, lpips_sum=lp_sum, latency=latency,
                             latency_term=latency_term, penalty=penalty, violations=violations,
                             reward=reward, selection_ratio=ratio, next_state=self.observe())


def env_step(env: SemanticNomaEnv, bits, action: Action | None = None) -> tuple:
    rec = env.step(bits, action)
    return rec, rec.next_state


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    scheme: str
    agent: Agent | None
    curve: list
    diverged: bool = False

    @property
    def rewards(self) -> np.ndarray:
        return np.array([row["reward"] for row in self.curve])


def _streams(seed: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def make_agent(env: SemanticNomaEnv, hyper: PpoHyper, seed: int) -> Agent:
    return Agent(env.state_dim, env.action_space, hyper, seed=seed)


def train(config: EnvConfig, scheme: str, episodes: int, seed: int = 0,
          hyper: PpoHyper | None = None, curve_path=None, checkpoint_path=None,
          catalog: FeatureCatalog | None = None) -> TrainResult:
    """Run the learning loop for ``episodes`` episodes of ``config.horizon`` steps.

    Non-learned schemes just roll their fixed policy so curves are comparable.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    if episodes < 0:
        raise ConfigurationError("episodes must be >= 0")
    hyper = hyper or PpoHyper()
    env_seed = int(np.random.SeedSequence(seed).generate_state(1)[0])
    env = SemanticNomaEnv(config, scheme, seed=env_seed, catalog=catalog)
    act_rng, upd_rng, _ = _streams(seed)
    learned = scheme in LEARNED or scheme == "LOCATION"
    agent = make_agent(env, hyper, seed) if learned else None
    buffer = RolloutBuffer()
    curve = []
    diag = {"policy_loss": math.nan, "value_loss": math.nan, "clip_fraction": math.nan,
            "approx_kl": math.nan}
    mask = env.candidate_mask
    diverged = False
    for ep in range(episodes):
        ep_reward = ep_lp = ep_lat = ep_pen = 0.0
        for t in range(config.horizon):
            state = env.observe()
            if agent is not None:
                action = agent.act(state, mask, act_rng)
                value = float(agent.value(state)[0])
                rec = env.step(action.bits, action)
                buffer.add(state, mask, action, rec.reward, value, done=t == config.horizon - 1)
            else:
                bits = env.all_selection() if scheme == "ALL" else env.random_selection()
                rec = env.step(bits)
            ep_reward += rec.reward
            ep_lp += rec.lpips_sum
            ep_lat += rec.latency_term
            ep_pen += rec.penalty
        if agent is not None and len(buffer) >= hyper.rollout_length:
            buffer.last_value = 0.0
            out = ppo_update(agent, buffer, upd_rng, hyper)
            buffer.clear()
            if out["aborted"]:
                log.warning("non-finite loss at episode %d; keeping last good parameters", ep)
                diverged = True
            else:
                diag = out
        curve.append({"episode": ep, "reward": ep_reward, "lpips_sum": ep_lp, "latency": ep_lat,
                      "penalty": ep_pen, **{k: diag[k] for k in
                                            ("policy_loss", "value_loss", "clip_fraction", "approx_kl")}})
        if diverged:
            break
    if curve_path is not None:
        write_csv(curve_path, CURVE_COLUMNS, curve)
    if checkpoint_path is not None and agent is not None:
        save_checkpoint(checkpoint_path, agent, extra={"scheme": scheme, "episodes": len(curve),
                                                       "env": config.to_dict()})
    return TrainResult(scheme, agent, curve, diverged)


# ---------------------------------------------------------------------------
# Evaluation / baselines
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    scheme: str
    records: list
    psi: float = 1.0

    def _mean(self, attr) -> float:
        return float(np.mean([getattr(r, attr) for r in self.records]))

    @property
    def weighted_ll(self) -> float:
        psi = self.psi
        return float(np.mean([weighted_ll(r.lpips_sum, r.latency_term, psi) for r in self.records]))

    @property
    def latency(self) -> float:
        return self._mean("latency_term")

    @property
    def lpips_sum(self) -> float:
        return self._mean("lpips_sum")

    @property
    def reward(self) -> float:
        return self._mean("reward")

    @property
    def penalty(self) -> float:
        return self._mean("penalty")

    @property
    def lpips_per_su(self) -> np.ndarray:
        return np.mean([r.lpips for r in self.records], axis=0)

    @property
    def ratio_per_su(self) -> np.ndarray:
        return np.mean([r.selection_ratio for r in self.records], axis=0)

    def ratio_by_position(self) -> np.ndarray:
        """Mean selection ratio of the SU decoded at each SIC position."""
        per = np.array([r.selection_ratio[list(r.order.sequence)] for r in self.records])
        return per.mean(axis=0)

    def summary(self) -> dict:
        return {"scheme": self.scheme, "weighted_ll": self.weighted_ll, "latency": self.latency,
                "lpips_sum": self.lpips_sum, "reward": self.reward, "penalty": self.penalty,
                "lpips_per_su": ";".join(f"{x:.6g}" for x in self.lpips_per_su),
                "ratio_per_su": ";".join(f"{x:.6g}" for x in self.ratio_per_su)}


def run_baseline(config: EnvConfig, scheme: str, episodes: int, seed: int = 0,
                 agent: Agent | None = None, greedy: bool = True,
                 catalog: FeatureCatalog | None = None) -> EvalResult:
    """Evaluate a scheme on ``episodes`` fresh channel draws from ``seed``.

    Learned schemes need ``agent``.  LOCATION uses ``agent``'s selections when
    given (trained under pruning), otherwise ALL selections.
    """
    env = SemanticNomaEnv(config, scheme, seed=seed, catalog=catalog)
    if scheme in LEARNED and agent is None:
        raise ConfigurationError(f"scheme {scheme} needs a trained agent")
    if agent is not None and scheme in LEARNED + ("LOCATION",):
        if agent.space.num_bits != env.action_space.num_bits:
            raise ConfigurationError("agent action space does not match the environment")
    act_rng = np.random.default_rng([seed, 2])
    mask = env.candidate_mask
    records = []
    for _ in range(episodes):
        state = env.observe()
        action = None
        if scheme == "ALL" or (scheme == "LOCATION" and agent is None):
            bits = env.all_selection()
        elif scheme == "RANDOM":
            bits = env.random_selection()
        else:
            action = agent.act(state, mask, act_rng, greedy=greedy)
            bits = action.bits
        records.append(env.step(bits, action if scheme == "PLAIN-PPO" else None))
    return EvalResult(scheme, records, psi=config.psi)


evaluate = run_baseline


def plateau_episode(rewards, window: int = 100, band: float = 0.05) -> int:
    """First episode whose trailing ``window`` mean is within ``band`` of the final window mean."""
    r = np.asarray(rewards, dtype=float)
    if len(r) < window:
        raise ConfigurationError(f"need at least {window} episodes to locate a plateau")
    final = r[-window:].mean()
    csum = np.concatenate([[0.0], np.cumsum(r)])
    ma = (csum[window:] - csum[:-window]) / window
    tol = band * abs(final)
    hits = np.nonzero(np.abs(ma - final) <= tol)[0]
    return int(hits[0] + window - 1)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def config_at(config: EnvConfig, axis: str, value: float) -> EnvConfig:
    if axis == "bandwidth":
        return replace(config, bandwidth=float(value))
    if axis == "num_sus":
        return config.with_num_sus(int(value))
    if axis == "su_power":
        return config.with_su_power(config.num_sus - 1, float(value))
    raise ConfigurationError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def _sweep_job(args) -> list:
    config, axis, value, schemes, seed, episodes, eval_episodes, hyper = args
    cfg = config_at(config, axis, value)
    rows = []
    agents = {}
    eval_seed = 10_000 + seed

    def agent_for(scheme):
        if scheme not in agents:
            agents[scheme] = train(cfg, scheme, episodes, seed, hyper).agent
        return agents[scheme]

    for scheme in schemes:
        if scheme in LEARNED:
            res = run_baseline(cfg, scheme, eval_episodes, eval_seed, agent_for(scheme))
        elif scheme == "LOCATION":
            res = run_baseline(cfg, scheme, eval_episodes, eval_seed, agent_for("IM-PPO"))
        else:
            res = run_baseline(cfg, scheme, eval_episodes, eval_seed)
        rows.append({"schema": SWEEP_SCHEMA, "axis": axis, "value": value, "seed": seed,
                     **res.summary()})
    return rows


def sweep(config: EnvConfig, axis: str, values, schemes=("IM-PPO", "ALL", "RANDOM", "LOCATION"),
          seeds=(0,), episodes: int = 1000, eval_episodes: int = 200,
          hyper: PpoHyper | None = None, jobs: int = 1, out=None) -> list:
    """Train/evaluate every scheme at every (value, seed); one row per combination."""
    values = list(values)
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {s!r}")
    hyper = hyper or PpoHyper()
    jobs_args = [(config, axis, v, tuple(schemes), int(s), episodes, eval_episodes, hyper)
                 for v in values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_job, jobs_args))
    else:
        chunks = [_sweep_job(a) for a in jobs_args]
    rows = [r for chunk in chunks for r in chunk]
    if out is not None:
        write_csv(out, SWEEP_COLUMNS, rows)
    return rows


def order_switch_scan(config: EnvConfig, powers_dbm, seed: int = 0, su: int | None = None,
                      selection: str = "ALL") -> list:
    """Optimal order per transmit power of one SU on a single fixed channel draw.

    Returns rows ``(power, sca_order, sca_latency, brute_order, brute_latency)``.
    """
    su = config.num_sus - 1 if su is None else su
    base = SemanticNomaEnv(config, "ALL", seed=seed)
    h = base.scenario.channels
    bits = base.all_selection() if selection == "ALL" else base.random_selection()
    q = np.array([traffic_demand(s, base.catalog, k, config.header_bits)
                  for k, s in enumerate(base.split_bits(bits))])
    rows = []
    for p in powers_dbm:
        cfg = config.with_su_power(su, p)
        scen = base.scenario.replace(channels=h, tx_power=cfg.powers_w)
        w = worst_case_beamformers(scen)
        res = sca_decoding(scen, w, q, config.sca)
        bf, bt = brute_force_order(scen, w, q)
        rows.append({"power_dbm": float(p), "sca_order": res.order, "sca_latency": res.latency,
                     "brute_order": bf, "brute_latency": bt})
    return rows


def write_csv(path, columns, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})


def read_csv(path) -> list:
    with open(Path(path), newline="") as fh:
        return list(csv.DictReader(fh))


__all__ = [
    "EnvConfig", "EpisodeRecord", "EvalResult", "SCHEMES", "SemanticNomaEnv",
    "TrainResult", "env_step", "evaluate", "location_order", "metric_weighted_ll",
    "order_switch_scan", "plateau_episode", "run_baseline", "sweep", "train", "weighted_ll",
]
