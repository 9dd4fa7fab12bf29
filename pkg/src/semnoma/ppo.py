"""Proximal policy optimization in plain numpy.

The actor emits one logit per binary feature (independent Bernoulli heads),
optionally a categorical head and a diagonal-Gaussian head whose log standard
deviations are free parameters.  The critic is a separate MLP.  All gradients
are analytic; see ``tests/test_ppo.py`` for the finite-difference checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointVersionError, ConfigurationError, NumericalError

CHECKPOINT_VERSION = 1
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PpoHyper:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 10
    minibatch: int = 64
    entropy_coef: float = 0.01
    rollout_length: int = 2048
    hidden: tuple = (128, 128)
    optimizer: str = "adam"
    init_log_std: float = -0.5

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0 < self.clip < 1:
            raise ConfigurationError("clip must lie in (0, 1)")
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise ConfigurationError("gamma and lam must lie in (0, 1]")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.epochs < 1 or self.minibatch < 1 or self.rollout_length < 1:
            raise ConfigurationError("epochs, minibatch and rollout_length must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PpoHyper":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


class Mlp:
    """tanh hidden layers, linear output.  ``params`` alternates weights and biases."""

    def __init__(self, sizes, rng: np.random.Generator | None = None, out_scale: float = 0.01,
                 params=None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ConfigurationError("an MLP needs at least input and output sizes")
        if params is not None:
            self.params = [np.array(p, dtype=float) for p in params]
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            self.params = []
            n_layers = len(self.sizes) - 1
            for i, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
                scale = out_scale if i == n_layers - 1 else 1.0
                self.params.append(rng.standard_normal((a, b)) * scale / math.sqrt(a))
                self.params.append(np.zeros(b))
        self._check()

    def _check(self):
        for i, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if self.params[2 * i].shape != (a, b) or self.params[2 * i + 1].shape != (b,):
                raise ConfigurationError("MLP parameter shapes do not match layer sizes")
            if not (np.all(np.isfinite(self.params[2 * i]))
                    and np.all(np.isfinite(self.params[2 * i + 1]))):
                raise NumericalError("non-finite MLP parameters")

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise ConfigurationError(f"input has {x.shape[1]} features, network expects {self.sizes[0]}")
        acts = [x]
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            z = acts[-1] @ self.params[2 * i] + self.params[2 * i + 1]
            acts.append(np.tanh(z) if i < n_layers - 1 else z)
        return acts[-1], acts

    def backward(self, acts, d_out) -> list:
        grads = [None] * len(self.params)
        delta = d_out
        n_layers = len(self.sizes) - 1
        for i in reversed(range(n_layers)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[2 * i].T) * (1.0 - acts[i] ** 2)
        return grads


class Adam:
    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> list:
        return [self.t] + [a.copy() for a in self.m + self.v]


class Sgd:
    def __init__(self, params, lr: float):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def _make_optimizer(kind: str, params, lr: float):
    return Adam(params, lr) if kind == "adam" else Sgd(params, lr)


# ---------------------------------------------------------------------------
# Action distribution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionSpace:
    """``num_bits`` Bernoulli heads, an optional categorical head, an optional Gaussian head."""

    num_bits: int
    num_choices: int = 0
    num_continuous: int = 0

    @property
    def output_dim(self) -> int:
        return self.num_bits + self.num_choices + self.num_continuous

    def split(self, out):
        a = self.num_bits
        b = a + self.num_choices
        return out[:, :a], out[:, a:b], out[:, b:]


@dataclass
class Action:
    bits: np.ndarray
    choice: int = 0
    continuous: np.ndarray = field(default_factory=lambda: np.zeros(0))
    log_prob: float = 0.0


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def _log_softmax(x):
    m = x.max(axis=1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=1, keepdims=True))


def head_terms(out, space: ActionSpace, masks, bits, choices, cont, log_std):
    """Log-probabilities, entropies and their derivatives w.r.t. the head outputs.

    Returns ``(logp, ent, dlogp_dout, dent_dout, dlogp_dlogstd, dent_dlogstd)``.
    """
    N = out.shape[0]
    logits, cat, mean = space.split(out)
    masks = np.asarray(masks, dtype=float).reshape(N, space.num_bits)
    bits = np.asarray(bits, dtype=float).reshape(N, space.num_bits)
    d_logp = np.zeros_like(out)
    d_ent = np.zeros_like(out)

    ls_pos, ls_neg = _log_sigmoid(logits), _log_sigmoid(-logits)
    prob = np.exp(ls_pos)
    logp = (masks * (bits * ls_pos + (1.0 - bits) * ls_neg)).sum(axis=1)
    ent_bits = -(prob * ls_pos + (1.0 - prob) * ls_neg)
    ent = (masks * ent_bits).sum(axis=1)
    nb = space.num_bits
    d_logp[:, :nb] = masks * (bits - prob)
    d_ent[:, :nb] = masks * (-logits * prob * (1.0 - prob))

    if space.num_choices:
        lsm = _log_softmax(cat)
        p = np.exp(lsm)
        idx = np.asarray(choices, dtype=int).reshape(N)
        logp = logp + lsm[np.arange(N), idx]
        h = -(p * lsm).sum(axis=1)
        ent = ent + h
        onehot = np.zeros_like(p)
        onehot[np.arange(N), idx] = 1.0
        sl = slice(nb, nb + space.num_choices)
        d_logp[:, sl] = onehot - p
        d_ent[:, sl] = -p * (lsm + h[:, None])

    d_logp_ls = np.zeros((N, space.num_continuous))
    d_ent_ls = np.zeros((N, space.num_continuous))
    if space.num_continuous:
        z = np.asarray(cont, dtype=float).reshape(N, space.num_continuous)
        std = np.exp(log_std)
        u = (z - mean) / std
        logp = logp + (-0.5 * u ** 2 - log_std - 0.5 * _LOG_2PI).sum(axis=1)
        ent = ent + float(np.sum(log_std + 0.5 * (1.0 + _LOG_2PI)))
        d_logp[:, nb + space.num_choices:] = u / std
        d_logp_ls = u ** 2 - 1.0
        d_ent_ls = np.ones((N, space.num_continuous))
    return logp, ent, d_logp, d_ent, d_logp_ls, d_ent_ls


def policy_forward(network: Mlp, state, mask, space: ActionSpace | None = None) -> np.ndarray:
    """Per-candidate selection probabilities; masked-out candidates get exactly 0."""
    out, _ = network.forward(state)
    nb = space.num_bits if space else out.shape[1]
    mask = np.asarray(mask, dtype=bool).reshape(out.shape[0], nb)
    p = _sigmoid(out[:, :nb])
    p = np.where(mask, p, 0.0)
    return p[0] if np.ndim(state) == 1 else p


def sample_action(probabilities, rng: np.random.Generator) -> tuple:
    """Independent Bernoulli draw; returns (bits, joint log-probability)."""
    p = np.asarray(probabilities, dtype=float)
    bits = rng.random(p.shape) < p
    with np.errstate(divide="ignore"):
        terms = np.where(bits, np.log(p), np.log1p(-p))
    return bits, float(terms.sum())


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def clipped_objective_weights(ratio, adv, clip: float) -> np.ndarray:
    """d(min(r A, clip(r) A)) / d(log r) per sample: ``r A`` where unclipped, else 0."""
    r = np.asarray(ratio, dtype=float)
    a = np.asarray(adv, dtype=float)
    clipped = ((a > 0) & (r > 1.0 + clip)) | ((a < 0) & (r < 1.0 - clip))
    return np.where(clipped, 0.0, r * a)


def policy_loss_and_grad(agent: "Agent", batch: dict, clip: float, entropy_coef: float):
    """Clipped-surrogate loss minus entropy bonus, with gradients for actor params + log_std."""
    out, acts = agent.actor.forward(batch["states"])
    logp, ent, d_logp, d_ent, d_logp_ls, d_ent_ls = head_terms(
        out, agent.space, batch["masks"], batch["bits"], batch["choices"],
        batch["continuous"], agent.log_std)
    N = out.shape[0]
    adv = batch["advantages"]
    ratio = np.exp(logp - batch["log_probs"])
    surr = np.minimum(ratio * adv, np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv)
    loss = -surr.mean() - entropy_coef * ent.mean()
    g_logp = -clipped_objective_weights(ratio, adv, clip) / N
    g_ent = -entropy_coef / N
    d_out = g_logp[:, None] * d_logp + g_ent * d_ent
    grads = agent.actor.backward(acts, d_out)
    g_log_std = (g_logp[:, None] * d_logp_ls + g_ent * d_ent_ls).sum(axis=0)
    info = {
        "policy_loss": float(-surr.mean()),
        "entropy": float(ent.mean()),
        "approx_kl": float(np.mean(batch["log_probs"] - logp)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip)),
    }
    return float(loss), grads + [g_log_std], info


def value_loss_and_grad(critic: Mlp, states, returns):
    v, acts = critic.forward(states)
    err = v[:, 0] - np.asarray(returns, dtype=float)
    loss = float(np.mean(err ** 2))
    grads = critic.backward(acts, (2.0 * err / len(err))[:, None])
    return loss, grads


# ---------------------------------------------------------------------------
# Advantages + buffer
# ---------------------------------------------------------------------------


def gae_advantages(rewards, values, dones, last_value: float, gamma: float, lam: float):
    """Reverse-recursive GAE; returns (raw advantages, returns)."""
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=float)
    n = len(r)
    adv = np.zeros(n)
    running = 0.0
    for t in reversed(range(n)):
        next_v = last_value if t == n - 1 else v[t + 1]
        alive = 1.0 - d[t]
        delta = r[t] + gamma * next_v * alive - v[t]
        running = delta + gamma * lam * alive * running
        adv[t] = running
    return adv, adv + v


def normalize_advantages(adv) -> np.ndarray:
    adv = np.asarray(adv, dtype=float)
    centred = adv - adv.mean()
    sd = centred.std()
    return centred / sd if sd > 1e-8 else centred


class RolloutBuffer:
    _fields = ("states", "masks", "bits", "choices", "continuous", "log_probs",
               "rewards", "values", "dones")

    def __init__(self):
        self._data = {f: [] for f in self._fields}
        self.last_value = 0.0

    def __len__(self) -> int:
        return len(self._data["rewards"])

    def add(self, state, mask, action: Action, reward: float, value: float, done: bool = True):
        if not math.isfinite(action.log_prob):
            raise NumericalError("non-finite log-probability in rollout")
        for key, val in (("states", state), ("masks", mask), ("bits", action.bits),
                         ("choices", action.choice), ("continuous", action.continuous),
                         ("log_probs", action.log_prob), ("rewards", reward),
                         ("values", value), ("dones", done)):
            self._data[key].append(np.asarray(val, dtype=float))

    def batch(self) -> dict:
        out = {k: np.array(v) for k, v in self._data.items()}
        out["choices"] = out["choices"].astype(int)
        return out

    def clear(self):
        for v in self._data.values():
            v.clear()


# ---------------------------------------------------------------------------
# Agent
# ---------------------------------------------------------------------------


class Agent:
    def __init__(self, state_dim: int, space: ActionSpace, hyper: PpoHyper | None = None,
                 seed: int = 0):
        self.hyper = hyper or PpoHyper()
        self.space = space
        self.state_dim = int(state_dim)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        h = self.hyper.hidden
        self.actor = Mlp((state_dim, *h, space.output_dim), rng)
        self.critic = Mlp((state_dim, *h, 1), rng, out_scale=1.0)
        self.log_std = np.full(space.num_continuous, self.hyper.init_log_std)
        self._reset_optimizers()

    def _reset_optimizers(self):
        self.actor_opt = _make_optimizer(self.hyper.optimizer, self.actor_params,
                                         self.hyper.actor_lr)
        self.critic_opt = _make_optimizer(self.hyper.optimizer, self.critic.params,
                                          self.hyper.critic_lr)

    @property
    def actor_params(self) -> list:
        return self.actor.params + [self.log_std]

    def parameters(self) -> list:
        return self.actor_params + self.critic.params

    def value(self, states) -> np.ndarray:
        return self.critic.forward(states)[0][:, 0]

    def probabilities(self, state, mask) -> np.ndarray:
        return policy_forward(self.actor, state, mask, self.space)

    def act(self, state, mask, rng: np.random.Generator, greedy: bool = False) -> Action:
        out, _ = self.actor.forward(state)
        logits, cat, mean = self.space.split(out)
        mask = np.asarray(mask, dtype=bool).reshape(self.space.num_bits)
        p = np.where(mask, _sigmoid(logits[0]), 0.0)
        bits = (p > 0.5) if greedy else (rng.random(p.shape) < p)
        choice = 0
        if self.space.num_choices:
            probs = np.exp(_log_softmax(cat))[0]
            choice = int(np.argmax(probs)) if greedy else int(rng.choice(len(probs), p=probs))
        z = mean[0].copy()
        if self.space.num_continuous and not greedy:
            z = z + np.exp(self.log_std) * rng.standard_normal(self.space.num_continuous)
        logp = head_terms(out, self.space, mask[None], bits[None], [choice], z[None],
                          self.log_std)[0][0]
        return Action(bits=bits, choice=choice, continuous=z, log_prob=float(logp))


def ppo_update(agent: Agent, buffer, rng: np.random.Generator, hyper: PpoHyper | None = None,
               advantages=None) -> dict:
    """Run the configured epochs of minibatch PPO on one buffer.

    On a non-finite loss the parameters are restored and ``aborted`` is set.
    """
    hyper = hyper or agent.hyper
    batch = buffer.batch() if isinstance(buffer, RolloutBuffer) else dict(buffer)
    last_value = buffer.last_value if isinstance(buffer, RolloutBuffer) else batch.get("last_value", 0.0)
    N = len(batch["rewards"])
    diag = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0,
            "clip_fraction": 0.0, "updates": 0, "aborted": False}
    if N == 0:
        return diag
    if advantages is None:
        raw, returns = gae_advantages(batch["rewards"], batch["values"], batch["dones"],
                                      last_value, hyper.gamma, hyper.lam)
    else:
        raw = np.asarray(advantages, dtype=float)
        returns = raw + batch["values"]
    batch["advantages"] = normalize_advantages(raw)
    batch["returns"] = returns

    snapshot = [p.copy() for p in agent.parameters()]
    sums = {k: 0.0 for k in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_fraction")}
    steps = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(N)
        for start in range(0, N, hyper.minibatch):
            idx = order[start:start + hyper.minibatch]
            mb = {k: v[idx] for k, v in batch.items() if isinstance(v, np.ndarray) and len(v) == N}
            loss, grads, info = policy_loss_and_grad(agent, mb, hyper.clip, hyper.entropy_coef)
            v_loss, v_grads = value_loss_and_grad(agent.critic, mb["states"], mb["returns"])
            finite = math.isfinite(loss) and math.isfinite(v_loss) and all(
                np.all(np.isfinite(g)) for g in grads + v_grads)
            if not finite:
                for p, s in zip(agent.parameters(), snapshot):
                    p[...] = s
                diag.update({k: sums[k] / max(steps, 1) for k in sums})
                diag.update(updates=steps, aborted=True, nonfinite_loss=loss)
                return diag
            agent.actor_opt.step(agent.actor_params, grads)
            agent.critic_opt.step(agent.critic.params, v_grads)
            for k in ("policy_loss", "entropy", "approx_kl", "clip_fraction"):
                sums[k] += info[k]
            sums["value_loss"] += v_loss
            steps += 1
    diag.update({k: sums[k] / steps for k in sums})
    diag["updates"] = steps
    return diag


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, agent: Agent, extra: dict | None = None) -> None:
    """Versioned ``.npz`` with every parameter tensor plus JSON metadata."""
    meta = {
        "hyper": agent.hyper.to_dict(),
        "space": asdict(agent.space),
        "state_dim": agent.state_dim,
        "seed": agent.seed,
        "extra": extra or {},
    }
    arrays = {"format_version": np.array(CHECKPOINT_VERSION), "meta": np.array(json.dumps(meta))}
    for i, p in enumerate(agent.actor.params):
        arrays[f"actor_{i}"] = p
    for i, p in enumerate(agent.critic.params):
        arrays[f"critic_{i}"] = p
    arrays["log_std"] = agent.log_std
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple:
    """Returns ``(agent, extra)``; raises :class:`CheckpointVersionError` on a version mismatch."""
    with np.load(Path(path), allow_pickle=False) as data:
        if "format_version" not in data.files:
            raise CheckpointVersionError(f"{path} has no format version")
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")
        meta = json.loads(str(data["meta"]))
        hyper = PpoHyper.from_dict(meta["hyper"])
        space = ActionSpace(**meta["space"])
        agent = Agent(meta["state_dim"], space, hyper, seed=meta["seed"])
        n_a = len(agent.actor.params)
        n_c = len(agent.critic.params)
        agent.actor = Mlp(agent.actor.sizes, params=[data[f"actor_{i}"] for i in range(n_a)])
        agent.critic = Mlp(agent.critic.sizes, params=[data[f"critic_{i}"] for i in range(n_c)])
        agent.log_std = np.array(data["log_std"], dtype=float)
        agent._reset_optimizers()
    return agent, meta["extra"]
