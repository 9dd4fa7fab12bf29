"""Train IM-PPO, M-PPO and Plain-PPO on the default scenario and compare plateaus.

Writes curve_<scheme>.csv to the working directory; plot with any CSV tool.
Takes roughly ten minutes on one core at 3000 episodes.
"""
import sys

from semnoma.orchestrator import EnvConfig, plateau_episode, train
from semnoma.ppo import PpoHyper

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
hyper = PpoHyper(rollout_length=32, minibatch=8)
cfg = EnvConfig()

random_mean = train(cfg, "RANDOM", 300, seed=0).rewards.mean()
print(f"random selection mean reward {random_mean:.3f}")
for scheme in ("IM-PPO", "M-PPO", "PLAIN-PPO"):
    res = train(cfg, scheme, episodes, seed=0, hyper=hyper, curve_path=f"curve_{scheme}.csv")
    r = res.rewards
    print(f"{scheme:10s} final-100 mean {r[-100:].mean():.3f}  plateau at episode {plateau_episode(r)}")
