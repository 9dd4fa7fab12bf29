"""Weighted-LL across bandwidths for IM-PPO and the three baselines.

Long-format rows go to sweep_bandwidth.csv.  Use fewer episodes for a quick look:
    python3 notebooks/03_bandwidth_sweep.py 300
"""
import sys
from collections import defaultdict

import numpy as np

from semnoma.orchestrator import EnvConfig, sweep
from semnoma.ppo import PpoHyper

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
rows = sweep(EnvConfig(), "bandwidth", [1e6, 2e6, 3e6, 4e6, 5e6],
             schemes=("IM-PPO", "ALL", "RANDOM", "LOCATION"), seeds=(0, 1, 2),
             episodes=episodes, eval_episodes=200,
             hyper=PpoHyper(rollout_length=32, minibatch=8), out="sweep_bandwidth.csv")

table = defaultdict(list)
for r in rows:
    table[(r["value"], r["scheme"])].append(r["weighted_ll"])
schemes = ("IM-PPO", "ALL", "RANDOM", "LOCATION")
print("B [MHz] " + "".join(f"{s:>10s}" for s in schemes))
for b in sorted({v for v, _ in table}):
    print(f"{b / 1e6:7.0f} " + "".join(f"{np.mean(table[(b, s)]):10.3f}" for s in schemes))
