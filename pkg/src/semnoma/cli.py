"""``semnoma`` command line: generate, train, eval, sweep.

All outputs are CSV or JSON.  A run config is a JSON object::

    {"env": {...EnvConfig fields...}, "ppo": {...PpoHyper fields...},
     "scenario": "scenario.json", "catalog": "catalog", "seeds": [0, 1, 2],
     "scheme": "IM-PPO", "episodes": 2500, "eval_episodes": 200}

Every key is optional.  Relative paths resolve against the config file's directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import NetworkScenario, sample_rayleigh_scenario
from .errors import (CheckpointVersionError, ConfigurationError, InfeasibleError,
                     NumericalError, SemnomaError)
from .orchestrator import (CURVE_COLUMNS, LEARNED, SCHEMES, SWEEP_AXES, SWEEP_COLUMNS,
                           SWEEP_SCHEMA, EnvConfig, run_baseline, sweep, train, write_csv)
from .ppo import PpoHyper, load_checkpoint
from .semantics import FeatureCatalog, synthesize_catalog

log = logging.getLogger("semnoma")

EVAL_SCHEMA = "semnoma.eval/1"
EVAL_COLUMNS = ("schema", "scheme", "seed", "episodes", "weighted_ll", "latency", "lpips_sum",
                "reward", "penalty", "lpips_per_su", "ratio_per_su")

TEMPLATES = {
    "paper-default": EnvConfig(),
    "tiny": EnvConfig(num_sus=2, distances=(200.0, 350.0)),
}

# exit codes by error category
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_FILESYSTEM = 4
EXIT_CHECKPOINT = 5
EXIT_NUMERICAL = 6

COLUMN_HELP = f"""\
output files:
  curve.csv   ({', '.join(CURVE_COLUMNS)})
              one row per training episode; losses are from the latest PPO update
  metrics.csv schema {EVAL_SCHEMA}: {', '.join(EVAL_COLUMNS)}
  sweep.csv   schema {SWEEP_SCHEMA}: {', '.join(SWEEP_COLUMNS)}
              lpips_per_su / ratio_per_su are ';'-joined per-SU means
exit codes:
  0 ok, 2 usage, 3 configuration, 4 filesystem, 5 checkpoint version,
  6 numerical failure, 1 anything else
"""


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoHyper = field(default_factory=PpoHyper)
    scenario: Path | None = None
    catalog: Path | None = None
    seeds: tuple = (0,)
    scheme: str = "IM-PPO"
    episodes: int = 2500
    eval_episodes: int = 200

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        for p in (self.scenario, self.catalog):
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{p} does not exist")

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data, base=path.parent)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown run-config keys: {sorted(unknown)}")
        kw = dict(data)
        scenario = kw.pop("scenario", None)
        scenario = base / scenario if scenario else None
        env = EnvConfig.from_dict(kw.pop("env", {}))
        if scenario is not None:
            # the scenario file is a geometry/power template; channels are redrawn per step
            overrides = {k: getattr(env, k) for k in data.get("env", {})}
            env = EnvConfig.from_scenario(NetworkScenario.load(scenario), **overrides)
        catalog = kw.pop("catalog", None)
        return cls(env=env, ppo=PpoHyper.from_dict(kw.pop("ppo", {})), scenario=scenario,
                   catalog=base / catalog if catalog else None,
                   seeds=tuple(int(s) for s in kw.pop("seeds", (0,))), **kw)

    def load_catalog(self) -> FeatureCatalog | None:
        if self.catalog is None:
            return None
        cat = FeatureCatalog.load(self.catalog)
        if cat.num_sus != self.env.num_sus:
            raise ConfigurationError(f"catalog has {cat.num_sus} SUs, environment has {self.env.num_sus}")
        return cat


def _run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if getattr(args, "scheme", None):
        updates["scheme"] = args.scheme
    if getattr(args, "episodes", None) is not None:
        updates["episodes"] = args.episodes
    return replace(cfg, **updates) if updates else cfg


def _trainable(scheme: str) -> bool:
    return scheme in LEARNED or scheme == "LOCATION"


def _out_dir(path) -> Path:
    out = Path(path)
    if not out.is_dir():
        raise FileNotFoundError(f"output directory {out} does not exist")
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.template not in TEMPLATES:
        raise ConfigurationError(f"unknown template {args.template!r}; choose from {sorted(TEMPLATES)}")
    out = _out_dir(args.out)
    env = TEMPLATES[args.template]
    if args.config:
        env = RunConfig.load(args.config).env
    seed = 0 if args.seed is None else args.seed
    env = replace(env, catalog_seed=seed)
    scen = sample_rayleigh_scenario(
        seed, env.num_sus, env.num_antennas, env.distances, env.pathloss_exponent,
        reference_gain_db=env.reference_gain_db, bandwidth=env.bandwidth,
        noise_psd_dbm_hz=env.noise_psd_dbm_hz, tx_power_dbm=env.tx_power_dbm, weight=env.psi)
    scen.save(out / "scenario.json")
    (out / "catalog").mkdir(exist_ok=True)
    synthesize_catalog(seed, env.layout, num_sus=env.num_sus,
                       shared=env.shared_catalog).save(out / "catalog")
    run = {"env": env.to_dict(), "catalog": "catalog", "seeds": [seed]}
    (out / "run.json").write_text(json.dumps(run, indent=2) + "\n")
    print(f"wrote {out / 'scenario.json'}, {out / 'catalog'}, {out / 'run.json'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args.out)
    catalog = cfg.load_catalog()
    multi = len(cfg.seeds) > 1
    for seed in cfg.seeds:
        tag = f"_seed{seed}" if multi else ""
        res = train(cfg.env, cfg.scheme, cfg.episodes, seed=seed, hyper=cfg.ppo,
                    curve_path=out / f"curve{tag}.csv",
                    checkpoint_path=(out / f"checkpoint{tag}.npz") if _trainable(cfg.scheme) else None,
                    catalog=catalog)
        last = res.rewards[-100:].mean() if len(res.curve) else float("nan")
        print(f"{cfg.scheme} seed {seed}: {len(res.curve)} episodes, final mean reward {last:.4f}")
        if res.diverged:
            raise NumericalError(f"training diverged (seed {seed}); last good checkpoint kept")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    out = Path(args.out)
    if not out.parent.is_dir():
        raise FileNotFoundError(f"directory {out.parent} does not exist")
    catalog = cfg.load_catalog()
    agent = None
    if args.checkpoint:
        agent, extra = load_checkpoint(args.checkpoint)
        trained = extra.get("scheme")
        if trained and trained != cfg.scheme and not (cfg.scheme == "LOCATION" and trained == "IM-PPO"):
            log.warning("checkpoint was trained for %s, evaluating as %s", trained, cfg.scheme)
    elif cfg.scheme in LEARNED:
        raise ConfigurationError(f"scheme {cfg.scheme} needs --checkpoint")
    episodes = cfg.eval_episodes if args.episodes is None else args.episodes
    rows = []
    for seed in cfg.seeds:
        res = run_baseline(cfg.env, cfg.scheme, episodes, seed, agent=agent, catalog=catalog)
        if episodes:
            rows.append({"schema": EVAL_SCHEMA, "seed": seed, "episodes": episodes, **res.summary()})
    write_csv(out, EVAL_COLUMNS, rows)
    for r in rows:
        print(f"{r['scheme']} seed {r['seed']}: weighted_ll {r['weighted_ll']:.4f} "
              f"latency {r['latency']:.4f} s lpips_sum {r['lpips_sum']:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    out = Path(args.out)
    if not out.parent.is_dir():
        raise FileNotFoundError(f"directory {out.parent} does not exist")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"--values must be comma-separated numbers ({exc})") from exc
    schemes = tuple(s.strip() for s in args.schemes.split(",")) if args.schemes else (
        "IM-PPO", "ALL", "RANDOM", "LOCATION")
    rows = sweep(cfg.env, args.axis, values, schemes=schemes, seeds=cfg.seeds,
                 episodes=cfg.episodes, eval_episodes=cfg.eval_episodes, hyper=cfg.ppo,
                 jobs=args.jobs, out=out)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run-config JSON file")
    common.add_argument("--seed", type=int, help="single seed (overrides the config's seeds)")
    common.add_argument("--verbose", "-v", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="semnoma", description="Semantic feature selection over uplink NOMA.",
        epilog=COLUMN_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    kw = dict(parents=[common], epilog=COLUMN_HELP,
              formatter_class=argparse.RawDescriptionHelpFormatter)

    g = sub.add_parser("generate", help="write scenario.json, catalog/ and run.json", **kw)
    g.add_argument("--template", default="paper-default", help=f"one of {sorted(TEMPLATES)}")
    g.add_argument("--out", required=True, help="existing output directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one scheme; writes curve.csv and checkpoint.npz", **kw)
    t.add_argument("--scheme", choices=SCHEMES)
    t.add_argument("--episodes", type=int)
    t.add_argument("--out", required=True, help="existing output directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a scheme; writes a metrics CSV", **kw)
    e.add_argument("--scheme", choices=SCHEMES)
    e.add_argument("--episodes", type=int, help="evaluation episodes")
    e.add_argument("--checkpoint", help="checkpoint from `train` (not needed for ALL/RANDOM)")
    e.add_argument("--out", required=True, help="metrics CSV path")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="train + evaluate schemes along one axis", **kw)
    s.add_argument("--axis", required=True, choices=SWEEP_AXES)
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--schemes", help="comma-separated schemes (default IM-PPO,ALL,RANDOM,LOCATION)")
    s.add_argument("--episodes", type=int, help="training episodes per learned scheme")
    s.add_argument("--jobs", type=int, default=1, help="parallel (value, seed) jobs")
    s.add_argument("--out", required=True, help="sweep CSV path")
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CheckpointVersionError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (NumericalError, InfeasibleError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return EXIT_FILESYSTEM
    except SemnomaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
