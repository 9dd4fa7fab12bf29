"""Semantic feature selection and transmission control for uplink NOMA."""
from .beamforming import optimal_beamformer, worst_case_beamformers
from .channel import NetworkScenario, capacities, sample_rayleigh_scenario, sinr_all, system_latency
from .decoding import DecodingOrder, brute_force_order, sca_decoding
from .errors import (CheckpointVersionError, ConfigurationError, InfeasibleError, NumericalError,
                     SemnomaError)
from .orchestrator import EnvConfig, SemanticNomaEnv, run_baseline, sweep, train
from .ppo import Agent, PpoHyper
from .recovery import SurrogateParams, surrogate_lpips
from .semantics import FeatureCatalog, SUCatalog, synthesize_catalog

__version__ = "0.1.0"
