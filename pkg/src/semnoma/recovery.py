"""Deterministic stand-in for diffusion recovery + LPIPS scoring.

``score = clamp(b0 - a * coverage + c * redundancy, floor, 1)``

coverage
    selected importance over the importance of the catalog's pruned
    candidate set, capped at 1.  Pruned-out features therefore add no
    coverage; they can only add redundancy.
redundancy
    ``sum C_i D_ij`` over ordered pairs of distinct selected textual features
    plus ``|S_n & H_i| / |S_n|`` over selected (visual n, textual i) pairs,
    divided by the pruned-set size.

Both normalizers are properties of the catalog, so every scheme is scored on
the same scale.  Lower is better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .semantics import FeatureCatalog, SelectionMask, SUCatalog


@dataclass(frozen=True)
class SurrogateParams:
    base_score: float = 0.8
    coverage_gain: float = 0.6
    redundancy_penalty: float = 0.3
    floor: float = 0.05

    def __post_init__(self):
        if not 0 < self.base_score <= 1:
            raise ConfigurationError("base_score must lie in (0, 1]")
        if not self.coverage_gain > 0:
            raise ConfigurationError("coverage_gain must be positive")
        if self.redundancy_penalty < 0:
            raise ConfigurationError("redundancy_penalty must be nonnegative")
        if not 0 <= self.floor <= self.base_score:
            raise ConfigurationError("floor must lie in [0, base_score]")

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateParams":
        return cls(**{k: float(v) for k, v in d.items()})


def _bits(selection, n: int) -> np.ndarray:
    b = np.asarray(selection.bits if isinstance(selection, SelectionMask) else selection,
                   dtype=bool)
    if b.shape != (n,):
        raise ConfigurationError(f"selection length {b.size} != {n} features")
    return b


def coverage(selection, su: SUCatalog) -> float:
    b = _bits(selection, su.num_features)
    pool = su.importance[su.pruned_mask()].sum()
    if pool <= 0:
        return 1.0 if b.any() else 0.0
    return min(1.0, float(su.importance[b].sum() / pool))


def redundancy(selection, su: SUCatalog) -> float:
    b = _bits(selection, su.num_features)
    bt, bv = b[:su.num_textual], b[su.num_textual:]
    W = su.contribution[:, None] * su.dependency
    np.fill_diagonal(W, 0.0)
    textual = float(W[np.ix_(bt, bt)].sum())
    cross = float(su.cross_overlap[np.ix_(bv, bt)].sum())
    return (textual + cross) / int(su.pruned_mask().sum())


def surrogate_lpips(selection, catalog, k: int = 0,
                    params: SurrogateParams | None = None) -> float:
    """Recovery score in [floor, 1] for SU-k's selection; lower is better."""
    params = params or SurrogateParams()
    su = catalog[k] if isinstance(catalog, FeatureCatalog) else catalog
    raw = (params.base_score - params.coverage_gain * coverage(selection, su)
           + params.redundancy_penalty * redundancy(selection, su))
    return float(min(1.0, max(params.floor, raw)))


def lpips_scores(selections, catalog: FeatureCatalog,
                 params: SurrogateParams | None = None) -> np.ndarray:
    return np.array([surrogate_lpips(s, catalog, k, params) for k, s in enumerate(selections)])


def lpips_sum(selections, catalog: FeatureCatalog, params: SurrogateParams | None = None) -> float:
    return float(lpips_scores(selections, catalog, params).sum())
