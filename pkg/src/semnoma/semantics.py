"""Cross-modal semantic features and importance-aware pruning.

Textual features carry an attribution heatmap; visual features carry a
segmentation mask.  Set measures on heatmaps are taken on their *support*,
the cells whose activation reaches ``tau * max`` of that heatmap, so every
score below is invariant to heatmap amplitude.

Feature indexing within one SU is textual first, then visual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

CATALOG_FORMAT = "semnoma.catalog/1"
DEFAULT_TAU = 0.25
DEFAULT_XI_T = 0.5
DEFAULT_XI_V = 0.1


# ---------------------------------------------------------------------------
# Primitive types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Heatmap:
    feature_id: str
    grid: np.ndarray
    modality: str = field(default="textual", init=False)

    def __post_init__(self):
        g = np.array(self.grid, dtype=np.float32)
        if g.ndim != 2:
            raise ConfigurationError(f"heatmap {self.feature_id!r} must be 2-D")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ConfigurationError(f"heatmap {self.feature_id!r} must be finite and nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)


@dataclass(frozen=True)
class SegmentationMask:
    category_id: str
    grid: np.ndarray
    modality: str = field(default="visual", init=False)

    def __post_init__(self):
        g = np.array(self.grid, dtype=bool)
        if g.ndim != 2:
            raise ConfigurationError(f"mask {self.category_id!r} must be 2-D")
        if not g.any():
            raise ConfigurationError(f"mask {self.category_id!r} has empty support")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)


@dataclass(frozen=True)
class SelectionMask:
    """Binary selection over one SU's features, restricted to a candidate set."""

    bits: np.ndarray
    candidates: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool)
        c = np.array(self.candidates, dtype=bool)
        if b.shape != c.shape:
            raise ConfigurationError("selection and candidate masks differ in length")
        if np.any(b & ~c):
            raise ConfigurationError("selection includes features outside the candidate set")
        b.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "bits", b)
        object.__setattr__(self, "candidates", c)

    @property
    def ratio(self) -> float:
        """Fraction of candidates that are selected."""
        n = int(self.candidates.sum())
        return float(self.bits.sum()) / n if n else 0.0


# ---------------------------------------------------------------------------
# Scoring primitives
# ---------------------------------------------------------------------------


def heatmap_from_attribution(alpha, regions) -> np.ndarray:
    """``ReLU(sum_m alpha_m A_m)`` for one textual element.

    ``alpha`` has shape (M,) and ``regions`` shape (M, W, H).
    """
    alpha = np.asarray(alpha, dtype=float)
    regions = np.asarray(regions, dtype=float)
    if regions.ndim != 3 or regions.shape[0] != alpha.shape[0]:
        raise ConfigurationError(
            f"attribution length {alpha.shape[0]} does not match {regions.shape[0]} regions")
    return np.maximum(np.tensordot(alpha, regions, axes=1), 0.0)


def binarize(heatmap, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Support of a heatmap: cells with activation >= tau * max.  Empty if all zero."""
    h = np.asarray(heatmap.grid if isinstance(heatmap, Heatmap) else heatmap, dtype=float)
    peak = h.max() if h.size else 0.0
    if peak <= 0:
        return np.zeros(h.shape, dtype=bool)
    return h >= tau * peak


def dependency_matrix(supports) -> np.ndarray:
    """Jaccard overlap between heatmap supports; pairs involving an empty support score 0."""
    S = np.asarray([np.asarray(s, dtype=bool).ravel() for s in supports], dtype=float)
    inter = S @ S.T
    sizes = S.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return D


def contribution_vector(supports) -> np.ndarray:
    """Support-size shares; uniform when every support is empty."""
    sizes = np.array([np.count_nonzero(s) for s in supports], dtype=float)
    total = sizes.sum()
    if total == 0:
        return np.full(len(sizes), 1.0 / len(sizes))
    return sizes / total


def textual_importance(C, D, include_diagonal: bool = True) -> np.ndarray:
    D = np.array(D, dtype=float)
    if not include_diagonal:
        np.fill_diagonal(D, 0.0)
    return np.asarray(C, dtype=float) * D.sum(axis=1)


def _threshold(scores, xi: float, keep_top: bool) -> list:
    scores = np.asarray(scores, dtype=float)
    kept = [i for i, s in enumerate(scores) if s >= xi]
    if not kept and keep_top and scores.size:
        kept = [int(np.argmax(scores))]
    return kept


def prune_textual(importance, xi_t: float = DEFAULT_XI_T, keep_top: bool = True) -> list:
    """Indices with score >= xi_t, in order; falls back to the argmax if none survive."""
    return _threshold(importance, xi_t, keep_top)


def visual_importance(masks, retained_supports) -> np.ndarray:
    """Summed fraction of each mask covered by the retained heatmap supports."""
    M = np.asarray([np.asarray(m.grid if isinstance(m, SegmentationMask) else m, dtype=bool).ravel()
                    for m in masks], dtype=float)
    if len(retained_supports) == 0:
        return np.zeros(len(M))
    H = np.asarray([np.asarray(s, dtype=bool).ravel() for s in retained_supports], dtype=float)
    return (M @ H.T).sum(axis=1) / M.sum(axis=1)


def prune_visual(importance, xi_v: float = DEFAULT_XI_V, keep_top: bool = True) -> list:
    return _threshold(importance, xi_v, keep_top)


# ---------------------------------------------------------------------------
# Per-SU catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SUCatalog:
    """Textual and visual features available to one SU, with derived scores."""

    textual: tuple
    textual_sizes: np.ndarray
    visual: tuple
    visual_sizes: np.ndarray
    tau: float = DEFAULT_TAU
    xi_t: float = DEFAULT_XI_T
    xi_v: float = DEFAULT_XI_V
    include_diagonal: bool = True
    attributions: np.ndarray | None = None
    regions: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "textual", tuple(self.textual))
        object.__setattr__(self, "visual", tuple(self.visual))
        if not self.textual or not self.visual:
            raise ConfigurationError("each SU needs at least one textual and one visual feature")
        shapes = {h.grid.shape for h in self.textual} | {m.grid.shape for m in self.visual}
        if len(shapes) != 1:
            raise ConfigurationError(f"all grids in a catalog must share one shape, got {shapes}")
        ts = np.array(self.textual_sizes, dtype=float)
        vs = np.array(self.visual_sizes, dtype=float)
        if ts.shape != (len(self.textual),) or vs.shape != (len(self.visual),):
            raise ConfigurationError("one encoded size per feature is required")
        if np.any(ts <= 0) or np.any(vs <= 0):
            raise ConfigurationError("encoded sizes must be positive")
        if not 0 < self.tau <= 1:
            raise ConfigurationError("tau must lie in (0, 1]")
        for a in (ts, vs):
            a.setflags(write=False)
        object.__setattr__(self, "textual_sizes", ts)
        object.__setattr__(self, "visual_sizes", vs)

    @property
    def grid_shape(self) -> tuple:
        return self.textual[0].grid.shape

    @property
    def num_textual(self) -> int:
        return len(self.textual)

    @property
    def num_visual(self) -> int:
        return len(self.visual)

    @property
    def num_features(self) -> int:
        return self.num_textual + self.num_visual

    @property
    def sizes(self) -> np.ndarray:
        return np.concatenate([self.textual_sizes, self.visual_sizes])

    @property
    def feature_ids(self) -> list:
        return [h.feature_id for h in self.textual] + [m.category_id for m in self.visual]

    @cached_property
    def supports(self) -> np.ndarray:
        return np.stack([binarize(h, self.tau) for h in self.textual])

    @cached_property
    def dependency(self) -> np.ndarray:
        return dependency_matrix(self.supports)

    @cached_property
    def contribution(self) -> np.ndarray:
        return contribution_vector(self.supports)

    @cached_property
    def textual_scores(self) -> np.ndarray:
        return textual_importance(self.contribution, self.dependency, self.include_diagonal)

    @cached_property
    def retained_textual(self) -> list:
        return prune_textual(self.textual_scores, self.xi_t)

    @cached_property
    def visual_scores(self) -> np.ndarray:
        return visual_importance(self.visual, self.supports[self.retained_textual])

    @cached_property
    def retained_visual(self) -> list:
        return prune_visual(self.visual_scores, self.xi_v)

    @cached_property
    def importance(self) -> np.ndarray:
        return np.concatenate([self.textual_scores, self.visual_scores])

    @cached_property
    def cross_overlap(self) -> np.ndarray:
        """``|S_n & H_i| / |S_n|`` for every (visual n, textual i)."""
        M = np.asarray([m.grid.ravel() for m in self.visual], dtype=float)
        H = self.supports.reshape(self.num_textual, -1).astype(float)
        return (M @ H.T) / M.sum(axis=1)[:, None]

    def pruned_mask(self) -> np.ndarray:
        """Boolean candidate mask over all features after importance pruning."""
        mask = np.zeros(self.num_features, dtype=bool)
        mask[self.retained_textual] = True
        mask[[self.num_textual + n for n in self.retained_visual]] = True
        return mask

    def full_mask(self) -> np.ndarray:
        return np.ones(self.num_features, dtype=bool)

    def with_thresholds(self, xi_t: float | None = None, xi_v: float | None = None) -> "SUCatalog":
        return SUCatalog(self.textual, self.textual_sizes, self.visual, self.visual_sizes,
                         tau=self.tau, xi_t=self.xi_t if xi_t is None else xi_t,
                         xi_v=self.xi_v if xi_v is None else xi_v,
                         include_diagonal=self.include_diagonal,
                         attributions=self.attributions, regions=self.regions)


def traffic_split(bits, su: SUCatalog, header_bits: float = 0.0) -> tuple:
    """(textual bits, visual bits) for a selection; the header is charged once, to textual."""
    b = np.asarray(bits.bits if isinstance(bits, SelectionMask) else bits, dtype=bool)
    if b.shape != (su.num_features,):
        raise ConfigurationError(f"selection length {b.size} != {su.num_features} features")
    q_t = float(header_bits) + float(su.textual_sizes[b[:su.num_textual]].sum())
    q_v = float(su.visual_sizes[b[su.num_textual:]].sum())
    return q_t, q_v


def traffic_demand(selection, catalog, k: int = 0, header_bits: float = 0.0) -> float:
    """Bits SU-k must deliver for its selected features."""
    su = catalog[k] if isinstance(catalog, FeatureCatalog) else catalog
    q_t, q_v = traffic_split(selection, su, header_bits)
    return q_t + q_v


# ---------------------------------------------------------------------------
# Multi-SU catalog + file format
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureCatalog:
    sus: tuple
    shared: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sus", tuple(self.sus))
        if not self.sus:
            raise ConfigurationError("catalog has no SUs")

    def __getitem__(self, k: int) -> SUCatalog:
        return self.sus[k]

    def __len__(self) -> int:
        return len(self.sus)

    def __iter__(self):
        return iter(self.sus)

    @property
    def num_sus(self) -> int:
        return len(self.sus)

    def with_thresholds(self, xi_t=None, xi_v=None) -> "FeatureCatalog":
        return FeatureCatalog(tuple(s.with_thresholds(xi_t, xi_v) for s in self.sus), self.shared)

    def save(self, directory) -> None:
        """Write ``catalog.json`` plus per-SU raw grids (float32 heatmaps, uint8 masks)."""
        d = Path(directory)
        if not d.is_dir():
            raise FileNotFoundError(f"catalog directory {d} does not exist")
        first = self.sus[0]
        manifest = {
            "format": CATALOG_FORMAT,
            "grid": list(first.grid_shape),
            "shared": self.shared,
            "sus": [],
        }
        for k, su in enumerate(self.sus):
            hm_file, mk_file = f"su{k}_heatmaps.f32", f"su{k}_masks.u8"
            heat = np.stack([h.grid for h in su.textual]).astype("<f4")
            masks = np.stack([m.grid for m in su.visual]).astype(np.uint8)
            (d / hm_file).write_bytes(np.ascontiguousarray(heat).tobytes())
            (d / mk_file).write_bytes(np.ascontiguousarray(masks).tobytes())
            manifest["sus"].append({
                "tau": su.tau, "xi_t": su.xi_t, "xi_v": su.xi_v,
                "include_diagonal": su.include_diagonal,
                "heatmaps_file": hm_file, "masks_file": mk_file,
                "textual": [{"id": h.feature_id, "size_bits": float(s)}
                            for h, s in zip(su.textual, su.textual_sizes)],
                "visual": [{"id": m.category_id, "size_bits": float(s)}
                           for m, s in zip(su.visual, su.visual_sizes)],
            })
        (d / "catalog.json").write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "FeatureCatalog":
        """Read a catalog directory; grids may come from external attribution tools."""
        d = Path(directory)
        manifest = json.loads((d / "catalog.json").read_text())
        if manifest.get("format") != CATALOG_FORMAT:
            raise ConfigurationError(f"unsupported catalog format {manifest.get('format')!r}")
        W, H = manifest["grid"]
        sus = []
        for entry in manifest["sus"]:
            nt, nv = len(entry["textual"]), len(entry["visual"])
            heat = np.frombuffer((d / entry["heatmaps_file"]).read_bytes(), dtype="<f4")
            masks = np.frombuffer((d / entry["masks_file"]).read_bytes(), dtype=np.uint8)
            if heat.size != nt * W * H or masks.size != nv * W * H:
                raise ConfigurationError("grid file size does not match the manifest")
            heat = heat.reshape(nt, W, H)
            masks = masks.reshape(nv, W, H)
            sus.append(SUCatalog(
                textual=[Heatmap(f["id"], heat[i]) for i, f in enumerate(entry["textual"])],
                textual_sizes=[f["size_bits"] for f in entry["textual"]],
                visual=[SegmentationMask(f["id"], masks[i]) for i, f in enumerate(entry["visual"])],
                visual_sizes=[f["size_bits"] for f in entry["visual"]],
                tau=entry.get("tau", DEFAULT_TAU), xi_t=entry.get("xi_t", DEFAULT_XI_T),
                xi_v=entry.get("xi_v", DEFAULT_XI_V),
                include_diagonal=entry.get("include_diagonal", True)))
        return cls(tuple(sus), shared=bool(manifest.get("shared", False)))


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogLayout:
    """Knobs for :func:`synthesize_catalog`.

    Distances/radii are in patch units.  ``overlap`` in [0, 1] controls how
    strongly the main textual features share image regions; 0 produces
    disjoint heatmap supports.
    """

    grid: int = 32
    patch: int = 4
    num_textual: int = 5
    num_weak_textual: int = 2
    num_visual: int = 5
    num_objects: int = 2
    overlap: float = 0.6
    object_radius: float = 1.6
    textual_size_range: tuple = (2.0e5, 6.0e5)
    visual_size_range: tuple = (5.0e5, 1.5e6)
    tau: float = DEFAULT_TAU
    xi_t: float = DEFAULT_XI_T
    xi_v: float = DEFAULT_XI_V
    include_diagonal: bool = True

    def __post_init__(self):
        if self.grid % self.patch:
            raise ConfigurationError("grid must be a multiple of patch")
        if not 0 <= self.overlap <= 1:
            raise ConfigurationError("overlap must lie in [0, 1]")
        if self.num_textual < 1 or self.num_visual < 1:
            raise ConfigurationError("need at least one textual and one visual feature")
        if not 0 <= self.num_weak_textual < self.num_textual:
            raise ConfigurationError("need at least one strong textual feature")
        if self.num_objects < 1 or self.num_objects > self.num_visual:
            raise ConfigurationError("num_objects must lie in [1, num_visual]")


def patch_regions(grid: int, patch: int) -> tuple:
    """One indicator map per patch, plus patch-centre coordinates (patch units)."""
    P = grid // patch
    regions = np.zeros((P * P, grid, grid))
    centres = np.zeros((P * P, 2))
    for m in range(P * P):
        r, c = divmod(m, P)
        regions[m, r * patch:(r + 1) * patch, c * patch:(c + 1) * patch] = 1.0
        centres[m] = (r + 0.5, c + 0.5)
    return regions, centres


def _synth_su(rng: np.random.Generator, L: CatalogLayout) -> SUCatalog:
    P = L.grid // L.patch
    regions, centres = patch_regions(L.grid, L.patch)
    n_strong = L.num_textual - L.num_weak_textual
    anchors = rng.uniform(1.5, P - 1.5, size=(L.num_objects, 2))

    alpha = np.zeros((L.num_textual, len(centres)))
    feat_centres = np.zeros((L.num_textual, 2))
    if L.overlap == 0:
        # distinct centre patches so exclusive supports are never empty
        picks = rng.choice(len(centres), size=L.num_textual, replace=False)
        feat_centres[:] = centres[picks]
    for i in range(L.num_textual):
        if i < n_strong:
            if L.overlap > 0:
                jitter = (1.0 - L.overlap) * rng.normal(0.0, 1.0, 2)
                feat_centres[i] = anchors[i % L.num_objects] + jitter
            radius = 0.6 + 1.0 * L.overlap
            amp = rng.uniform(0.6, 1.0)
        else:
            if L.overlap > 0:
                feat_centres[i] = rng.uniform(0.5, P - 0.5, 2)
            radius = 0.5
            amp = rng.uniform(0.2, 0.5)
        d2 = np.sum((centres - feat_centres[i]) ** 2, axis=1)
        alpha[i] = amp * (np.exp(-d2 / (2 * radius ** 2)) - 0.2)
    if L.overlap == 0:
        owner = np.argmax(alpha, axis=0)
        own_patch = [int(np.argmin(np.sum((centres - c) ** 2, axis=1))) for c in feat_centres]
        owner[own_patch] = np.arange(L.num_textual)
        keep = owner[None, :] == np.arange(L.num_textual)[:, None]
        alpha = np.where(keep, np.maximum(alpha, 1e-3), -1.0)

    heatmaps = [Heatmap(f"t{i}", heatmap_from_attribution(alpha[i], regions).astype(np.float32))
                for i in range(L.num_textual)]

    # segmentation: object discs first, remaining cells tiled by background seeds
    rows, cols = np.mgrid[0:L.grid, 0:L.grid]
    cell = np.stack([(rows + 0.5) / L.patch, (cols + 0.5) / L.patch], axis=-1)
    label = np.full((L.grid, L.grid), -1)
    d_obj = np.stack([np.linalg.norm(cell - a, axis=-1) for a in anchors])
    nearest = np.argmin(d_obj, axis=0)
    inside = np.min(d_obj, axis=0) <= L.object_radius
    label[inside] = nearest[inside]
    n_bg = L.num_visual - L.num_objects
    for _ in range(100):
        if n_bg == 0:
            break
        seeds = rng.uniform(0, P, size=(n_bg, 2))
        d_bg = np.stack([np.linalg.norm(cell - s, axis=-1) for s in seeds])
        bg = L.num_objects + np.argmin(d_bg, axis=0)
        trial = np.where(label >= 0, label, bg)
        if all(np.any(trial == c) for c in range(L.num_visual)):
            label = trial
            break
    else:
        raise ConfigurationError("could not tile the grid with non-empty background masks")
    masks = []
    for c in range(L.num_visual):
        if not np.any(label == c):
            raise ConfigurationError("object radius too small for the grid; empty object mask")
        kind = "obj" if c < L.num_objects else "bg"
        masks.append(SegmentationMask(f"{kind}{c}", label == c))

    t_sizes = rng.uniform(*L.textual_size_range, size=L.num_textual)
    v_sizes = rng.uniform(*L.visual_size_range, size=L.num_visual)
    return SUCatalog(heatmaps, t_sizes, masks, v_sizes, tau=L.tau, xi_t=L.xi_t, xi_v=L.xi_v,
                     include_diagonal=L.include_diagonal, attributions=alpha, regions=regions)


def synthesize_catalog(seed: int, layout: CatalogLayout | None = None, num_sus: int = 1,
                       shared: bool = False) -> FeatureCatalog:
    """Deterministic synthetic catalog.

    With ``shared=True`` every SU holds the same image (identical features).
    """
    layout = layout or CatalogLayout()
    rng = np.random.default_rng(seed)
    if shared:
        su = _synth_su(rng, layout)
        return FeatureCatalog(tuple(su for _ in range(num_sus)), shared=True)
    return FeatureCatalog(tuple(_synth_su(rng, layout) for _ in range(num_sus)), shared=False)


def catalog_from_grids(heatmaps: Sequence, masks: Sequence, textual_sizes, visual_sizes,
                       **kwargs) -> SUCatalog:
    """Build one SU's catalog from externally computed grids."""
    hm = [h if isinstance(h, Heatmap) else Heatmap(f"t{i}", h) for i, h in enumerate(heatmaps)]
    mk = [m if isinstance(m, SegmentationMask) else SegmentationMask(f"v{i}", m)
          for i, m in enumerate(masks)]
    return SUCatalog(hm, textual_sizes, mk, visual_sizes, **kwargs)
