"""Adaptive uncertain-class generation from inter-prototype similarity.

The absorber class is synthesized as a Bernoulli mixture: with probability
lambda a sample interpolates two support features from different classes,
otherwise it is a standard-normal draw.  lambda itself is derived from the
pairwise cosine similarities of the class prototypes: the strict upper
triangle is min-max normalized to [0, 1] and folded into a difference
measure, so tasks whose prototypes bunch toward their most similar pair get
a smaller lambda than tasks dominated by dissimilar pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .exceptions import EmptyClassError, TooFewClassesError
from .model import Prototype, cosine_similarity

_DEGENERATE_EPS = 1e-12


class LambdaMode(Enum):
    # Literal published formula: 1 - (2 / binom(C,2)) * sum of normalized
    # pair similarities.  The factor doubles the pair mean, so the raw value
    # can leave [0, 1]; lambda_clamp restores the mixture-weight range.
    AS_WRITTEN = "as-written"
    # The plausible intended statistic: 1 - mean of normalized pair
    # similarities, always in [0, 1].
    PAIR_MEAN = "pair-mean"


@dataclass
class AucaConfig:
    alpha_low: float = 0.2
    alpha_high: float = 0.8
    sample_count: int | str = "auto"
    lambda_mode: LambdaMode = LambdaMode.AS_WRITTEN
    lambda_clamp: bool = True
    degenerate_lambda: float = 0.5
    lambda_override: float | None = None
    interpolate_enriched: bool = True

    def __post_init__(self):
        if isinstance(self.lambda_mode, str):
            self.lambda_mode = LambdaMode(self.lambda_mode)
        if not 0.0 <= self.alpha_low <= self.alpha_high <= 1.0:
            raise ValueError("alpha range must satisfy 0 <= low <= high <= 1")
        if self.sample_count != "auto":
            if not isinstance(self.sample_count, int) or self.sample_count < 1:
                raise ValueError("sample_count must be 'auto' or a positive integer")
        if not 0.0 <= self.degenerate_lambda <= 1.0:
            raise ValueError("degenerate_lambda must be in [0, 1]")
        if self.lambda_override is not None and not 0.0 <= self.lambda_override <= 1.0:
            raise ValueError("lambda_override must be in [0, 1]")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Upper-triangular cosine similarity matrix; zeros below the diagonal."""

    values: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.values.shape[0])

    def pair_values(self) -> np.ndarray:
        """Strict upper-triangle entries in row-major (j < k) order."""
        j, k = np.triu_indices(self.n_classes, k=1)
        return self.values[j, k]


@dataclass(frozen=True)
class UncertainProvenance:
    kind: str  # "gaussian" or "interpolated"
    class_a: int | None = None
    class_b: int | None = None
    alpha: float | None = None


@dataclass(frozen=True)
class UncertainBatch:
    lam: float
    samples: tuple[np.ndarray, ...]
    provenance: tuple[UncertainProvenance, ...]

    def __post_init__(self):
        if len(self.samples) != len(self.provenance):
            raise ValueError("provenance length must match samples length")
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def interpolated_count(self) -> int:
        return sum(1 for p in self.provenance if p.kind == "interpolated")


def similarity_matrix(prototypes: Sequence[Prototype]) -> SimilarityMatrix:
    """Pairwise prototype cosine similarities for j <= k; zero below diagonal."""
    if len(prototypes) < 2:
        raise TooFewClassesError("need at least two prototypes")
    ids = [p.class_id for p in prototypes]
    if ids != sorted(set(ids)):
        raise ValueError("prototypes must be unique and ordered by class_id")
    n = len(prototypes)
    values = np.zeros((n, n))
    for j in range(n):
        for k in range(j, n):
            values[j, k] = cosine_similarity(prototypes[j].vector, prototypes[k].vector)
    return SimilarityMatrix(values=values)


def normalize_similarities(sim: SimilarityMatrix) -> np.ndarray:
    """Min-max map of the strict upper triangle onto [0, 1].

    The diagonal is excluded: its constant 1.0 entries would pin the
    maximum and flatten the normalization.  When all pair values coincide
    (within 1e-12, including the single-pair two-class case) every value
    maps to 0.5.
    """
    pairs = sim.pair_values()
    lo = float(pairs.min())
    hi = float(pairs.max())
    if hi - lo <= _DEGENERATE_EPS:
        return np.full(pairs.shape, 0.5)
    return (pairs - lo) / (hi - lo)


def compute_lambda(s_norm: np.ndarray, config: AucaConfig) -> float:
    """Fold normalized pair similarities into the mixture weight lambda."""
    s_norm = np.asarray(s_norm, dtype=np.float64)
    if s_norm.ndim != 1 or s_norm.size == 0:
        raise ValueError("s_norm must be a nonempty 1-D array")
    # A non-degenerate normalized set always spans [0, 1]; an all-0.5 set is
    # exactly the degenerate marker emitted by normalize_similarities.
    if np.all(np.abs(s_norm - 0.5) <= _DEGENERATE_EPS):
        return float(config.degenerate_lambda)
    mean = float(s_norm.mean())
    if config.lambda_mode is LambdaMode.PAIR_MEAN:
        return 1.0 - mean
    raw = 1.0 - 2.0 * mean
    if config.lambda_clamp:
        raw = min(1.0, max(0.0, raw))
    return raw


def _pair_list(class_ids: Sequence[int]) -> list[tuple[int, int]]:
    return list(combinations(sorted(class_ids), 2))


def sample_interpolated(
    features_by_class: Mapping[int, Sequence[np.ndarray]],
    alpha_low: float,
    alpha_high: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, UncertainProvenance]:
    """Convex blend of two features from a uniformly chosen class pair."""
    if len(features_by_class) < 2:
        raise TooFewClassesError("interpolation needs at least two classes")
    for cid, feats in features_by_class.items():
        if len(feats) == 0:
            raise EmptyClassError(f"class {cid} has no features to interpolate")
    pairs = _pair_list(list(features_by_class))
    j, k = pairs[int(rng.integers(len(pairs)))]
    feats_j = features_by_class[j]
    feats_k = features_by_class[k]
    fj = feats_j[int(rng.integers(len(feats_j)))]
    fk = feats_k[int(rng.integers(len(feats_k)))]
    alpha = float(rng.uniform(alpha_low, alpha_high))
    sample = alpha * np.asarray(fj, dtype=np.float64) + (1.0 - alpha) * np.asarray(
        fk, dtype=np.float64
    )
    return sample, UncertainProvenance("interpolated", j, k, alpha)


def sample_gaussian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """dim independent standard-normal draws."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    return rng.standard_normal(dim)


def generate_uncertain(
    features_by_class: Mapping[int, Sequence[np.ndarray]],
    prototypes: Sequence[Prototype],
    config: AucaConfig,
    rng: np.random.Generator,
) -> UncertainBatch:
    """Synthesize the absorber-class batch for one episode.

    Per sample an independent Bernoulli(lambda) switch picks interpolation
    (probability lambda) or a Gaussian draw.  ``sample_count="auto"`` emits
    the mean number of enriched support rows per class, rounded up.
    """
    if len(prototypes) < 2:
        raise TooFewClassesError("need at least two prototypes")
    if config.lambda_override is not None:
        lam = float(config.lambda_override)
    else:
        lam = compute_lambda(normalize_similarities(similarity_matrix(prototypes)), config)

    if config.sample_count == "auto":
        total = sum(len(v) for v in features_by_class.values())
        count = math.ceil(total / max(1, len(features_by_class)))
    else:
        count = int(config.sample_count)

    dim = prototypes[0].dim
    samples: list[np.ndarray] = []
    provenance: list[UncertainProvenance] = []
    for _ in range(count):
        if float(rng.random()) < lam:
            sample, prov = sample_interpolated(
                features_by_class, config.alpha_low, config.alpha_high, rng
            )
        else:
            sample = sample_gaussian(dim, rng)
            prov = UncertainProvenance("gaussian")
        samples.append(sample)
        provenance.append(prov)
    return UncertainBatch(lam=lam, samples=tuple(samples), provenance=tuple(provenance))
