"""Synthetic Gaussian-cluster banks for desk-scale evaluation.

Two regimes with unit-variance isotropic clusters (sigma configurable):

* ``separated`` puts class means at radius 10*sigma: all but the last on
  mutually orthogonal axes, the last rotated 60 degrees from its neighbor
  inside their shared plane.  All pairwise mean distances are >= 6*sigma
  (the closest pair sits at exactly 10*sigma) so classes stay easily
  separable, while the angled pair anchors the prototype-similarity
  spectrum: one pair near cosine 0.5, the rest near zero.
* ``clustered`` bunches every class mean within 1*sigma of a shared
  far-from-origin center, the hard regime where class features are nearly
  indistinguishable and all prototype pairs look alike.
"""

from __future__ import annotations

import numpy as np

from .bank import Manifest
from .model import LabeledEmbedding, Modality
from .rng import STREAM_SYNTH, stream

REGIME_SEPARATED = "separated"
REGIME_CLUSTERED = "clustered"
REGIMES = (REGIME_SEPARATED, REGIME_CLUSTERED)


def class_means(regime: str, n_classes: int, dim: int, sigma: float) -> np.ndarray:
    if n_classes < 2:
        raise ValueError("n_classes must be at least 2")
    if dim < n_classes:
        raise ValueError("dim must be at least n_classes")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    means = np.zeros((n_classes, dim))
    if regime == REGIME_SEPARATED:
        radius = 10.0 * sigma
        for i in range(n_classes - 1):
            means[i, i] = radius
        # Anchor pair: equal norm, 60 degrees apart, so one prototype pair
        # holds a stably high cosine while keeping a 10*sigma gap.
        means[n_classes - 1, n_classes - 2] = radius * 0.5
        means[n_classes - 1, n_classes - 1] = radius * np.sqrt(3.0) / 2.0
    elif regime == REGIME_CLUSTERED:
        center = np.full(dim, 10.0 * sigma / np.sqrt(dim))
        for i in range(n_classes):
            means[i] = center
            means[i, i] += 0.25 * sigma
    else:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    return means


def make_synthetic_bank(
    regime: str,
    n_classes: int,
    dim: int,
    seed: int,
    *,
    items_per_class: int = 25,
    sigma: float = 1.0,
    dataset_name: str | None = None,
) -> tuple[list[LabeledEmbedding], Manifest]:
    """Raw-only records drawn as mean + sigma * N(0, I), plus a manifest."""
    means = class_means(regime, n_classes, dim, sigma)
    if items_per_class < 1:
        raise ValueError("items_per_class must be at least 1")
    rng = stream(seed, STREAM_SYNTH)
    records = []
    for cid in range(n_classes):
        noise = rng.standard_normal((items_per_class, dim))
        for iid in range(items_per_class):
            records.append(
                LabeledEmbedding(
                    class_id=cid,
                    item_id=iid,
                    view_id=0,
                    modality=Modality.VISUAL_RAW,
                    vector=means[cid] + sigma * noise[iid],
                )
            )
    manifest = Manifest(
        dataset_name=dataset_name or f"synthetic-{regime}",
        encoder_id="synthetic-gaussian",
        class_names={cid: f"class_{cid:02d}" for cid in range(n_classes)},
        metadata={
            "regime": regime,
            "sigma": repr(sigma),
            "seed": str(seed),
            "items_per_class": str(items_per_class),
        },
    )
    return records, manifest
