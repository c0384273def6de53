"""Episode sampling, support-set assembly and evaluation statistics.

The flow per episode: sample classes and items, gather the enriched support
rows from the bank (raw always; natural/geometric views and semantic rows
when the corresponding flags are on), compute class prototypes, optionally
synthesize the absorber class, train the classifier on the assembled rows
and score the raw query embeddings.

Every stochastic choice draws from a stream derived from (seed,
episode_index), so episodes are independent of evaluation order and safe to
run concurrently.
"""

from __future__ import annotations

import resource
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import auca as auca_mod
from .auca import AucaConfig, UncertainBatch
from .bank import Bank
from .classifier import (
    OPTIMIZER_QUASI_NEWTON,
    SoftmaxRegression,
    UncertainPolicy,
    score_queries,
)
from .exceptions import InsufficientDataError, MissingModalityError
from .model import EpisodeSpec, Modality, Prototype, l2_normalize, mean_prototype
from .rng import STREAM_AUCA, STREAM_EPISODE, stream

STAGE_NAMES = ("raw", "hma", "lmse", "auca", "train", "score")

ABLATION_GRID: tuple[tuple[str, bool, bool, bool], ...] = (
    ("(-,-,-)", False, False, False),
    ("(L,-,-)", True, False, False),
    ("(-,H,-)", False, True, False),
    ("(L,H,-)", True, True, False),
    ("(L,H,A)", True, True, True),
)


@dataclass(frozen=True)
class PipelineFlags:
    lmse_enabled: bool = False
    hma_enabled: bool = False
    auca_enabled: bool = False

    def to_dict(self) -> dict:
        return {
            "lmse_enabled": self.lmse_enabled,
            "hma_enabled": self.hma_enabled,
            "auca_enabled": self.auca_enabled,
        }


@dataclass(frozen=True)
class Episode:
    """One sampled N-way K-shot task over bank item ids."""

    spec: EpisodeSpec
    class_ids: tuple[int, ...]
    support: dict[int, tuple[int, ...]]
    queries: dict[int, tuple[int, ...]]
    episode_index: int

    def __post_init__(self):
        for cid in self.class_ids:
            overlap = set(self.support[cid]) & set(self.queries[cid])
            if overlap:
                raise ValueError(f"support/query overlap for class {cid}: {overlap}")


@dataclass
class RunConfig:
    """Everything an evaluation run needs beyond the episode spec."""

    flags: PipelineFlags = field(default_factory=PipelineFlags)
    auca: AucaConfig = field(default_factory=AucaConfig)
    uncertain_policy: UncertainPolicy = UncertainPolicy.COUNT_WRONG
    l2_strength: float = 1.0
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6
    optimizer: str = OPTIMIZER_QUASI_NEWTON
    prototype_raw_only: bool = False
    normalize_features: bool = False

    def __post_init__(self):
        if isinstance(self.uncertain_policy, str):
            self.uncertain_policy = UncertainPolicy(self.uncertain_policy)

    def to_dict(self) -> dict:
        return {
            "flags": self.flags.to_dict(),
            "auca": {
                "alpha_low": self.auca.alpha_low,
                "alpha_high": self.auca.alpha_high,
                "sample_count": self.auca.sample_count,
                "lambda_mode": self.auca.lambda_mode.value,
                "lambda_clamp": self.auca.lambda_clamp,
                "degenerate_lambda": self.auca.degenerate_lambda,
                "lambda_override": self.auca.lambda_override,
                "interpolate_enriched": self.auca.interpolate_enriched,
            },
            "uncertain_policy": self.uncertain_policy.value,
            "l2_strength": self.l2_strength,
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "optimizer": self.optimizer,
            "prototype_raw_only": self.prototype_raw_only,
            "normalize_features": self.normalize_features,
        }


def sample_episode(bank: Bank, spec: EpisodeSpec, episode_index: int) -> Episode:
    """Sample classes then items, both without replacement, deterministically.

    The stream is derived from (spec.seed, episode_index), so any episode can
    be re-sampled in isolation and permuting evaluation order changes nothing.
    """
    needed = spec.k_shot + spec.q_queries
    eligible = []
    short: list[tuple[int, int]] = []
    for cid in bank.class_ids():
        count = len(bank.raw_item_ids(cid))
        if count >= needed:
            eligible.append(cid)
        else:
            short.append((cid, count))
    if len(eligible) < spec.n_way:
        if short:
            cid, count = short[0]
            raise InsufficientDataError(
                f"class {bank.class_name(cid)!r} ({cid}) has {count} raw items, "
                f"needs {needed}; only {len(eligible)} of {spec.n_way} required "
                "classes are usable"
            )
        raise InsufficientDataError(
            f"bank has {len(eligible)} usable classes, episode needs {spec.n_way}"
        )

    rng = stream(spec.seed, STREAM_EPISODE, episode_index)
    chosen = rng.choice(np.array(eligible, dtype=np.int64), spec.n_way, replace=False)
    support: dict[int, tuple[int, ...]] = {}
    queries: dict[int, tuple[int, ...]] = {}
    for cid in (int(c) for c in chosen):
        perm = rng.permutation(np.array(bank.raw_item_ids(cid), dtype=np.int64))
        support[cid] = tuple(int(i) for i in perm[: spec.k_shot])
        queries[cid] = tuple(int(i) for i in perm[spec.k_shot : needed])
    return Episode(
        spec=spec,
        class_ids=tuple(int(c) for c in chosen),
        support=support,
        queries=queries,
        episode_index=episode_index,
    )


@dataclass
class AssembledSupport:
    X: np.ndarray
    y: np.ndarray
    lam: float | None
    uncertain: UncertainBatch | None
    row_counts: dict[str, int]
    stage_seconds: dict[str, float]


def _support_rows(episode: Episode, bank: Bank, flags: PipelineFlags):
    """Enriched support rows in deterministic order, with per-stage timing."""
    stage_seconds = {"raw": 0.0, "hma": 0.0, "lmse": 0.0}
    counts = {"raw": 0, "hma": 0, "lmse": 0}
    rows = []  # (LabeledEmbedding, local label)
    label_of = {cid: i for i, cid in enumerate(episode.class_ids)}

    t0 = time.perf_counter()
    for cid in episode.class_ids:
        for iid in episode.support[cid]:
            vec = bank.raw_vector(cid, iid)
            rows.append((vec, label_of[cid]))
            counts["raw"] += 1
    stage_seconds["raw"] = time.perf_counter() - t0

    modalities = [Modality.VISUAL_RAW] * counts["raw"]

    if flags.hma_enabled:
        t0 = time.perf_counter()
        if not (
            bank.has_modality(Modality.VISUAL_NATURAL)
            or bank.has_modality(Modality.VISUAL_GEOMETRIC)
        ):
            raise MissingModalityError(
                "hma flag is on but the bank has no view records; "
                "re-extract with view generation enabled"
            )
        for cid in episode.class_ids:
            for iid in episode.support[cid]:
                for rec in bank.view_rows(cid, iid):
                    rows.append((rec.vector, label_of[cid]))
                    modalities.append(rec.modality)
                    counts["hma"] += 1
        stage_seconds["hma"] = time.perf_counter() - t0

    if flags.lmse_enabled:
        t0 = time.perf_counter()
        if not bank.has_modality(Modality.SEMANTIC):
            raise MissingModalityError(
                "lmse flag is on but the bank has no semantic records; "
                "re-extract with semantic generation enabled"
            )
        for cid in episode.class_ids:
            for rec in bank.semantic_rows(cid):
                rows.append((rec.vector, label_of[cid]))
                modalities.append(rec.modality)
                counts["lmse"] += 1
        stage_seconds["lmse"] = time.perf_counter() - t0

    return rows, modalities, counts, stage_seconds


def _prototypes_from_rows(rows, modalities, *, raw_only: bool) -> list[Prototype]:
    """Per-label mean prototypes over the enriched rows (uncertain excluded)."""
    members: dict[int, list[np.ndarray]] = {}
    for (vec, label), modality in zip(rows, modalities):
        if raw_only and modality != Modality.VISUAL_RAW:
            continue
        members.setdefault(label, []).append(vec)
    return [
        Prototype(class_id=label, vector=mean_prototype(vecs))
        for label, vecs in sorted(members.items())
    ]


def assemble_support(
    episode: Episode,
    bank: Bank,
    flags: PipelineFlags,
    *,
    auca_config: AucaConfig | None = None,
    rng: np.random.Generator | None = None,
    prototype_raw_only: bool = False,
    normalize_features: bool = False,
) -> AssembledSupport:
    """Training rows for one episode: enriched support plus absorber samples.

    Local labels are positions in episode.class_ids; the absorber class, when
    enabled, is labeled n_way.  Row order is deterministic: per class raws,
    then views, then semantics, then the uncertain block.
    """
    rows, modalities, counts, stage_seconds = _support_rows(episode, bank, flags)

    lam = None
    uncertain = None
    stage_seconds["auca"] = 0.0
    counts["auca"] = 0
    if flags.auca_enabled:
        t0 = time.perf_counter()
        if auca_config is None:
            auca_config = AucaConfig()
        if rng is None:
            rng = stream(episode.spec.seed, STREAM_AUCA, episode.episode_index)
        prototypes = _prototypes_from_rows(rows, modalities, raw_only=prototype_raw_only)
        features_by_class: dict[int, list[np.ndarray]] = {}
        for (vec, label), modality in zip(rows, modalities):
            if not auca_config.interpolate_enriched and modality != Modality.VISUAL_RAW:
                continue
            features_by_class.setdefault(label, []).append(vec)
        uncertain = auca_mod.generate_uncertain(
            features_by_class, prototypes, auca_config, rng
        )
        lam = uncertain.lam
        absorber = episode.spec.n_way
        for sample in uncertain.samples:
            rows.append((sample, absorber))
            counts["auca"] += 1
        stage_seconds["auca"] = time.perf_counter() - t0

    X = np.stack([vec for vec, _ in rows])
    y = np.array([label for _, label in rows], dtype=np.int64)
    if normalize_features:
        X = np.stack([l2_normalize(row) for row in X])
    return AssembledSupport(
        X=X,
        y=y,
        lam=lam,
        uncertain=uncertain,
        row_counts=counts,
        stage_seconds=stage_seconds,
    )


def query_matrix(episode: Episode, bank: Bank, *, normalize_features: bool = False):
    """Raw query embeddings and their local labels; queries are never augmented."""
    vectors = []
    labels = []
    for local, cid in enumerate(episode.class_ids):
        for iid in episode.queries[cid]:
            vectors.append(bank.raw_vector(cid, iid))
            labels.append(local)
    X = np.stack(vectors)
    if normalize_features:
        X = np.stack([l2_normalize(row) for row in X])
    return X, np.array(labels, dtype=np.int64)


@dataclass
class EpisodeResult:
    episode_index: int
    accuracy: float
    lam: float | None
    stage_seconds: dict[str, float]
    row_counts: dict[str, int]
    n_absorbed: int
    uncertain_detail: list[list] | None


def evaluate_episode(episode: Episode, bank: Bank, config: RunConfig) -> EpisodeResult:
    """Train on the assembled support and score the episode's queries."""
    assembled = assemble_support(
        episode,
        bank,
        config.flags,
        auca_config=config.auca,
        prototype_raw_only=config.prototype_raw_only,
        normalize_features=config.normalize_features,
    )
    stage_seconds = dict(assembled.stage_seconds)

    t0 = time.perf_counter()
    model = SoftmaxRegression(
        l2_strength=config.l2_strength,
        max_iterations=config.max_iterations,
        gradient_tolerance=config.gradient_tolerance,
        optimizer=config.optimizer,
    ).fit(assembled.X, assembled.y)
    stage_seconds["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    Xq, yq = query_matrix(episode, bank, normalize_features=config.normalize_features)
    absorber = episode.spec.n_way if config.flags.auca_enabled else None
    scoring = score_queries(
        model, Xq, yq, policy=config.uncertain_policy, absorber_id=absorber
    )
    stage_seconds["score"] = time.perf_counter() - t0

    detail = None
    if assembled.uncertain is not None:
        detail = [
            [p.kind] if p.kind == "gaussian" else [p.kind, p.class_a, p.class_b, p.alpha]
            for p in assembled.uncertain.provenance
        ]
    return EpisodeResult(
        episode_index=episode.episode_index,
        accuracy=scoring.accuracy,
        lam=assembled.lam,
        stage_seconds=stage_seconds,
        row_counts=assembled.row_counts,
        n_absorbed=scoring.n_absorbed,
        uncertain_detail=detail,
    )


@dataclass
class RunReport:
    """Aggregate results of one evaluation run.

    ``profile`` holds the volatile measurements (per-stage seconds, wall
    time, memory high-water); everything else is bit-reproducible for a
    fixed seed and configuration.
    """

    spec: dict
    config: dict
    n_episodes: int
    accuracies: list[float]
    mean_accuracy: float
    ci95_half_width: float
    lambdas: list[float] | None
    auca_episodes: list[dict] | None
    row_counts: dict[str, int]
    profile: dict

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "config": self.config,
            "n_episodes": self.n_episodes,
            "accuracies": self.accuracies,
            "mean_accuracy": self.mean_accuracy,
            "ci95_half_width": self.ci95_half_width,
            "lambdas": self.lambdas,
            "auca_episodes": self.auca_episodes,
            "row_counts": self.row_counts,
            "profile": self.profile,
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_lines(self) -> list[str]:
        lines = [
            f"episodes        {self.n_episodes}",
            f"mean accuracy   {self.mean_accuracy:.4f}",
            f"ci95 half-width {self.ci95_half_width:.4f}",
        ]
        if self.lambdas is not None:
            lam = np.asarray(self.lambdas)
            lines.append(f"lambda mean/var {lam.mean():.4f} / {lam.var():.6f}")
        stages = self.profile["stages_seconds"]
        stage_text = "  ".join(f"{k}={stages[k]:.3f}s" for k in STAGE_NAMES)
        lines.append(f"stage seconds   {stage_text}")
        lines.append(f"memory high-water {self.profile['max_rss_mb']:.1f} MB")
        return lines


def _ci95_half_width(accuracies: np.ndarray) -> float:
    if accuracies.size < 2:
        return 0.0
    return float(1.96 * accuracies.std(ddof=1) / np.sqrt(accuracies.size))


def _max_rss_mb() -> float:
    # ru_maxrss is kilobytes on Linux.
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def run_evaluation(
    bank: Bank,
    spec: EpisodeSpec,
    config: RunConfig,
    n_episodes: int,
    *,
    workers: int = 1,
) -> RunReport:
    """Evaluate episode indices 0..n_episodes-1 and aggregate a report."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    wall_start = time.perf_counter()

    def one(index: int) -> EpisodeResult:
        episode = sample_episode(bank, spec, index)
        return evaluate_episode(episode, bank, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(one, i) for i in range(n_episodes)}
            results = [futures[i].result() for i in range(n_episodes)]
    else:
        results = [one(i) for i in range(n_episodes)]

    accuracies = np.array([r.accuracy for r in results])
    stage_totals = {name: 0.0 for name in STAGE_NAMES}
    row_totals: dict[str, int] = {}
    for r in results:
        for name, seconds in r.stage_seconds.items():
            stage_totals[name] = stage_totals.get(name, 0.0) + seconds
        for name, count in r.row_counts.items():
            row_totals[name] = row_totals.get(name, 0) + count

    lambdas = None
    auca_episodes = None
    if config.flags.auca_enabled:
        lambdas = [r.lam for r in results]
        auca_episodes = [
            {
                "episode_index": r.episode_index,
                "lambda": r.lam,
                "n_absorbed_queries": r.n_absorbed,
                "samples": r.uncertain_detail,
            }
            for r in results
        ]

    return RunReport(
        spec={
            "n_way": spec.n_way,
            "k_shot": spec.k_shot,
            "q_queries": spec.q_queries,
            "seed": spec.seed,
        },
        config=config.to_dict(),
        n_episodes=n_episodes,
        accuracies=[float(a) for a in accuracies],
        mean_accuracy=float(accuracies.mean()),
        ci95_half_width=_ci95_half_width(accuracies),
        lambdas=lambdas,
        auca_episodes=auca_episodes,
        row_counts=row_totals,
        profile={
            "stages_seconds": stage_totals,
            "wall_seconds": time.perf_counter() - wall_start,
            "max_rss_mb": _max_rss_mb(),
        },
    )


@dataclass
class LambdaStats:
    mean: float
    variance: float
    lambdas: list[float]


def lambda_statistics(
    bank: Bank, spec: EpisodeSpec, config: RunConfig, n_trials: int
) -> LambdaStats:
    """Mean and population variance of lambda over sampled episodes.

    Episodes are sampled and enriched like an evaluation run, but no
    classifier is trained; only the prototype-similarity chain runs.
    """
    if n_trials < 2:
        raise ValueError("n_trials must be at least 2 for a variance")
    lambdas = []
    for index in range(n_trials):
        episode = sample_episode(bank, spec, index)
        rows, modalities, _, _ = _support_rows(episode, bank, config.flags)
        prototypes = _prototypes_from_rows(
            rows, modalities, raw_only=config.prototype_raw_only
        )
        lam = auca_mod.compute_lambda(
            auca_mod.normalize_similarities(auca_mod.similarity_matrix(prototypes)),
            config.auca,
        )
        lambdas.append(lam)
    arr = np.asarray(lambdas)
    return LambdaStats(
        mean=float(arr.mean()), variance=float(arr.var(ddof=0)), lambdas=lambdas
    )


@dataclass
class AblationRow:
    label: str
    flags: PipelineFlags
    report: RunReport


def ablation_run(
    bank: Bank,
    spec: EpisodeSpec,
    config: RunConfig,
    n_episodes: int,
    *,
    workers: int = 1,
) -> list[AblationRow]:
    """The five flag combinations, evaluated over shared (paired) episodes."""
    rows = []
    for label, lmse_on, hma_on, auca_on in ABLATION_GRID:
        row_config = RunConfig(
            flags=PipelineFlags(lmse_on, hma_on, auca_on),
            auca=config.auca,
            uncertain_policy=config.uncertain_policy,
            l2_strength=config.l2_strength,
            max_iterations=config.max_iterations,
            gradient_tolerance=config.gradient_tolerance,
            optimizer=config.optimizer,
            prototype_raw_only=config.prototype_raw_only,
            normalize_features=config.normalize_features,
        )
        report = run_evaluation(bank, spec, row_config, n_episodes, workers=workers)
        rows.append(AblationRow(label=label, flags=row_config.flags, report=report))
    return rows


def render_ablation_table(rows: list[AblationRow]) -> str:
    header = f"{'LMSE':>5} {'HMA':>4} {'AUCA':>5}  {'accuracy':>9} {'ci95':>7} {'lambda':>7}"
    lines = [header, "-" * len(header)]
    for row in rows:
        mark = lambda on: "x" if on else "-"  # noqa: E731
        lam = "-"
        if row.report.lambdas:
            lam = f"{np.mean(row.report.lambdas):.3f}"
        lines.append(
            f"{mark(row.flags.lmse_enabled):>5} {mark(row.flags.hma_enabled):>4} "
            f"{mark(row.flags.auca_enabled):>5}  "
            f"{row.report.mean_accuracy:>9.4f} {row.report.ci95_half_width:>7.4f} {lam:>7}"
        )
    return "\n".join(lines)
