"""Command-line surface: extract, eval, ablate, lambda-stats, inspect, synth.

Exit codes: 0 success, 2 usage, 3 data/format, 4 provider, 5 numerical.
Errors print a single machine-parsable line "<ErrorClass>: <message>".
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .auca import AucaConfig, LambdaMode
from .bank import load_bank, write_bank
from .classifier import (
    OPTIMIZER_GRADIENT_DESCENT,
    OPTIMIZER_QUASI_NEWTON,
    UncertainPolicy,
    dump_model,
)
from .episodes import (
    PipelineFlags,
    RunConfig,
    ablation_run,
    lambda_statistics,
    render_ablation_table,
    run_evaluation,
    sample_episode,
)
from .exceptions import MpaError
from .extraction import extract_directory
from .hma import TOY_DIM, JitterSpec, ProviderImageEncoder, ToyImageEncoder, ViewPlan
from .lmse import VARIANT_CACHE_ENV, ProviderTextEncoder, ToyTextEncoder, VariantCache
from .model import EpisodeSpec, Modality
from .provider import ProviderClient, ProviderConfig
from .synth import REGIMES, make_synthetic_bank


def _csv_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _add_spec_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-way", type=int, default=5)
    parser.add_argument("--k-shot", type=int, default=1)
    parser.add_argument("--queries", type=int, default=15, help="query items per class")
    parser.add_argument("--seed", type=int, default=0)


def _add_run_args(parser: argparse.ArgumentParser, with_flags: bool) -> None:
    if with_flags:
        parser.add_argument("--lmse", action="store_true", help="use semantic rows")
        parser.add_argument("--hma", action="store_true", help="use view rows")
        parser.add_argument("--auca", action="store_true", help="add the absorber class")
    parser.add_argument("--alpha-range", type=_csv_floats, default=[0.2, 0.8],
                        metavar="LO,HI")
    parser.add_argument("--lambda-mode", choices=[m.value for m in LambdaMode],
                        default=LambdaMode.AS_WRITTEN.value)
    parser.add_argument("--sample-count", default="auto",
                        help="'auto' or a positive integer")
    parser.add_argument("--uncertain-policy",
                        choices=[p.value for p in UncertainPolicy],
                        default=UncertainPolicy.COUNT_WRONG.value)
    parser.add_argument("--l2", type=float, default=1.0, dest="l2_strength")
    parser.add_argument("--max-iter", type=int, default=1000)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--optimizer",
                        choices=[OPTIMIZER_QUASI_NEWTON, OPTIMIZER_GRADIENT_DESCENT],
                        default=OPTIMIZER_QUASI_NEWTON)
    parser.add_argument("--prototype-raw-only", action="store_true")
    parser.add_argument("--normalize", action="store_true",
                        help="l2-normalize all features")
    parser.add_argument("--workers", type=int, default=1)


def _spec_from(args) -> EpisodeSpec:
    return EpisodeSpec(
        n_way=args.n_way,
        k_shot=args.k_shot,
        q_queries=args.queries,
        seed=args.seed & ((1 << 64) - 1),
    )


def _config_from(args, flags: PipelineFlags) -> RunConfig:
    if len(args.alpha_range) != 2:
        raise ValueError("--alpha-range expects exactly two values: LO,HI")
    lo, hi = args.alpha_range
    sample_count = args.sample_count
    if sample_count != "auto":
        sample_count = int(sample_count)
    return RunConfig(
        flags=flags,
        auca=AucaConfig(
            alpha_low=lo,
            alpha_high=hi,
            sample_count=sample_count,
            lambda_mode=LambdaMode(args.lambda_mode),
        ),
        uncertain_policy=UncertainPolicy(args.uncertain_policy),
        l2_strength=args.l2_strength,
        max_iterations=args.max_iter,
        gradient_tolerance=args.tol,
        optimizer=args.optimizer,
        prototype_raw_only=args.prototype_raw_only,
        normalize_features=args.normalize,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpa",
        description="Episodic few-shot evaluation over embedding banks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="encode an image tree into a bank")
    p.add_argument("image_dir")
    p.add_argument("--out", required=True, help="bank output path")
    p.add_argument("--toy-encoder", action="store_true",
                   help="use the offline deterministic encoder")
    p.add_argument("--dim", type=int, default=TOY_DIM,
                   help="embedding dim for the toy encoder")
    p.add_argument("--provider-url", default=None,
                   help="provider base URL (default: $MPA_PROVIDER_URL)")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--hma", action="store_true", help="also extract view records")
    p.add_argument("--crop-sizes", type=_csv_ints, default=[120, 170, 200],
                   metavar="A,B,...")
    p.add_argument("--rotations", type=_csv_floats,
                   default=[45, 90, 180, 270, 315], metavar="D1,D2,...")
    p.add_argument("--jitter", type=_csv_floats, default=[0.5, 0.5, 0.5, 0.2],
                   metavar="B,C,S,H")
    p.add_argument("--jitter-samples", type=int, default=1)
    p.add_argument("--no-reflection", action="store_true")
    p.add_argument("--lmse", action="store_true", help="also extract semantic records")
    p.add_argument("--n-variants", type=int, default=4)
    p.add_argument("--variant-cache", default=os.environ.get(VARIANT_CACHE_ENV),
                   help="variant cache path (default: $MPA_VARIANT_CACHE)")
    p.add_argument("--llm-id", default="default")
    p.add_argument("--no-fallback", action="store_true",
                   help="fail instead of using the offline description template")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset-name", default=None)

    p = sub.add_parser("eval", help="run an episodic evaluation")
    p.add_argument("bank")
    _add_spec_args(p)
    p.add_argument("--episodes", type=int, default=100)
    _add_run_args(p, with_flags=True)
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.add_argument("--dump-model", default=None,
                   help="dump episode 0's trained model JSON here")

    p = sub.add_parser("ablate", help="evaluate the five flag combinations")
    p.add_argument("bank")
    _add_spec_args(p)
    p.add_argument("--episodes", type=int, default=100)
    _add_run_args(p, with_flags=False)
    p.add_argument("--out", default=None)

    p = sub.add_parser("lambda-stats",
                       help="mean/variance of lambda over sampled episodes")
    p.add_argument("banks", nargs="+")
    _add_spec_args(p)
    p.add_argument("--lambda-trials", "--trials", type=int, default=1000,
                   dest="lambda_trials")
    _add_run_args(p, with_flags=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("inspect", help="dump a bank's header and manifest")
    p.add_argument("bank")

    p = sub.add_parser("synth", help="write a synthetic Gaussian-cluster bank")
    p.add_argument("--regime", choices=REGIMES, required=True)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--items-per-class", type=int, default=25)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", required=True)

    return parser


def _cmd_extract(args) -> int:
    if args.toy_encoder:
        image_encoder = ToyImageEncoder(args.dim)
        text_encoder = ToyTextEncoder(args.dim) if args.lmse else None
        variant_provider = None
        encoder_id = f"toy-8x8-{args.dim}"
        target_dim = args.dim
    else:
        cfg = ProviderConfig(timeout=args.timeout) if args.provider_url is None else (
            ProviderConfig(base_url=args.provider_url, timeout=args.timeout)
        )
        client = ProviderClient(cfg)
        health = client.health()
        image_encoder = ProviderImageEncoder(client)
        text_encoder = ProviderTextEncoder(client) if args.lmse else None
        variant_provider = client
        encoder_id = health["encoder_id"]
        target_dim = health["dim"]

    plan = None
    if args.hma:
        if len(args.jitter) != 4:
            raise ValueError("--jitter expects four values: B,C,S,H")
        b, c, s, h = args.jitter
        plan = ViewPlan(
            crop_sizes=tuple(args.crop_sizes),
            rotation_degrees=tuple(args.rotations),
            jitter=JitterSpec(brightness=b, contrast=c, saturation=s, hue=h),
            jitter_samples=args.jitter_samples,
            include_reflection=not args.no_reflection,
        )

    cache = VariantCache(args.variant_cache) if args.variant_cache else None
    records, manifest, stats = extract_directory(
        args.image_dir,
        image_encoder,
        plan=plan,
        text_encoder=text_encoder,
        variant_provider=variant_provider,
        variant_cache=cache,
        n_variants=args.n_variants,
        llm_id=args.llm_id,
        fallback=not args.no_fallback,
        seed=args.seed & ((1 << 64) - 1),
        dataset_name=args.dataset_name,
        encoder_id=encoder_id,
        target_dim=target_dim,
    )
    write_bank(records, manifest, args.out)
    print(
        f"wrote {len(records)} records to {args.out} "
        f"({stats.n_raw} raw, {stats.n_views} views, {stats.n_semantic} semantic; "
        f"{stats.n_failed} failed)"
    )
    return 0


def _cmd_eval(args) -> int:
    bank = load_bank(args.bank)
    spec = _spec_from(args)
    config = _config_from(args, PipelineFlags(args.lmse, args.hma, args.auca))
    report = run_evaluation(bank, spec, config, args.episodes, workers=args.workers)
    for line in report.summary_lines():
        print(line)
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
        print(f"report written to {args.out}")
    if args.dump_model:
        episode = sample_episode(bank, spec, 0)
        from .episodes import assemble_support
        from .classifier import SoftmaxRegression

        assembled = assemble_support(
            episode, bank, config.flags, auca_config=config.auca,
            prototype_raw_only=config.prototype_raw_only,
            normalize_features=config.normalize_features,
        )
        model = SoftmaxRegression(
            l2_strength=config.l2_strength,
            max_iterations=config.max_iterations,
            gradient_tolerance=config.gradient_tolerance,
            optimizer=config.optimizer,
        ).fit(assembled.X, assembled.y)
        dump_model(model, args.dump_model)
        print(f"episode 0 model written to {args.dump_model}")
    return 0


def _cmd_ablate(args) -> int:
    bank = load_bank(args.bank)
    spec = _spec_from(args)
    config = _config_from(args, PipelineFlags())
    rows = ablation_run(bank, spec, config, args.episodes, workers=args.workers)
    print(render_ablation_table(rows))
    if args.out:
        import json

        payload = [
            {"label": row.label, "flags": row.flags.to_dict(),
             "report": row.report.to_dict()}
            for row in rows
        ]
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
        )
        print(f"ablation table written to {args.out}")
    return 0


def _cmd_lambda_stats(args) -> int:
    spec = _spec_from(args)
    config = _config_from(args, PipelineFlags(args.lmse, args.hma, args.auca))
    results = {}
    for path in args.banks:
        bank = load_bank(path)
        stats = lambda_statistics(bank, spec, config, args.lambda_trials)
        results[path] = stats
        print(f"{path}: lambda mean {stats.mean:.4f} variance {stats.variance:.6f} "
              f"({args.lambda_trials} trials)")
    if args.out:
        import json

        payload = {
            path: {"mean": s.mean, "variance": s.variance, "lambdas": s.lambdas}
            for path, s in results.items()
        }
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
        )
    return 0


def _cmd_inspect(args) -> int:
    bank = load_bank(args.bank)
    counts = {m.name: 0 for m in Modality}
    for rec in bank.records:
        counts[rec.modality.name] += 1
    print(f"bank            {args.bank}")
    print(f"dataset         {bank.manifest.dataset_name}")
    print(f"encoder         {bank.manifest.encoder_id}")
    print(f"dim             {bank.dim}")
    print(f"records         {len(bank.records)}")
    for name, count in counts.items():
        if count:
            print(f"  {name:<16} {count}")
    print(f"classes         {len(bank.manifest.class_names)}")
    for cid, name in sorted(bank.manifest.class_names.items()):
        n_items = len(bank.raw_item_ids(cid))
        print(f"  {cid:>4}  {name}  ({n_items} raw items)")
    return 0


def _cmd_synth(args) -> int:
    records, manifest = make_synthetic_bank(
        args.regime,
        args.classes,
        args.dim,
        args.seed & ((1 << 64) - 1),
        items_per_class=args.items_per_class,
        sigma=args.sigma,
    )
    write_bank(records, manifest, args.out)
    print(f"wrote {len(records)} records to {args.out} ({args.regime}, "
          f"{args.classes} classes, dim {args.dim})")
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "lambda-stats": _cmd_lambda_stats,
    "inspect": _cmd_inspect,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except MpaError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"ValueError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
