"""Provider entry points: serve the HTTP protocol or extract a bank offline."""

from __future__ import annotations

import argparse
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpa-provider")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the embedding provider service")
    p.add_argument("--encoder", default="fixture",
                   help='encoder id; "fixture" runs without model weights')
    p.add_argument("--llm-id", default="default")
    p.add_argument("--device", default="cpu")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--variant-cache", default=None)

    p = sub.add_parser("extract", help="encode an image tree into a bank file")
    p.add_argument("image_root")
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", default="fixture")
    p.add_argument("--device", default="cpu")
    p.add_argument("--views", action="store_true")
    p.add_argument("--semantics", action="store_true")
    p.add_argument("--n-variants", type=int, default=4)
    p.add_argument("--llm-id", default="default")
    p.add_argument("--variant-cache", default=None)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import ServiceConfig, create_app

        app = create_app(
            ServiceConfig(
                encoder_id=args.encoder,
                llm_id=args.llm_id,
                device=args.device,
                port=args.port,
                variant_cache_path=args.variant_cache,
            )
        )
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return 0

    from .encoders import build_encoder
    from .extract import ViewSettings, batch_extract
    from .llm import VariantGenerator

    encoder = build_encoder(args.encoder, args.device)
    variants = VariantGenerator(llm_id=args.llm_id, cache_path=args.variant_cache)
    stats = batch_extract(
        args.image_root,
        args.out,
        encoder=encoder,
        views=ViewSettings() if args.views else None,
        semantics=args.semantics,
        variants=variants,
        n_variants=args.n_variants,
        seed=args.seed,
    )
    total = sum(stats.counts.values())
    print(f"wrote {total} records to {args.out} "
          f"({stats.n_images} images, {stats.n_failed} failed)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
