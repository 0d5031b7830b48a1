"""
odflow command-line interface.

Usage:
    odflow synth --config synth.env --out corpus/
    odflow train --corpus corpus/ --config train.env --out model.ckpt
    odflow generate --ckpt model.ckpt --city corpus/city007 --seed 1 --out gen.csv
    odflow eval --ref corpus/city007/od.csv --gen gen.csv --out report.txt
    odflow eval-corpus --corpus corpus/ --gen-dir gens/ --out corpus_report.csv

Exit codes: 0 success, 1 data or validation error, 2 usage error, 3 internal error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from libs.config import load_config, settings
from libs.diffusion.process import ReverseVariance
from libs.diffusion.trainer import TrainConfig
from libs.errors import ODFlowError, UsageError
from libs.ingest.city import load_city_dir
from libs.ingest.corpus import load_corpus
from libs.ingest.geojson import load_boundaries
from libs.ingest.tables import write_od
from libs.physical.radiation import DEFAULT_TRIP_RATE
from libs.services import (
    BaselineService,
    EvaluationService,
    FeatureService,
    GenerationService,
    PreparationService,
    SynthService,
)
from libs.synth.config import SynthConfig
from libs.synth.render import DEFAULT_RENDER_ZOOM

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 3
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def _ratios(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    try:
        values = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must look like 8:1:1, got {text!r}") from None
    if len(values) != 3 or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"ratios must be three non-negative integers, got {text!r}")
    return values


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config, SynthConfig) if args.config else SynthConfig()
    tiles_dir = args.tiles if args.render else None
    SynthService.create_corpus(config, args.out, args.ratios, tiles_dir=tiles_dir, zoom=args.zoom)
    return EXIT_OK


def cmd_tiles_fetch(args: argparse.Namespace) -> int:
    boundaries = load_boundaries(args.boundaries).boundaries
    report = PreparationService.fetch(
        boundaries, args.zoom, offline=args.offline, cache_dir=args.cache_dir, url_template=args.url
    )
    if report.failed:
        logger.warning(f"{len(report.failed)} tile(s) unavailable; prepare will zero-fill them")
    return EXIT_OK


def cmd_prepare(args: argparse.Namespace) -> int:
    boundaries = load_boundaries(args.boundaries).boundaries
    PreparationService.prepare(boundaries, args.tiles, args.zoom, args.out)
    return EXIT_OK


def cmd_features(args: argparse.Namespace) -> int:
    FeatureService.build(args.mode, args.input, args.out, population_path=args.population)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config, TrainConfig) if args.config else TrainConfig()
    GenerationService.train_corpus(args.corpus, config, args.out, resume_path=args.resume)
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    od = GenerationService.generate_city(
        args.ckpt, args.city, seed=args.seed, variance=args.variance, n_samples=args.samples
    )
    write_od(od, args.out, format=args.format)
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    bundle = load_city_dir(args.city)
    params = None
    if args.model == "gravity":
        fit_bundles = load_corpus(args.fit_corpus, splits=("train",)) if args.fit_corpus else None
        params = BaselineService.gravity_params(bundle, fit_bundles, G=args.G, beta=args.beta)
    elif args.G is not None or args.beta is not None or args.fit_corpus:
        raise UsageError("--G, --beta and --fit-corpus only apply to the gravity model")
    od = BaselineService.run(
        args.model, bundle, params=params, trip_rate=args.trip_rate, renormalize=args.renormalize
    )
    write_od(od, args.out, format=args.format)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    report, curve = EvaluationService.evaluate_files(
        args.ref, args.gen, include_diagonal=not args.exclude_diagonal, window=args.window
    )
    EvaluationService.write_outputs(report, args.out, curve, args.curve)
    return EXIT_OK


def cmd_eval_corpus(args: argparse.Namespace) -> int:
    report = EvaluationService.evaluate_corpus_dir(
        args.corpus, args.gen_dir, splits=args.split or ["test"], include_diagonal=not args.exclude_diagonal
    )
    EvaluationService.write_corpus_outputs(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odflow",
        description="Generate commuting origin-destination flows for urban regions.",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: ODFLOW_LOG_LEVEL or INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = commands.add_parser("synth", help="Write a synthetic corpus")
    p.add_argument("--config", type=Path, help="Key-value synth config file")
    p.add_argument("--out", type=Path, required=True, help="Corpus directory")
    p.add_argument("--ratios", type=_ratios, default=(8, 1, 1), help="train:val:test split (default: 8:1:1)")
    p.add_argument("--render", action="store_true", help="Also render procedural tiles")
    p.add_argument("--tiles", type=Path, default=settings.tile_cache_dir, help="Tile directory for --render")
    p.add_argument("--zoom", type=int, default=DEFAULT_RENDER_ZOOM, help="Render zoom (default: %(default)s)")
    p.set_defaults(handler=cmd_synth)

    tiles = commands.add_parser("tiles", help="Tile cache operations")
    tile_commands = tiles.add_subparsers(dest="tiles_command", required=True, metavar="command")
    p = tile_commands.add_parser("fetch", help="Download the tiles covering a boundary file")
    p.add_argument("--boundaries", type=Path, required=True, help="Region GeoJSON")
    p.add_argument("--zoom", type=int, default=settings.default_zoom, help="Zoom level (default: %(default)s)")
    p.add_argument("--offline", action="store_true", help="Only check the cache, never download")
    p.add_argument("--cache-dir", type=Path, default=None, help="Tile cache (default: ODFLOW_TILE_CACHE_DIR)")
    p.add_argument("--url", default=None, help="URL template with {z}/{x}/{y} (default: ODFLOW_TILE_URL)")
    p.set_defaults(handler=cmd_tiles_fetch)

    p = commands.add_parser("prepare", help="Stitch, crop and mask per-region rasters")
    p.add_argument("--boundaries", type=Path, required=True, help="Region GeoJSON")
    p.add_argument("--tiles", type=Path, required=True, help="Tile cache directory")
    p.add_argument("--zoom", type=int, default=settings.default_zoom, help="Zoom level (default: %(default)s)")
    p.add_argument("--out", type=Path, required=True, help="Output directory")
    p.set_defaults(handler=cmd_prepare)

    p = commands.add_parser("features", help="Compute or import region embeddings")
    p.add_argument("--mode", choices=["toy", "ingest"], required=True, help="toy: raster statistics; ingest: embedding file")
    p.add_argument("--in", dest="input", type=Path, required=True, help="Prepared directory (toy) or embedding file (ingest)")
    p.add_argument("--population", type=Path, default=None, help="Population CSV to check region ids against")
    p.add_argument("--out", type=Path, required=True, help="Embedding file (.odemb or .csv)")
    p.set_defaults(handler=cmd_features)

    p = commands.add_parser("train", help="Train the diffusion generator")
    p.add_argument("--corpus", type=Path, required=True, help="Corpus directory")
    p.add_argument("--config", type=Path, default=None, help="Key-value training config file")
    p.add_argument("--out", type=Path, required=True, help="Checkpoint path")
    p.add_argument("--resume", type=Path, default=None, help="Checkpoint to continue from")
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser("generate", help="Sample OD flows for a city")
    p.add_argument("--ckpt", type=Path, required=True, help="Checkpoint path")
    p.add_argument("--city", type=Path, required=True, help="City directory")
    p.add_argument("--seed", type=int, default=0, help="Sampling seed (default: 0)")
    p.add_argument("--out", type=Path, required=True, help="Output OD CSV")
    p.add_argument("--samples", type=int, default=1, help="Chains averaged before rounding (default: 1)")
    p.add_argument(
        "--variance",
        choices=[v.value for v in ReverseVariance],
        default=ReverseVariance.POSTERIOR.value,
        help="Reverse-step variance (default: %(default)s)",
    )
    p.add_argument("--format", choices=["edges", "dense"], default="edges", help="OD layout (default: edges)")
    p.set_defaults(handler=cmd_generate)

    p = commands.add_parser("baseline", help="Gravity or radiation flows for a city")
    p.add_argument("--model", choices=["gravity", "radiation"], required=True)
    p.add_argument("--city", type=Path, required=True, help="City directory")
    p.add_argument("--out", type=Path, required=True, help="Output OD CSV")
    p.add_argument("--fit-corpus", type=Path, default=None, help="Fit gravity on this corpus' training cities")
    p.add_argument("--beta", type=float, default=None, help="Gravity distance exponent")
    p.add_argument("--G", type=float, default=None, help="Gravity constant")
    p.add_argument("--trip-rate", type=float, default=DEFAULT_TRIP_RATE, help="Radiation trips per person (default: %(default)s)")
    p.add_argument("--renormalize", action="store_true", help="Scale radiation rows to their outflow")
    p.add_argument("--format", choices=["edges", "dense"], default="edges", help="OD layout (default: edges)")
    p.set_defaults(handler=cmd_baseline)

    p = commands.add_parser("eval", help="Compare generated flows with a reference")
    p.add_argument("--ref", type=Path, required=True, help="Reference OD CSV")
    p.add_argument("--gen", type=Path, required=True, help="Generated OD CSV")
    p.add_argument("--out", type=Path, required=True, help="Report file (key=value)")
    p.add_argument("--exclude-diagonal", action="store_true", help="Ignore intra-region flows")
    p.add_argument("--curve", type=Path, default=None, help="Also write the rank curve CSV")
    p.add_argument("--window", type=int, default=None, help="Rank-curve smoothing window")
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("eval-corpus", help="Evaluate generated flows for every city of a corpus split")
    p.add_argument("--corpus", type=Path, required=True, help="Corpus directory with reference flows")
    p.add_argument("--gen-dir", type=Path, required=True, help="Directory holding <city>.csv generated flows")
    p.add_argument("--out", type=Path, required=True, help="Report CSV (one row per city, then mean and std)")
    p.add_argument(
        "--split", action="append", choices=["train", "val", "test"], help="Cities to evaluate (default: test; repeatable)"
    )
    p.add_argument("--exclude-diagonal", action="store_true", help="Ignore intra-region flows")
    p.set_defaults(handler=cmd_eval_corpus)

    return parser


def configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except ODFlowError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"error: InternalError: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
