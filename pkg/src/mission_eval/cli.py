"""Command-line orchestration of the evaluation pipeline.

Subcommands: generate, curate, partition, evaluate, report, schema,
protocol-check.  All randomness funnels through --seed; MISSION_EVAL_LOG
controls log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .partition import Mission, PartitionConfig
from .pipeline import (
    StageError,
    load_profile,
    stage_curate,
    stage_evaluate,
    stage_generate,
    stage_partition,
    stage_report,
)
from .reference_hs import MODES
from .schema import schema_document
from .synthgen import GeneratorConfig, element_to_generator_config
from .xmlio import parse_xml

log = logging.getLogger(__name__)


def _parse_missions(value: str) -> list[Mission] | None:
    if value == "all":
        return None
    return [Mission(v) for v in value.split(",") if v]


def _parse_modes(value: str) -> list[str] | None:
    if value == "all":
        return None
    modes = [v for v in value.split(",") if v]
    for mode in modes:
        if mode not in MODES:
            raise argparse.ArgumentTypeError(f"unknown mode {mode!r}")
    return modes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mission-eval",
        description="mission-based biometric evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic collection event")
    gen.add_argument("--corpus", required=True, help="output corpus directory")
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--config", help="generator config XML (flags below ignored)")
    gen.add_argument("--subjects", type=int, default=80)
    gen.add_argument("--distractor-fraction", type=float, default=0.15)
    gen.add_argument("--sigma0", type=float, default=0.25)

    cur = sub.add_parser("curate", help="segment, join, split, validate")
    cur.add_argument("--corpus", required=True)
    cur.add_argument("--seed", type=int, default=42)
    cur.add_argument("--test-fraction", type=float, default=0.5)
    cur.add_argument("--tolerance", type=float, default=0.05)

    part = sub.add_parser("partition", help="build gallery/probe sig-sets per mission")
    part.add_argument("--corpus", required=True)
    part.add_argument("--seed", type=int, default=42)

    ev = sub.add_parser("evaluate", help="run an HS over the partitioned corpus")
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--seed", type=int, default=42)
    ev.add_argument("--hs", default="builtin",
                    help="builtin | exec:<command> | tcp:<host>:<port>")
    ev.add_argument("--missions", default="all", help="comma-separated mission ids or 'all'")
    ev.add_argument("--modes", default="all", help="comma-separated modes or 'all'")
    ev.add_argument("--profile", default=None, help="constraint profile XML file")

    rep = sub.add_parser("report", help="re-derive the report bundle from saved scores")
    rep.add_argument("--corpus", required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--alpha", type=float, default=0.01)

    sub.add_parser("schema", help="print the metadata schema document")

    pc = sub.add_parser("protocol-check", help="HS wire-protocol conformance suite")
    pc.add_argument("--hs", required=True, help="exec:<command> | tcp:<host>:<port>")

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("MISSION_EVAL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "generate":
            if args.config:
                config = element_to_generator_config(
                    parse_xml(Path(args.config).read_bytes()))
            else:
                config = GeneratorConfig(
                    seed=args.seed,
                    n_subjects=args.subjects,
                    distractor_fraction=args.distractor_fraction,
                    sigma0=args.sigma0,
                )
            corpus = stage_generate(config, args.corpus)
            print(f"generated {len(corpus.segments)} segments, "
                  f"{len(corpus.subjects)} subjects -> {args.corpus}")

        elif args.command == "curate":
            curated = stage_curate(args.corpus, test_fraction=args.test_fraction,
                                   tolerance=args.tolerance, seed=args.seed)
            print(f"curated {len(curated.segments)} segments "
                  f"({len(curated.quarantined)} quarantined) -> {args.corpus}")

        elif args.command == "partition":
            result = stage_partition(args.corpus, cfg=PartitionConfig(), seed=args.seed)
            print(f"gallery entries: {len(result.gallery.entries)}  "
                  f"probe entries: {len(result.probes.entries)}")
            for mission in sorted(Mission, key=lambda m: m.value):
                subjects, samples = result.mission_counts(mission)
                print(f"  {mission.value:24s} {subjects}/{samples}")

        elif args.command == "evaluate":
            stage_evaluate(
                args.corpus, args.out, hs_spec=args.hs,
                missions=_parse_missions(args.missions),
                modes=_parse_modes(args.modes),
                profile=load_profile(args.profile),
                seed=args.seed)
            bundle = stage_report(args.corpus, args.out)
            print(f"evaluation complete -> {args.out}")
            for cell in bundle.cells:
                if cell.restriction == "all" and cell.treatment == "all" and cell.has_data:
                    print(f"  {cell.mission.value:24s} {cell.mode:8s} "
                          f"TAR@{bundle.alpha:g}FAR = {cell.tar_at_far:.4f}")

        elif args.command == "report":
            bundle = stage_report(args.corpus, args.out, alpha=args.alpha)
            print(f"report bundle -> {Path(args.out) / 'report'} "
                  f"({sum(1 for c in bundle.cells if c.has_data)} cells with data)")

        elif args.command == "schema":
            print(schema_document(), end="")

        elif args.command == "protocol-check":
            from .conformance import protocol_check

            ok, results = protocol_check(args.hs)
            for result in results:
                print(result.line())
            return 0 if ok else 1

    except StageError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
