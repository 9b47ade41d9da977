"""Command-line entry point: ``gapcheck count|validate|report|fetch-gaps|probe``.

Data goes to files or stdout; progress and warnings go to stderr.

Exit codes: 0 success, 2 usage, 3 data, 4 incomplete shard run, 5 network.
"""

from __future__ import annotations

import argparse
import bz2
import gzip
import json
import logging
import sys
from pathlib import Path

from . import freqdb, gapspec, shards
from .conllu import ConlluError, ParseDiagnostics, parse_stream
from .freqdb import BuildOptions, DatabaseError
from .gapspec import EmptyReportError, GapSpecError
from .pattern import FeaturePattern
from .stats import (
    AttestationBand,
    AttestationThresholds,
    DivergenceThresholds,
    NotAttestedError,
    ThresholdError,
    classify_attestation,
    classify_divergence,
    log_odds,
    mle_probs,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL, EXIT_NETWORK = 0, 2, 3, 4, 5

log = logging.getLogger("gapcheck")


class UsageError(Exception):
    pass


def _thresholds(args, meta: dict | None = None):
    meta = meta or {}

    def pick(name, default, cast):
        value = getattr(args, name, None)
        if value is None:
            value = meta.get(name, default)
        return cast(value)

    return (AttestationThresholds(pick("defective_max", 10, int), pick("edge_max", 100, int)),
            DivergenceThresholds(pick("lor_large", 1.9, float), pick("lor_moderate", 1.5, float)))


def _write(out: str | None, text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


# -- count -------------------------------------------------------------------

def _count_stdin(args, options: BuildOptions) -> int:
    diag = ParseDiagnostics()
    db = freqdb.build(parse_stream(sys.stdin.buffer, strict=args.strict, diagnostics=diag),
                      args.language, options, {"sources": "<stdin>"})
    freqdb.save(db, args.out)
    _report_diagnostics(diag.__dict__)
    return EXIT_OK


def _report_diagnostics(counters: dict) -> None:
    noisy = {k: v for k, v in counters.items()
             if k in ("malformed_lines", "malformed_feats", "encoding_errors") and v}
    if noisy:
        log.warning("lenient parse skipped/repaired input: %s", noisy)


def cmd_count(args) -> int:
    if not args.inputs:
        raise UsageError("count needs at least one input file")
    options = BuildOptions(lowercase=not args.no_lowercase,
                           exclude_upos=frozenset(x for x in args.exclude_upos.split(",") if x))
    if args.inputs == ["-"]:
        if args.shards != 1:
            raise UsageError("standard input can only be counted with --shards 1")
        return _count_stdin(args, options)
    for p in args.inputs:
        if p == "-" or not Path(p).is_file():
            raise UsageError(f"not a readable file: {p}")
    if args.shards < 1 or args.workers < 1:
        raise UsageError("--shards and --workers must be positive")

    out = Path(args.out)
    manifest_path = Path(args.manifest or f"{out}.manifest.json")
    shard_dir = Path(args.shard_dir or f"{out}.shards")
    shard_dir.mkdir(parents=True, exist_ok=True)
    plan = shards.ShardManifest(args.language, options, [str(p) for p in args.inputs],
                                shards.plan_shards(args.inputs, args.shards, shard_dir),
                                args.strict)
    if manifest_path.exists():
        previous = shards.ShardManifest.load(manifest_path)
        if previous.plan_matches(plan):
            log.info("resuming from %s", manifest_path)
            plan = previous
    only = set(args.only_shard) if args.only_shard else None
    manifest = shards.run_shards(plan, manifest_path, workers=args.workers, only=only)
    for rec in manifest.shards.values():
        if rec.status == shards.DONE:
            _report_diagnostics(rec.diagnostics)
    missing = manifest.missing()
    if missing:
        log.error("shards not completed: %s (see %s)", missing, manifest_path)
        if not args.allow_partial:
            return EXIT_PARTIAL
        log.warning("merging partial run (--allow-partial)")
    db = shards.merge_manifest(manifest, allow_partial=args.allow_partial)
    freqdb.save(db, out)
    log.info("wrote %s: %d keys, N=%d", out, len(db), db.total)
    return EXIT_OK


# -- validate / report / probe -----------------------------------------------

def cmd_validate(args) -> int:
    db = freqdb.load(args.db)
    attestation, divergence = _thresholds(args)
    specs, rejected = gapspec.load_gapspecs(args.gaps)
    for r in rejected:
        log.warning("gap spec entry %d rejected: %s", r.index, r.reason)
    if not specs:
        log.warning("no gap specs in %s; writing an empty verdict file", args.gaps)
    verdicts = gapspec.validate_all(db, specs, attestation, divergence)
    meta = {"language": db.language, "options": db.options.encode(),
            "defective_max": attestation.defective_max, "edge_max": attestation.edge_max,
            "lor_large": divergence.large, "lor_moderate": divergence.moderate}
    for key in ("sources", "partial", "missing_shards"):
        if key in db.metadata:
            meta[key] = db.metadata[key]
    _write(args.out, gapspec.dumps_verdicts(verdicts, meta))
    return EXIT_OK


def cmd_report(args) -> int:
    verdicts, meta = gapspec.loads_verdicts(Path(args.verdicts).read_text(encoding="utf-8"))
    attestation, divergence = _thresholds(args, meta)
    report = gapspec.summarize(verdicts, divergence, attestation,
                               {k: meta[k] for k in ("partial", "missing_shards", "sources")
                                if k in meta})
    _write(args.out, report.render(args.format))
    return EXIT_OK


def cmd_probe(args) -> int:
    db = freqdb.load(args.db)
    attestation, divergence = _thresholds(args)
    try:
        pattern = FeaturePattern.of(args.upos, args.feats or None)
    except ConlluError as exc:
        raise UsageError(f"bad --feats: {exc}") from None
    lemma = db.normalize_lemma(args.lemma)
    lines = [f"lemma\t{lemma}", f"pattern\t{pattern.serialize()}"]
    try:
        t = mle_probs(db, lemma, pattern)
    except NotAttestedError:
        lines += ["n_w\t0", "n_l\t0", f"N\t{db.total}", f"band\t{AttestationBand.NOT_ATTESTED}"]
    else:
        lo = log_odds(t)
        lines += [f"n_w\t{t.n_w}", f"n_l\t{t.n_l}", f"n_f\t{t.n_f}", f"N\t{t.N}",
                  f"L_w\t{'' if lo is None else repr(lo)}",
                  f"band\t{classify_attestation(t.n_w, attestation)}",
                  f"divergence\t{classify_divergence(lo, divergence)}"]
    _write(None, "\n".join(lines) + "\n")
    return EXIT_OK


# -- fetch-gaps --------------------------------------------------------------

def _open_dump(path: str):
    if path.endswith(".bz2"):
        return bz2.open(path, "rb")
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def cmd_fetch_gaps(args) -> int:
    from . import wiktionary as wk

    phrase_map = wk.load_phrase_map(args.phrase_map) if args.phrase_map else None
    if args.dump:
        with _open_dump(args.dump) as fh:
            harvest = wk.harvest_dump(fh, args.language, phrase_map=phrase_map,
                                      section=args.section)
    else:
        if not args.category:
            raise UsageError("fetch-gaps needs --category or --dump")
        client = wk.MediaWikiClient(endpoint=args.endpoint, cache_dir=args.cache,
                                    min_interval=args.min_interval, offline=args.offline)
        results = [wk.harvest_category(client, c, args.language, phrase_map, args.section)
                   for c in args.category]
        harvest = wk.Harvest(
            [s for h in results for s in h.specs],
            [a for h in results for a in h.unmapped],
            [a for h in results for a in h.annotations],
            sorted({t for h in results for t in h.missing_section}),
            sorted({t for h in results for t in h.without_markers}))
    _write(args.out, gapspec.dumps_gapspecs(harvest.specs))
    if args.unmapped:
        Path(args.unmapped).write_text(json.dumps(
            [a.__dict__ for a in harvest.unmapped], ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
    log.info("%d gap specs, %d unmapped annotations, %d pages without markers, "
             "%d pages without a %s section", len(harvest.specs), len(harvest.unmapped),
             len(harvest.without_markers), len(harvest.missing_section), args.language)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

def _add_thresholds(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    d = (lambda x: x) if defaults else (lambda x: None)
    p.add_argument("--defective-max", type=int, default=d(10),
                   help="highest count still LikelyDefective (default 10)")
    p.add_argument("--edge-max", type=int, default=d(100),
                   help="highest count still OnTheEdge (default 100)")
    p.add_argument("--lor-large", type=float, default=d(1.9),
                   help="log-odds strictly above this is Large (default 1.9)")
    p.add_argument("--lor-moderate", type=float, default=d(1.5),
                   help="log-odds strictly above this is Moderate (default 1.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapcheck", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="build a frequency database from CoNLL-U files")
    p.add_argument("inputs", nargs="*", help="CoNLL-U files, or '-' for stdin")
    p.add_argument("--language", required=True)
    p.add_argument("--out", required=True, help="merged database path")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--manifest", help="default: <out>.manifest.json")
    p.add_argument("--shard-dir", help="default: <out>.shards/")
    p.add_argument("--only-shard", type=int, action="append",
                   help="run only this shard id (repeatable)")
    p.add_argument("--allow-partial", action="store_true",
                   help="merge even if some shards failed")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--exclude-upos", default="", help="comma-separated UPOS tags not counted")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("validate", help="check gap claims against a database")
    p.add_argument("--db", required=True)
    p.add_argument("--gaps", required=True, help="gap-spec JSON")
    p.add_argument("--out", help="verdict TSV (default stdout)")
    _add_thresholds(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="summarize a verdict file")
    p.add_argument("verdicts")
    p.add_argument("--format", choices=("table", "tsv", "json"), default="table")
    p.add_argument("--out")
    _add_thresholds(p, defaults=False)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fetch-gaps", help="compile gap specs from Wiktionary")
    p.add_argument("--language", required=True, help="language code, e.g. la or it")
    p.add_argument("--category", action="append",
                   help="category name, e.g. 'Latin defective verbs' (repeatable)")
    p.add_argument("--section", help="language section heading (default from --language)")
    p.add_argument("--cache", help="cache directory (default $GAPCHECK_CACHE)")
    p.add_argument("--endpoint", default="https://en.wiktionary.org/w/api.php")
    p.add_argument("--min-interval", type=float, default=1.0)
    p.add_argument("--offline", action="store_true", help="serve only from cache")
    p.add_argument("--dump", help="XML dump (.xml, .xml.bz2, .xml.gz) instead of the API")
    p.add_argument("--phrase-map", help="JSON phrase map overriding the defaults")
    p.add_argument("--unmapped", help="write annotations needing review to this JSON file")
    p.add_argument("--out", help="gap-spec JSON (default stdout)")
    p.set_defaults(func=cmd_fetch_gaps)

    p = sub.add_parser("probe", help="statistics for one lemma and pattern")
    p.add_argument("--db", required=True)
    p.add_argument("--lemma", required=True)
    p.add_argument("--upos")
    p.add_argument("--feats", help="e.g. Voice=Pass")
    _add_thresholds(p)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="gapcheck: %(levelname)s: %(message)s", stream=sys.stderr)
    from .wiktionary.client import NetworkError, WiktionaryError

    try:
        return args.func(args)
    except (UsageError, ThresholdError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except NetworkError as exc:
        log.error("network: %s", exc)
        return EXIT_NETWORK
    except shards.IncompleteRunError as exc:
        log.error("%s", exc)
        return EXIT_PARTIAL
    except (ConlluError, DatabaseError, GapSpecError, EmptyReportError,
            shards.ManifestError, WiktionaryError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
