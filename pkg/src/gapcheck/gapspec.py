"""Gap claims, per-claim verdicts and aggregate validation reports."""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .conllu import ConlluError
from .freqdb import FrequencyDatabase, count_lemma
from .pattern import FeaturePattern, matches  # noqa: F401  (re-exported)
from .stats import (
    AttestationBand,
    AttestationThresholds,
    DivergenceClass,
    DivergenceThresholds,
    classify_attestation,
    classify_divergence,
    log_odds,
    mle_probs,
)

VERDICT_COLUMNS = ("lemma", "pattern", "attested", "n_w", "n_l", "n_f", "N",
                   "band", "log_odds", "divergence")


class GapSpecError(ValueError):
    pass


class LanguageMismatchError(GapSpecError):
    pass


class EmptyReportError(ValueError):
    pass


@dataclass(frozen=True)
class GapSpec:
    """A claim that ``lemma`` lacks every cell matched by each of ``patterns``.

    ``lemma`` is kept as written in the source; it is normalized with the
    database's own settings at validation time.
    """

    lemma: str
    language: str
    patterns: tuple[FeaturePattern, ...]
    source: str = ""
    note: str = ""

    def __post_init__(self):
        if not self.lemma:
            raise GapSpecError("gap spec needs a lemma")
        if not self.patterns:
            raise GapSpecError(f"gap spec for {self.lemma!r} has no patterns")
        object.__setattr__(self, "patterns", tuple(self.patterns))

    def to_json(self) -> dict:
        return {
            "language": self.language,
            "lemma": self.lemma,
            "patterns": [p.to_json() for p in self.patterns],
            "source": self.source,
            "note": self.note,
        }


@dataclass(frozen=True)
class RejectedEntry:
    index: int
    entry: Mapping
    reason: str


_ENTRY_KEYS = {"language", "lemma", "patterns", "source", "note", "normalized"}
_PATTERN_KEYS = {"upos", "feats"}


def _spec_from_json(index: int, obj) -> GapSpec:
    if not isinstance(obj, dict):
        raise GapSpecError(f"entry {index}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - _ENTRY_KEYS
    if unknown:
        raise GapSpecError(f"entry {index}: unknown keys {sorted(unknown)}")
    for key in ("language", "lemma", "patterns"):
        if key not in obj:
            raise GapSpecError(f"entry {index}: missing {key!r}")
    if not isinstance(obj["patterns"], list):
        raise GapSpecError(f"entry {index}: 'patterns' must be a list")
    patterns = []
    for p in obj["patterns"]:
        if not isinstance(p, dict) or set(p) - _PATTERN_KEYS:
            raise GapSpecError(f"entry {index}: bad pattern {p!r}")
        feats = p.get("feats") or {}
        if not isinstance(feats, dict):
            raise GapSpecError(f"entry {index}: 'feats' must be an object")
        try:
            patterns.append(FeaturePattern.from_json(p))
        except ConlluError as exc:
            raise GapSpecError(f"entry {index}: {exc}") from None
    return GapSpec(str(obj["lemma"]), str(obj["language"]), tuple(patterns),
                   str(obj.get("source", "")), str(obj.get("note", "")))


def _is_surface_claim(obj) -> bool:
    if not isinstance(obj, dict):
        return False
    if "form" in obj or "forms" in obj:
        return True
    pats = obj.get("patterns")
    return isinstance(pats, list) and any(isinstance(p, dict) and "form" in p for p in pats)


def parse_gapspecs(data) -> tuple[list[GapSpec], list[RejectedEntry]]:
    """Turn decoded gap-spec JSON into specs.

    Claims about a missing surface form cannot be expressed as cells; they are
    returned as rejections instead of being approximated. Anything else that
    is malformed raises :class:`GapSpecError`.
    """
    if not isinstance(data, list):
        raise GapSpecError("gap-spec file must hold a JSON array")
    specs, rejected = [], []
    for i, obj in enumerate(data):
        if _is_surface_claim(obj):
            rejected.append(RejectedEntry(i, obj, "claim names a surface form, not a cell"))
            continue
        specs.append(_spec_from_json(i, obj))
    return specs, rejected


def load_gapspecs(source: str | os.PathLike | IO[str]
                  ) -> tuple[list[GapSpec], list[RejectedEntry]]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    try:
        data = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise GapSpecError(f"invalid JSON: {exc}") from None
    return parse_gapspecs(data)


def dumps_gapspecs(specs: Iterable[GapSpec]) -> str:
    ordered = sorted(specs, key=lambda s: (s.language, s.lemma,
                                           [p.serialize() for p in s.patterns], s.source, s.note))
    return json.dumps([s.to_json() for s in ordered], ensure_ascii=False, indent=2) + "\n"


def save_gapspecs(specs: Iterable[GapSpec], path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps_gapspecs(specs), encoding="utf-8", newline="\n")
    os.replace(tmp, path)


# -- verdicts ----------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    """Outcome for one (lemma, pattern) claim.

    An unattested lemma gets a single verdict covering all of its patterns,
    with no statistics.
    """

    lemma: str
    patterns: tuple[FeaturePattern, ...]
    attested: bool
    band: AttestationBand
    n_w: int | None = None
    n_l: int = 0
    n_f: int | None = None
    N: int = 0
    log_odds: float | None = None
    divergence: DivergenceClass = DivergenceClass.UNATTESTED

    @property
    def pattern(self) -> FeaturePattern:
        if len(self.patterns) != 1:
            raise AttributeError("verdict covers several patterns")
        return self.patterns[0]

    @property
    def pattern_text(self) -> str:
        return " ".join(p.serialize() for p in self.patterns)

    def row(self) -> list[str]:
        def opt(x):
            return "" if x is None else str(x)
        return [self.lemma, self.pattern_text, "1" if self.attested else "0",
                opt(self.n_w), str(self.n_l), opt(self.n_f), str(self.N),
                self.band.value, "" if self.log_odds is None else repr(self.log_odds),
                self.divergence.value]


def validate(db: FrequencyDatabase, spec: GapSpec,
             attestation: AttestationThresholds = AttestationThresholds(),
             divergence: DivergenceThresholds = DivergenceThresholds()) -> list[Verdict]:
    if spec.language != db.language:
        raise LanguageMismatchError(
            f"gap spec for {spec.lemma!r} is {spec.language!r}, database is {db.language!r}")
    lemma = db.normalize_lemma(spec.lemma)
    if count_lemma(db, lemma) == 0:
        return [Verdict(lemma, spec.patterns, False, AttestationBand.NOT_ATTESTED, N=db.total)]
    out = []
    for pattern in spec.patterns:
        t = mle_probs(db, lemma, pattern)
        lo = log_odds(t)
        out.append(Verdict(lemma, (pattern,), True, classify_attestation(t.n_w, attestation),
                           t.n_w, t.n_l, t.n_f, t.N, lo, classify_divergence(lo, divergence)))
    return out


def validate_all(db: FrequencyDatabase, specs: Iterable[GapSpec],
                 attestation: AttestationThresholds = AttestationThresholds(),
                 divergence: DivergenceThresholds = DivergenceThresholds()) -> list[Verdict]:
    """Validate every spec and return verdicts sorted by (lemma, pattern)."""
    verdicts = []
    for spec in specs:
        verdicts.extend(validate(db, spec, attestation, divergence))
    # dedupe identical claims coming from several sources
    unique = {(v.lemma, v.pattern_text): v for v in verdicts}
    return [unique[k] for k in sorted(unique)]


def dumps_verdicts(verdicts: Iterable[Verdict], metadata: Mapping | None = None) -> str:
    buf = io.StringIO()
    if metadata:
        buf.write("#!meta " + json.dumps(dict(metadata), sort_keys=True, ensure_ascii=False) + "\n")
    buf.write("\t".join(VERDICT_COLUMNS) + "\n")
    for v in sorted(verdicts, key=lambda v: (v.lemma, v.pattern_text)):
        buf.write("\t".join(v.row()) + "\n")
    return buf.getvalue()


def loads_verdicts(text: str) -> tuple[list[Verdict], dict]:
    meta: dict = {}
    verdicts = []
    header_seen = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#!meta "):
            meta = json.loads(line[len("#!meta "):])
            continue
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if not header_seen:
            if tuple(cols) != VERDICT_COLUMNS:
                raise GapSpecError(f"line {line_no}: unexpected verdict header {cols}")
            header_seen = True
            continue
        if len(cols) != len(VERDICT_COLUMNS):
            raise GapSpecError(f"line {line_no}: expected {len(VERDICT_COLUMNS)} columns")
        lemma, pats, att, n_w, n_l, n_f, N, band, lo, div = cols
        try:
            verdicts.append(Verdict(
                lemma, tuple(FeaturePattern.parse(p) for p in pats.split(" ")), att == "1",
                AttestationBand(band), int(n_w) if n_w else None, int(n_l),
                int(n_f) if n_f else None, int(N), float(lo) if lo else None,
                DivergenceClass(div)))
        except (ValueError, ConlluError) as exc:
            raise GapSpecError(f"line {line_no}: {exc}") from None
    return verdicts, meta


# -- reports -----------------------------------------------------------------

BAND_ORDER = (AttestationBand.LIKELY_DEFECTIVE, AttestationBand.ON_THE_EDGE,
              AttestationBand.LIKELY_NOT_DEFECTIVE)


def percent(part: int, whole: int) -> Decimal | None:
    """``100 * part / whole`` rounded half-up to one decimal; ``None`` if whole is 0."""
    if whole == 0:
        return None
    return (Decimal(100 * part) / Decimal(whole)).quantize(Decimal("0.1"), ROUND_HALF_UP)


@dataclass
class ValidationReport:
    """Lemma-level aggregates in the shape of the band and log-odds tables.

    Each lemma counts once. Its band comes from the pattern with the most
    attestations and its log-odds is the maximum over its patterns. Band and
    log-odds percentages are taken over attested lemmata only.
    """

    total_lemmata: int
    attested_lemmata: int
    band_counts: dict[AttestationBand, int]
    lor_counts: dict[str, int]
    divergence: DivergenceThresholds = DivergenceThresholds()
    attestation: AttestationThresholds = AttestationThresholds()
    metadata: dict = field(default_factory=dict)

    @property
    def attestation_pct(self) -> Decimal | None:
        return percent(self.attested_lemmata, self.total_lemmata)

    @property
    def band_pct(self) -> dict[AttestationBand, Decimal | None]:
        return {b: percent(self.band_counts[b], self.attested_lemmata) for b in BAND_ORDER}

    @property
    def lor_pct(self) -> dict[str, Decimal | None]:
        return {k: percent(n, self.attested_lemmata) for k, n in self.lor_counts.items()}

    def band_label(self, band: AttestationBand) -> str:
        a = self.attestation
        return {
            AttestationBand.LIKELY_DEFECTIVE: f"Likely defective: <= {a.defective_max}",
            AttestationBand.ON_THE_EDGE: f"On the edge: {a.defective_max + 1} - {a.edge_max}",
            AttestationBand.LIKELY_NOT_DEFECTIVE: f"Likely not defective: > {a.edge_max}",
        }[band]

    def to_json(self) -> dict:
        def num(d):
            return None if d is None else float(d)
        return {
            "total_lemmata": self.total_lemmata,
            "attested_lemmata": self.attested_lemmata,
            "attestation_pct": num(self.attestation_pct),
            "bands": [{"band": b.value, "label": self.band_label(b),
                       "count": self.band_counts[b], "pct": num(self.band_pct[b])}
                      for b in BAND_ORDER],
            "log_odds": [{"threshold": k, "count": n, "pct": num(self.lor_pct[k])}
                         for k, n in self.lor_counts.items()],
            "denominator": self.attested_lemmata,
            "metadata": self.metadata,
        }

    def to_tsv(self) -> str:
        def fmt(d):
            return "" if d is None else str(d)
        lines = ["section\tlabel\tcount\tpct",
                 f"attestation\tattested\t{self.attested_lemmata}\t{fmt(self.attestation_pct)}",
                 f"attestation\ttotal\t{self.total_lemmata}\t"]
        for b in BAND_ORDER:
            lines.append(f"band\t{self.band_label(b)}\t{self.band_counts[b]}\t{fmt(self.band_pct[b])}")
        for k, n in self.lor_counts.items():
            lines.append(f"log_odds\t{k}\t{n}\t{fmt(self.lor_pct[k])}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        def fmt(d):
            return "n/a" if d is None else f"{d}%"
        out = []
        if self.metadata.get("partial"):
            out.append(f"WARNING: database built from a partial corpus "
                       f"(missing shards: {self.metadata.get('missing_shards', '?')})")
        out.append(f"Attested lemmata: {self.attested_lemmata} / {self.total_lemmata} "
                   f"({fmt(self.attestation_pct)})")
        out.append("")
        width = 32
        out.append(f"{'Occurrences':<{width}}{'Lemmata':>9}{'%':>9}")
        for b in BAND_ORDER:
            out.append(f"{self.band_label(b):<{width}}{self.band_counts[b]:>9}"
                       f"{fmt(self.band_pct[b]):>9}")
        out.append("")
        out.append(f"{'Log-odds ratio':<{width}}{'Lemmata':>9}{'%':>9}")
        for k, n in self.lor_counts.items():
            out.append(f"{k:<{width}}{n:>9}{fmt(self.lor_pct[k]):>9}")
        return "\n".join(out) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"
        if fmt == "tsv":
            return self.to_tsv()
        if fmt == "table":
            return self.to_table()
        raise ValueError(f"unknown report format {fmt!r}")


def _threshold_label(x: float) -> str:
    return f"> {x:g}"


def summarize(verdicts: Sequence[Verdict],
              divergence: DivergenceThresholds = DivergenceThresholds(),
              attestation: AttestationThresholds = AttestationThresholds(),
              metadata: Mapping | None = None) -> ValidationReport:
    if not verdicts:
        raise EmptyReportError("no verdicts to summarize")
    by_lemma: dict[str, list[Verdict]] = {}
    for v in verdicts:
        by_lemma.setdefault(v.lemma, []).append(v)
    band_counts = {b: 0 for b in BAND_ORDER}
    large_key, moderate_key = _threshold_label(divergence.large), _threshold_label(divergence.moderate)
    lor_counts = {large_key: 0, moderate_key: 0}
    attested = 0
    for vs in by_lemma.values():
        live = [v for v in vs if v.attested]
        if not live:
            continue
        attested += 1
        strongest = max(live, key=lambda v: v.n_w or 0)
        band_counts[strongest.band] += 1
        values = [v.log_odds for v in live if v.log_odds is not None]
        if values:
            best = max(values)
            if best > divergence.large:
                lor_counts[large_key] += 1
            if best > divergence.moderate:
                lor_counts[moderate_key] += 1
    return ValidationReport(len(by_lemma), attested, band_counts, lor_counts,
                            divergence, attestation, dict(metadata or {}))
