"""Streaming CoNLL-U reader.

Only the columns needed for counting are kept (FORM, LEMMA, UPOS, FEATS).
Multiword-token ranges (``3-4``) and empty nodes (``3.1``) are skipped so
every syntactic word is seen exactly once.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Iterable, Iterator, Union

UPOS_TAGS = frozenset(
    "ADJ ADP ADV AUX CCONJ DET INTJ NOUN NUM PART PRON PROPN PUNCT SCONJ SYM VERB X".split()
)


class ConlluError(ValueError):
    """A malformed CoNLL-U line."""

    def __init__(self, message: str, line_no: int | None = None, line: str | None = None):
        self.reason = message
        self.line_no = line_no
        self.line = line
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(where + message)


class MalformedFeatsError(ConlluError):
    """FEATS column that is not a valid ``Key=Value|...`` list."""


@dataclass(frozen=True, order=True)
class FeatureBundle:
    """Canonical, key-sorted set of morphosyntactic attributes.

    Construct through :meth:`parse` or :meth:`from_mapping`; the raw
    constructor trusts that ``attrs`` is already canonical.
    """

    attrs: tuple[tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, raw: str) -> "FeatureBundle":
        return canonicalize_bundle(raw)

    @classmethod
    def from_mapping(cls, mapping) -> "FeatureBundle":
        items = sorted((str(k), str(v)) for k, v in dict(mapping).items())
        for k, v in items:
            _check_pair(k, v, f"{k}={v}")
        return cls(tuple(items))

    def serialize(self) -> str:
        if not self.attrs:
            return "_"
        return "|".join(f"{k}={v}" for k, v in self.attrs)

    def as_dict(self) -> dict[str, str]:
        return dict(self.attrs)

    def issuperset(self, other: "FeatureBundle") -> bool:
        if not other.attrs:
            return True
        mine = dict(self.attrs)
        return all(mine.get(k) == v for k, v in other.attrs)

    def __len__(self) -> int:
        return len(self.attrs)

    def __bool__(self) -> bool:
        return bool(self.attrs)

    def __str__(self) -> str:
        return self.serialize()


EMPTY_BUNDLE = FeatureBundle()


def _check_pair(key: str, value: str, pair: str) -> None:
    if not key or not value:
        raise MalformedFeatsError(f"empty key or value in feature pair {pair!r}")
    if any(c in key + value for c in "|\t\n"):
        raise MalformedFeatsError(f"illegal character in feature pair {pair!r}")


@lru_cache(maxsize=65536)
def canonicalize_bundle(raw: str) -> FeatureBundle:
    """Parse a FEATS column into its canonical (key-sorted) form.

    >>> canonicalize_bundle("Tense=Pres|Mood=Ind").serialize()
    'Mood=Ind|Tense=Pres'
    """
    if raw == "_" or raw == "":
        return EMPTY_BUNDLE
    pairs: dict[str, str] = {}
    for pair in raw.split("|"):
        key, sep, value = pair.partition("=")
        if not sep:
            raise MalformedFeatsError(f"feature pair without '=': {pair!r}")
        _check_pair(key, value, pair)
        if key in pairs:
            raise MalformedFeatsError(f"duplicate feature key {key!r}")
        pairs[key] = value
    return FeatureBundle(tuple(sorted(pairs.items())))


@dataclass(frozen=True, slots=True)
class AnnotatedToken:
    form: str
    lemma: str
    upos: str
    feats: FeatureBundle = EMPTY_BUNDLE


@dataclass
class ParseDiagnostics:
    """Counters filled in by lenient parsing."""

    lines: int = 0
    tokens: int = 0
    skipped_ranges: int = 0
    skipped_empty_nodes: int = 0
    malformed_lines: int = 0
    malformed_feats: int = 0
    encoding_errors: int = 0
    errors: list[ConlluError] = field(default_factory=list)
    max_recorded_errors: int = 100

    def record(self, err: ConlluError) -> None:
        if len(self.errors) < self.max_recorded_errors:
            self.errors.append(err)

    def absorb(self, other: "ParseDiagnostics") -> None:
        for name in ("lines", "tokens", "skipped_ranges", "skipped_empty_nodes",
                     "malformed_lines", "malformed_feats", "encoding_errors"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        for err in other.errors:
            self.record(err)


Source = Union[IO[str], IO[bytes], Iterable[str], Iterable[bytes], str]


def _decode(line, strict: bool, diag: ParseDiagnostics, line_no: int) -> str:
    if isinstance(line, str):
        return line
    try:
        return line.decode("utf-8")
    except UnicodeDecodeError as exc:
        if strict:
            raise ConlluError(f"invalid UTF-8: {exc.reason}", line_no) from None
        diag.encoding_errors += 1
        return line.decode("utf-8", errors="replace")


def parse_stream(
    source: Source,
    *,
    strict: bool = False,
    diagnostics: ParseDiagnostics | None = None,
    first_line_no: int = 1,
) -> Iterator[AnnotatedToken]:
    """Yield one :class:`AnnotatedToken` per basic token line of ``source``.

    ``source`` may be a text or binary file object or any iterable of lines.
    A plain ``str`` is treated as the document itself, not as a path.

    In strict mode the first malformed line raises :class:`ConlluError`. In
    lenient mode (the default) malformed lines are skipped and counted in
    ``diagnostics``; a malformed FEATS column keeps the token with an empty
    bundle. Bytes input is decoded as UTF-8, with invalid sequences replaced
    in lenient mode.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    diag = diagnostics if diagnostics is not None else ParseDiagnostics()
    line_no = first_line_no - 1
    for raw in source:
        line_no += 1
        diag.lines += 1
        line = _decode(raw, strict, diag, line_no).rstrip("\r\n")
        if not line or line[0] == "#":
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            err = ConlluError(f"expected 10 columns, found {len(cols)}", line_no, line)
            if strict:
                raise err
            diag.malformed_lines += 1
            diag.record(err)
            continue
        tid = cols[0]
        if not tid.isdigit():
            if "-" in tid:
                diag.skipped_ranges += 1
                continue
            if "." in tid:
                diag.skipped_empty_nodes += 1
                continue
            err = ConlluError(f"bad token id {tid!r}", line_no, line)
            if strict:
                raise err
            diag.malformed_lines += 1
            diag.record(err)
            continue
        upos = cols[3]
        if upos not in UPOS_TAGS and upos != "_":
            err = ConlluError(f"unknown UPOS tag {upos!r}", line_no, line)
            if strict:
                raise err
            diag.malformed_lines += 1
            diag.record(err)
            continue
        try:
            feats = canonicalize_bundle(cols[5])
        except MalformedFeatsError as exc:
            err = MalformedFeatsError(exc.reason, line_no, line)
            if strict:
                raise err from None
            diag.malformed_feats += 1
            diag.record(err)
            feats = EMPTY_BUNDLE
        diag.tokens += 1
        yield AnnotatedToken(cols[1], cols[2], upos, feats)


def parse_file(path, *, strict: bool = False,
               diagnostics: ParseDiagnostics | None = None) -> Iterator[AnnotatedToken]:
    """Open ``path`` in binary mode and stream tokens from it."""
    with open(path, "rb") as fh:
        yield from parse_stream(fh, strict=strict, diagnostics=diagnostics)
