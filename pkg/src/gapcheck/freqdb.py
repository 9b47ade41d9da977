"""Frequency database of (lemma, UPOS, feature bundle) occurrence counts.

Only the pair counts are stored. Lemma and (UPOS, bundle) marginals and the
total ``N`` are always derived from them, so the three views can never drift
apart. The on-disk format is a versioned, sorted, checksummed TSV.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping, NamedTuple

from .conllu import AnnotatedToken, ConlluError, FeatureBundle, canonicalize_bundle
from .pattern import FeaturePattern, matches

FORMAT_VERSION = "v1"
MAGIC = "#!gapcheck-db"


class DatabaseError(Exception):
    pass


class IncompatibleDatabaseError(DatabaseError):
    """Raised when merging databases built with different languages or options."""


class DatabaseFormatError(DatabaseError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no else message)


class CountKey(NamedTuple):
    lemma: str
    upos: str
    bundle: FeatureBundle

    def sort_key(self) -> tuple[str, str, str]:
        return (self.lemma, self.upos, self.bundle.serialize())


@lru_cache(maxsize=262144)
def _normalize(lemma: str, lowercase: bool) -> str:
    lemma = unicodedata.normalize("NFC", lemma)
    return lemma.lower() if lowercase else lemma


@dataclass(frozen=True)
class BuildOptions:
    """How tokens are filtered and lemmata normalized before counting.

    Lemmata are always NFC-normalized; ``lowercase`` adds Unicode lowercasing.
    Diacritics are never stripped. Tokens whose UPOS is in ``exclude_upos``
    are not counted at all, so they do not contribute to ``N`` either.
    """

    lowercase: bool = True
    exclude_upos: frozenset[str] = frozenset()

    def normalize_lemma(self, lemma: str) -> str:
        return _normalize(lemma, self.lowercase)

    def encode(self) -> str:
        excl = ",".join(sorted(self.exclude_upos))
        return f"exclude_upos={excl};lowercase={int(self.lowercase)}"

    @classmethod
    def decode(cls, text: str) -> "BuildOptions":
        fields: dict[str, str] = {}
        for part in text.split(";"):
            key, sep, value = part.partition("=")
            if not sep:
                raise DatabaseFormatError(f"bad options field {part!r}")
            fields[key] = value
        unknown = set(fields) - {"exclude_upos", "lowercase"}
        if unknown:
            raise DatabaseFormatError(f"unknown build options {sorted(unknown)}")
        excl = fields.get("exclude_upos", "")
        return cls(
            lowercase=fields.get("lowercase", "1") == "1",
            exclude_upos=frozenset(x for x in excl.split(",") if x),
        )


def _merge_metadata(a: Mapping[str, str], b: Mapping[str, str]) -> dict[str, str]:
    # Conflicting values become a sorted ';'-joined union so merging stays
    # commutative and associative.
    out: dict[str, str] = {}
    for key in sorted(set(a) | set(b)):
        values: set[str] = set()
        for side in (a, b):
            if key in side:
                values.update(v for v in side[key].split(";"))
        out[key] = ";".join(sorted(values))
    return out


@dataclass(frozen=True, eq=False)
class FrequencyDatabase:
    """Immutable count table plus derived marginals.

    ``pair_counts`` maps :class:`CountKey` to positive counts. ``lemma_counts``,
    ``marginal_counts`` (keyed by ``(upos, bundle)``) and ``total`` are
    computed on construction.
    """

    language: str
    pair_counts: Mapping[CountKey, int]
    options: BuildOptions = BuildOptions()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        pairs = dict(self.pair_counts)
        lemma_counts: dict[str, int] = defaultdict(int)
        marginal: dict[tuple[str, FeatureBundle], int] = defaultdict(int)
        by_lemma: dict[str, list[tuple[str, FeatureBundle, int]]] = defaultdict(list)
        total = 0
        for key, n in pairs.items():
            if not isinstance(n, int) or n < 1:
                raise DatabaseError(f"count for {key} must be a positive integer, got {n!r}")
            lemma_counts[key.lemma] += n
            marginal[(key.upos, key.bundle)] += n
            by_lemma[key.lemma].append((key.upos, key.bundle, n))
            total += n
        setattr_ = object.__setattr__
        setattr_(self, "pair_counts", MappingProxyType(pairs))
        setattr_(self, "metadata", MappingProxyType(dict(self.metadata)))
        setattr_(self, "lemma_counts", MappingProxyType(dict(lemma_counts)))
        setattr_(self, "marginal_counts", MappingProxyType(dict(marginal)))
        setattr_(self, "total", total)
        setattr_(self, "_by_lemma", dict(by_lemma))
        setattr_(self, "_marginal_cache", {})

    @property
    def N(self) -> int:
        return self.total

    def __len__(self) -> int:
        return len(self.pair_counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrequencyDatabase):
            return NotImplemented
        return (self.language == other.language and self.options == other.options
                and dict(self.pair_counts) == dict(other.pair_counts)
                and dict(self.metadata) == dict(other.metadata))

    def __repr__(self) -> str:
        return (f"FrequencyDatabase(language={self.language!r}, keys={len(self)}, "
                f"N={self.total})")

    def normalize_lemma(self, lemma: str) -> str:
        return self.options.normalize_lemma(lemma)

    def cells(self, lemma: str) -> list[tuple[str, FeatureBundle, int]]:
        """``(upos, bundle, count)`` for every counted cell of ``lemma``."""
        return list(self._by_lemma.get(self.normalize_lemma(lemma), ()))

    def sorted_items(self) -> list[tuple[CountKey, int]]:
        return sorted(self.pair_counts.items(), key=lambda kv: kv[0].sort_key())

    def with_metadata(self, **updates: str) -> "FrequencyDatabase":
        meta = dict(self.metadata)
        meta.update(updates)
        return FrequencyDatabase(self.language, self.pair_counts, self.options, meta)


def build(
    tokens: Iterable[AnnotatedToken],
    language: str,
    options: BuildOptions = BuildOptions(),
    metadata: Mapping[str, str] | None = None,
) -> FrequencyDatabase:
    """Count tokens into a :class:`FrequencyDatabase`.

    Tokens with an empty or ``_`` lemma are dropped, as are tokens whose UPOS
    is excluded by ``options``.
    """
    counts: dict[tuple[str, str, FeatureBundle], int] = {}
    exclude = options.exclude_upos
    lowercase = options.lowercase
    get = counts.get
    for tok in tokens:
        lemma = tok.lemma
        if not lemma or lemma == "_" or tok.upos in exclude:
            continue
        key = (_normalize(lemma, lowercase), tok.upos, tok.feats)
        counts[key] = get(key, 0) + 1
    pairs = {CountKey(*k): n for k, n in counts.items()}
    return FrequencyDatabase(language, pairs, options, dict(metadata or {}))


def empty(language: str, options: BuildOptions = BuildOptions()) -> FrequencyDatabase:
    return FrequencyDatabase(language, {}, options)


def merge(a: FrequencyDatabase, b: FrequencyDatabase) -> FrequencyDatabase:
    """Keywise sum of two databases built with the same language and options."""
    if a.language != b.language:
        raise IncompatibleDatabaseError(
            f"cannot merge language {a.language!r} with {b.language!r}")
    if a.options != b.options:
        raise IncompatibleDatabaseError(
            f"cannot merge options {a.options.encode()!r} with {b.options.encode()!r}")
    pairs = dict(a.pair_counts)
    for key, n in b.pair_counts.items():
        pairs[key] = pairs.get(key, 0) + n
    return FrequencyDatabase(a.language, pairs, a.options,
                             _merge_metadata(a.metadata, b.metadata))


def merge_all(dbs: Iterable[FrequencyDatabase]) -> FrequencyDatabase:
    dbs = list(dbs)
    if not dbs:
        raise DatabaseError("nothing to merge")
    first = dbs[0]
    for other in dbs[1:]:
        if other.language != first.language or other.options != first.options:
            merge(first, other)  # raises with a precise message
    pairs: dict[CountKey, int] = {}
    meta: dict[str, str] = {}
    for db in dbs:
        for key, n in db.pair_counts.items():
            pairs[key] = pairs.get(key, 0) + n
        meta = _merge_metadata(meta, db.metadata)
    return FrequencyDatabase(first.language, pairs, first.options, meta)


# -- persistence -------------------------------------------------------------

def _row_lines(db: FrequencyDatabase) -> list[str]:
    return [f"{k.lemma}\t{k.upos}\t{k.bundle.serialize()}\t{n}\n"
            for k, n in db.sorted_items()]


def dumps(db: FrequencyDatabase) -> str:
    rows = _row_lines(db)
    digest = hashlib.sha256("".join(rows).encode("utf-8")).hexdigest()
    meta = json.dumps(dict(db.metadata), sort_keys=True, ensure_ascii=False)
    header = [
        f"{MAGIC} {FORMAT_VERSION}\n",
        f"#!language {db.language}\n",
        f"#!options {db.options.encode()}\n",
        f"#!meta {meta}\n",
        f"#!checksum sha256:{digest}\n",
    ]
    return "".join(header + rows)


def save(db: FrequencyDatabase, sink: str | os.PathLike | IO[str]) -> None:
    """Write ``db`` as UTF-8 TSV. Paths are written atomically."""
    text = dumps(db)
    if hasattr(sink, "write"):
        sink.write(text)
        return
    path = Path(sink)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _expect_header(line: str | None, prefix: str, line_no: int) -> str:
    if line is None or not line.startswith(prefix + " "):
        raise DatabaseFormatError(f"expected '{prefix} ...' header", line_no)
    return line[len(prefix) + 1:]


def loads(text: str) -> FrequencyDatabase:
    return load(io.StringIO(text))


def load(source: str | os.PathLike | IO[str]) -> FrequencyDatabase:
    """Read a database written by :func:`save`, verifying version, rows and checksum."""
    if hasattr(source, "read"):
        return _load_lines(iter(source))
    with open(source, encoding="utf-8", newline="") as fh:
        return _load_lines(iter(fh))


def _load_lines(lines: Iterator[str]) -> FrequencyDatabase:
    head = []
    for _ in range(5):
        line = next(lines, None)
        head.append(line.rstrip("\n") if line is not None else None)
    version = _expect_header(head[0], MAGIC, 1)
    if version != FORMAT_VERSION:
        raise DatabaseFormatError(f"unsupported database version {version!r}", 1)
    language = _expect_header(head[1], "#!language", 2)
    options = BuildOptions.decode(_expect_header(head[2], "#!options", 3))
    try:
        metadata = json.loads(_expect_header(head[3], "#!meta", 4))
    except json.JSONDecodeError as exc:
        raise DatabaseFormatError(f"bad metadata JSON: {exc}", 4) from None
    checksum = _expect_header(head[4], "#!checksum", 5)
    if not checksum.startswith("sha256:"):
        raise DatabaseFormatError("unknown checksum algorithm", 5)

    hasher = hashlib.sha256()
    pairs: dict[CountKey, int] = {}
    for line_no, line in enumerate(lines, start=6):
        hasher.update(line.encode("utf-8"))
        row = line.rstrip("\n")
        cols = row.split("\t")
        if len(cols) != 4:
            raise DatabaseFormatError(f"row has {len(cols)} columns, expected 4: {row!r}", line_no)
        lemma, upos, feats, count = cols
        try:
            bundle = canonicalize_bundle(feats)
        except ConlluError as exc:
            raise DatabaseFormatError(f"bad bundle {feats!r}: {exc}", line_no) from None
        if bundle.serialize() != feats:
            raise DatabaseFormatError(f"bundle {feats!r} is not canonical", line_no)
        if not count.isdigit() or int(count) < 1:
            raise DatabaseFormatError(f"count must be a positive integer, got {count!r}", line_no)
        if not lemma:
            raise DatabaseFormatError("empty lemma", line_no)
        key = CountKey(lemma, upos, bundle)
        if key in pairs:
            raise DatabaseFormatError(f"duplicate row for {row!r}", line_no)
        pairs[key] = int(count)
    if hasher.hexdigest() != checksum[len("sha256:"):]:
        raise DatabaseFormatError("checksum mismatch: rows were modified or truncated")
    return FrequencyDatabase(language, pairs, options,
                             {str(k): str(v) for k, v in metadata.items()})


# -- queries -----------------------------------------------------------------

def count_lemma(db: FrequencyDatabase, lemma: str) -> int:
    return db.lemma_counts.get(db.normalize_lemma(lemma), 0)


def count_pair(db: FrequencyDatabase, lemma: str, pattern: FeaturePattern) -> int:
    """Tokens of ``lemma`` whose (UPOS, bundle) satisfies ``pattern``."""
    cells = db._by_lemma.get(db.normalize_lemma(lemma))
    if not cells:
        return 0
    return sum(n for upos, bundle, n in cells if matches(pattern, upos, bundle))


def count_marginal(db: FrequencyDatabase, pattern: FeaturePattern) -> int:
    """Tokens of any lemma whose (UPOS, bundle) satisfies ``pattern``."""
    if pattern.is_vacuous:
        return db.total
    cache = db._marginal_cache
    if pattern not in cache:
        cache[pattern] = sum(n for (upos, bundle), n in db.marginal_counts.items()
                             if matches(pattern, upos, bundle))
    return cache[pattern]
