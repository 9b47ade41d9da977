"""Acquire gap claims from Wiktionary, live (cached) or from an XML dump."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable

from ..gapspec import GapSpec
from .client import (
    CacheMiss,
    CategoryListing,
    MediaWikiClient,
    NetworkError,
    PageMissing,
    ResponseFormatError,
    WiktionaryError,
    iter_dump_pages,
)
from .compile import DEFAULT_PHRASE_MAPS, SECTION_NAMES, compile_gapspecs, load_phrase_map
from .wikitext import RawGapAnnotation, SectionNotFound, find_templates, parse_gap_annotations

log = logging.getLogger(__name__)

__all__ = [
    "CacheMiss", "CategoryListing", "MediaWikiClient", "NetworkError", "PageMissing",
    "ResponseFormatError", "WiktionaryError", "iter_dump_pages", "DEFAULT_PHRASE_MAPS",
    "SECTION_NAMES", "compile_gapspecs", "load_phrase_map", "RawGapAnnotation",
    "SectionNotFound", "find_templates", "parse_gap_annotations", "Harvest",
    "harvest_pages", "harvest_category", "harvest_dump",
]


@dataclass
class Harvest:
    specs: list[GapSpec]
    unmapped: list[RawGapAnnotation]
    annotations: list[RawGapAnnotation]
    missing_section: list[str] = field(default_factory=list)
    without_markers: list[str] = field(default_factory=list)


def harvest_pages(pages: Iterable[tuple[str, str]], language: str,
                  phrase_map=None, section: str | None = None) -> Harvest:
    """Parse ``(title, wikitext)`` pairs and compile their gap markers."""
    section = section or SECTION_NAMES.get(language, language)
    annotations, missing, bare = [], [], []
    for title, text in pages:
        try:
            found = parse_gap_annotations(text, section, title)
        except SectionNotFound:
            missing.append(title)
            continue
        if not found:
            bare.append(title)
        annotations.extend(found)
    specs, unmapped = compile_gapspecs(annotations, language, phrase_map)
    return Harvest(specs, unmapped, annotations, sorted(missing), sorted(bare))


def harvest_category(client: MediaWikiClient, category: str, language: str,
                     phrase_map=None, section: str | None = None) -> Harvest:
    listing = client.fetch_category(category)
    if listing.empty:
        log.warning("category %s has no members", listing.category)

    def pages():
        for title in listing.members:
            try:
                yield title, client.fetch_wikitext(title)
            except PageMissing:
                log.warning("page %s disappeared", title)

    return harvest_pages(pages(), language, phrase_map, section)


def harvest_dump(stream: IO[bytes], language: str, titles: set[str] | None = None,
                 phrase_map=None, section: str | None = None) -> Harvest:
    section_name = section or SECTION_NAMES.get(language, language)
    marker = f"=={section_name}=="

    def pages():
        for title, text in iter_dump_pages(stream):
            if titles is not None and title not in titles:
                continue
            if titles is None and marker not in text.replace(" ", ""):
                continue
            yield title, text

    return harvest_pages(pages(), language, phrase_map, section)
