"""Map Wiktionary gap phrases onto Universal Dependencies feature patterns."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

from ..gapspec import GapSpec
from ..pattern import FeaturePattern
from .wikitext import RawGapAnnotation

PhraseMap = Mapping[str, tuple[FeaturePattern, ...]]


def _v(**feats: str) -> FeaturePattern:
    return FeaturePattern.of("VERB", feats)


_NON_THIRD = (_v(Person="1"), _v(Person="2"))

DEFAULT_PHRASE_MAPS: dict[str, dict[str, tuple[FeaturePattern, ...]]] = {
    "la": {
        "no passive": (_v(Voice="Pass"),),
        "no perfect": (_v(Aspect="Perf"),),
        "no supine": (_v(VerbForm="Sup"),),
        "no future": (_v(Tense="Fut"),),
        "no imperative": (_v(Mood="Imp"),),
        "no passive perfect": (_v(Aspect="Perf", Voice="Pass"),),
        "no active perfect": (_v(Aspect="Perf", Voice="Act"),),
        "third person only": _NON_THIRD,
        "impersonal": _NON_THIRD,
    },
    "it": {
        "no past participle": (_v(Tense="Past", VerbForm="Part"),),
        "no past historic": (_v(Mood="Ind", Tense="Past", VerbForm="Fin"),),
        "no future": (_v(Tense="Fut"),),
        "no passive": (_v(Voice="Pass"),),
        "no imperative": (_v(Mood="Imp"),),
        "third person only": _NON_THIRD,
        "impersonal": _NON_THIRD,
    },
}

SECTION_NAMES = {"la": "Latin", "it": "Italian"}


def load_phrase_map(path: str | Path) -> dict[str, tuple[FeaturePattern, ...]]:
    """Read ``{"phrase": [{"upos": ..., "feats": {...}}, ...]}`` from JSON."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {phrase: tuple(FeaturePattern.from_json(p) for p in pats)
            for phrase, pats in data.items()}


def compile_gapspecs(annotations: Iterable[RawGapAnnotation], language: str,
                     phrase_map: PhraseMap | None = None,
                     lemma_of=None) -> tuple[list[GapSpec], list[RawGapAnnotation]]:
    """Turn annotations into gap specs, one spec per mapped annotation.

    Annotations whose phrase is not in ``phrase_map`` come back in the second
    list for human review. ``lemma_of`` maps a page title to the lemma (the
    title itself by default). Output order is deterministic.
    """
    if phrase_map is None:
        phrase_map = DEFAULT_PHRASE_MAPS.get(language, {})
    specs, unmapped = [], []
    for ann in annotations:
        patterns = phrase_map.get(ann.phrase)
        if not patterns:
            unmapped.append(ann)
            continue
        lemma = lemma_of(ann.title) if lemma_of else ann.title
        specs.append(GapSpec(
            lemma=lemma,
            language=language,
            patterns=tuple(patterns),
            source=f"wiktionary:{ann.title}#{ann.language}:{ann.template}",
            note=f"{ann.phrase} | {ann.raw}",
        ))
    specs.sort(key=lambda s: (s.lemma, s.note))
    unmapped.sort(key=lambda a: (a.title, a.phrase))
    return specs, unmapped
