"""
Gap claims from Wiktionary pages, offline
=========================================

Parses the saved wikitext of three verb pages, shows the markers that were
found and the gap specs they compile to. Live harvesting uses the same code
through ``gapcheck fetch-gaps --category ...``; this demo needs no network.
"""

from pathlib import Path

from gapcheck.gapspec import dumps_gapspecs
from gapcheck.wiktionary import find_templates, harvest_pages
from gapcheck.wiktionary.wikitext import language_section

PAGES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "wiktionary"

text = (PAGES / "discrepo.wikitext").read_text(encoding="utf-8")
print("templates in the Latin section of discrepo:")
for t in find_templates(language_section(text, "Latin")):
    print(f"  {t.name:<10} {t.positional[:2]}")
# The .noperf inside an HTML comment and the .nofut inside <nowiki> are not
# picked up; only the live la-verb/la-conj markers count.

for lang, titles in (("la", ["discrepo", "excommunico"]), ("it", ["vertere"])):
    pages = [(t, (PAGES / f"{t}.wikitext").read_text(encoding="utf-8")) for t in titles]
    harvest = harvest_pages(pages, lang)
    print(f"\n== {lang}")
    for ann in harvest.annotations:
        print(f"  {ann.title}: {ann.phrase!r} from {ann.raw}")
    print(f"  unmapped: {len(harvest.unmapped)}")
    print(dumps_gapspecs(harvest.specs))
