"""
Checking gap claims against the bundled fixtures
================================================

Loads the small Latin and Italian frequency databases shipped with the tests,
validates the gap claims next to them and prints verdicts plus the summary
tables. Run from the repository root:

    python demos/validate_reference_fixtures.py
"""

from pathlib import Path

from gapcheck import freqdb
from gapcheck.gapspec import load_gapspecs, summarize, validate_all

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "reference"

for lang in ("la", "it"):
    db = freqdb.load(FIXTURES / f"{lang}.db.tsv")
    specs, rejected = load_gapspecs(FIXTURES / f"{lang}.gaps.json")
    print(f"== {lang}: {len(db)} cells, N = {db.total}, {len(specs)} claims")

    verdicts = validate_all(db, specs)
    for v in verdicts:
        lo = "-" if v.log_odds is None else f"{v.log_odds:+.2f}"
        n_w = "-" if v.n_w is None else v.n_w
        print(f"  {v.lemma:<12} {v.pattern_text:<32} n_w={n_w!s:<5} "
              f"{v.band.value:<20} L={lo:<6} {v.divergence.value}")

    # The table groups by lemma, so inquam's two claims count once.
    print()
    print(summarize(verdicts).to_table())

# A claim that excommunico lacks the perfect is contradicted by 846 tokens:
# the band says "not defective" and the log-odds says the perfect is used far
# more than independence would predict.
