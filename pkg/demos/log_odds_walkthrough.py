"""
Where the log-odds comes from
=============================

Builds a tiny database by hand and computes the three probabilities and the
log-odds step by step, then shows what the number does when a cell is
missing, when the pattern matches everything, and when the corpus is scaled.
"""

import math

from gapcheck.conllu import AnnotatedToken, canonicalize_bundle
from gapcheck.freqdb import build
from gapcheck.pattern import FeaturePattern
from gapcheck.stats import classify_divergence, log_odds, mle_probs


def tokens(lemma, upos, feats, n):
    return [AnnotatedToken(lemma, lemma, upos, canonicalize_bundle(feats))] * n


corpus = (tokens("canto", "VERB", "Voice=Act", 5) + tokens("canto", "VERB", "Voice=Pass", 5)
          + tokens("amo", "VERB", "Voice=Act", 25) + tokens("amo", "VERB", "Voice=Pass", 15)
          + tokens("puella", "NOUN", "Case=Nom", 50))
db = build(corpus, "la")
passive = FeaturePattern.of("VERB", {"Voice": "Pass"})

t = mle_probs(db, "canto", passive)
print(f"n_w={t.n_w} n_l={t.n_l} n_f={t.n_f} N={t.N}")
print(f"p_w={t.p_w} p_l={t.p_l} p_f={t.p_f}")
print(f"L = ln({t.p_w} / ({t.p_l} * {t.p_f})) = {log_odds(t):.4f}  (ln 2.5 = {math.log(2.5):.4f})")

# Positive: canto is passive more often than a random lemma with its
# frequency would be. Far from the 1.5 and 1.9 thresholds, though.
print("class:", classify_divergence(log_odds(t)).value)

# The vacuous pattern matches every cell, so p_w = p_l and p_f = 1.
print("vacuous:", log_odds(mle_probs(db, "canto", FeaturePattern())))

# No tokens in the cell: the log is undefined and we say so.
print("unattested:", log_odds(mle_probs(db, "puella", passive)))

# Only ratios of counts matter, so a corpus ten times larger with the same
# proportions gives the same value.
print("scaled x10:", log_odds(mle_probs(build(corpus * 10, "la"), "canto", passive)))
