"""Corpus evidence for and against claimed inflectional gaps.

Count (lemma, UPOS, feature bundle) cells in morphologically tagged CoNLL-U
corpora, then judge gap claims by absolute attestation and by log-odds
divergence from the frequency expected under lemma/feature independence.
"""

from .conllu import AnnotatedToken, ConlluError, FeatureBundle, canonicalize_bundle, parse_stream
from .freqdb import (
    BuildOptions,
    CountKey,
    FrequencyDatabase,
    build,
    count_lemma,
    count_marginal,
    count_pair,
    load,
    merge,
    save,
)
from .gapspec import GapSpec, ValidationReport, Verdict, load_gapspecs, summarize, validate
from .pattern import FeaturePattern, matches
from .stats import (
    AttestationBand,
    AttestationThresholds,
    DivergenceClass,
    DivergenceThresholds,
    ProbabilityTriple,
    classify_attestation,
    classify_divergence,
    log_odds,
    mle_probs,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedToken", "ConlluError", "FeatureBundle", "canonicalize_bundle", "parse_stream",
    "BuildOptions", "CountKey", "FrequencyDatabase", "build", "count_lemma", "count_marginal",
    "count_pair", "load", "merge", "save", "GapSpec", "ValidationReport", "Verdict",
    "load_gapspecs", "summarize", "validate", "FeaturePattern", "matches", "AttestationBand",
    "AttestationThresholds", "DivergenceClass", "DivergenceThresholds", "ProbabilityTriple",
    "classify_attestation", "classify_divergence", "log_odds", "mle_probs",
]
