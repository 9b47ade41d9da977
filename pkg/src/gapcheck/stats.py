"""Defectivity signals: MLE probabilities, log-odds divergence, attestation bands.

The log-odds of a paradigm cell compares its observed probability with what
independence of lemma and feature bundle would predict::

    L = ln(p_w) - ln(p_l) - ln(p_f)

A cell used far more often than expected (large positive L) is evidence that
the form exists. The natural log is used throughout; thresholds are on that
scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .freqdb import FrequencyDatabase, count_lemma, count_marginal, count_pair
from .pattern import FeaturePattern


class NotAttestedError(LookupError):
    """The lemma (or the whole database) has no tokens, so no probabilities exist."""


class ThresholdError(ValueError):
    pass


class AttestationBand(str, enum.Enum):
    NOT_ATTESTED = "NotAttested"
    LIKELY_DEFECTIVE = "LikelyDefective"
    ON_THE_EDGE = "OnTheEdge"
    LIKELY_NOT_DEFECTIVE = "LikelyNotDefective"

    def __str__(self) -> str:
        return self.value


class DivergenceClass(str, enum.Enum):
    LARGE = "Large"
    MODERATE = "Moderate"
    SMALL = "Small"
    UNATTESTED = "Unattested"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AttestationThresholds:
    """Band upper bounds: ``[0, defective_max]``, ``(defective_max, edge_max]``, above."""

    defective_max: int = 10
    edge_max: int = 100

    def __post_init__(self):
        if self.defective_max < 0 or self.defective_max >= self.edge_max:
            raise ThresholdError(
                f"need 0 <= defective_max < edge_max, got {self.defective_max}, {self.edge_max}")


@dataclass(frozen=True)
class DivergenceThresholds:
    """Strict lower bounds on L for the Large and Moderate classes."""

    large: float = 1.9
    moderate: float = 1.5

    def __post_init__(self):
        if not (math.isfinite(self.large) and math.isfinite(self.moderate)):
            raise ThresholdError("divergence thresholds must be finite")
        if self.large <= self.moderate:
            raise ThresholdError(
                f"need large > moderate, got {self.large}, {self.moderate}")


@dataclass(frozen=True)
class ProbabilityTriple:
    n_w: int
    n_l: int
    n_f: int
    N: int

    def __post_init__(self):
        if self.N < 1 or self.n_l < 1:
            raise NotAttestedError("probabilities need N >= 1 and n_l >= 1")
        if not (0 <= self.n_w <= min(self.n_l, self.n_f) and self.n_f <= self.N
                and self.n_l <= self.N):
            raise ValueError(f"inconsistent counts {self}")

    @property
    def p_w(self) -> float:
        return self.n_w / self.N

    @property
    def p_l(self) -> float:
        return self.n_l / self.N

    @property
    def p_f(self) -> float:
        return self.n_f / self.N


def mle_probs(db: FrequencyDatabase, lemma: str, pattern: FeaturePattern) -> ProbabilityTriple:
    """Counts behind p_w, p_l, p_f for ``lemma`` restricted to ``pattern``.

    Raises :class:`NotAttestedError` when the lemma does not occur; callers
    gate on attestation before asking for statistics.
    """
    if db.total == 0:
        raise NotAttestedError("database is empty")
    n_l = count_lemma(db, lemma)
    if n_l == 0:
        raise NotAttestedError(f"lemma {lemma!r} not attested")
    return ProbabilityTriple(count_pair(db, lemma, pattern), n_l,
                             count_marginal(db, pattern), db.total)


def log_odds(t: ProbabilityTriple, alpha: float = 0.0) -> float | None:
    """ln(p_w) - ln(p_l) - ln(p_f), or ``None`` when the cell is unattested.

    ``alpha > 0`` switches to add-alpha estimates of each probability
    (``(n + alpha) / (N + alpha)``), which gives a finite value for n_w = 0.
    That mode is for exploration only; classification uses ``alpha = 0``.
    """
    if alpha:
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        denom = t.N + alpha
        return (math.log((t.n_w + alpha) / denom) - math.log((t.n_l + alpha) / denom)
                - math.log((t.n_f + alpha) / denom))
    if t.n_w == 0:
        return None
    return math.log(t.p_w) - math.log(t.p_l) - math.log(t.p_f)


def classify_attestation(count: int,
                         thresholds: AttestationThresholds = AttestationThresholds()
                         ) -> AttestationBand:
    if count < 0:
        raise ValueError("count must be non-negative")
    if count <= thresholds.defective_max:
        return AttestationBand.LIKELY_DEFECTIVE
    if count <= thresholds.edge_max:
        return AttestationBand.ON_THE_EDGE
    return AttestationBand.LIKELY_NOT_DEFECTIVE


def classify_divergence(value: float | None,
                        thresholds: DivergenceThresholds = DivergenceThresholds()
                        ) -> DivergenceClass:
    """Large iff L > large, Moderate iff moderate < L <= large, else Small."""
    if value is None:
        return DivergenceClass.UNATTESTED
    if value > thresholds.large:
        return DivergenceClass.LARGE
    if value > thresholds.moderate:
        return DivergenceClass.MODERATE
    return DivergenceClass.SMALL
