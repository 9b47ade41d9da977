"""Partial feature patterns used to describe paradigm cells in gap claims."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .conllu import EMPTY_BUNDLE, FeatureBundle, MalformedFeatsError, canonicalize_bundle


@dataclass(frozen=True, order=True)
class FeaturePattern:
    """An optional UPOS constraint plus features that must all be present.

    ``FeaturePattern()`` is the vacuous pattern and matches every cell.
    """

    upos: str | None = None
    feats: FeatureBundle = EMPTY_BUNDLE

    @classmethod
    def of(cls, upos: str | None = None, feats: Mapping[str, str] | str | None = None
           ) -> "FeaturePattern":
        if feats is None:
            bundle = EMPTY_BUNDLE
        elif isinstance(feats, str):
            bundle = canonicalize_bundle(feats)
        else:
            bundle = FeatureBundle.from_mapping(feats)
        return cls(upos or None, bundle)

    @property
    def is_vacuous(self) -> bool:
        return self.upos is None and not self.feats

    def serialize(self) -> str:
        """Compact form ``UPOS;Key=Val|...`` with ``*`` for any UPOS."""
        return f"{self.upos or '*'};{self.feats.serialize()}"

    @classmethod
    def parse(cls, text: str) -> "FeaturePattern":
        upos, sep, feats = text.partition(";")
        if not sep:
            raise MalformedFeatsError(f"pattern {text!r} lacks ';' separator")
        return cls(None if upos == "*" else upos, canonicalize_bundle(feats))

    def to_json(self) -> dict:
        out: dict = {}
        if self.upos is not None:
            out["upos"] = self.upos
        out["feats"] = self.feats.as_dict()
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "FeaturePattern":
        return cls.of(obj.get("upos"), obj.get("feats") or {})

    def __str__(self) -> str:
        return self.serialize()


def matches(pattern: FeaturePattern, upos: str, bundle: FeatureBundle) -> bool:
    """True iff the UPOS constraint holds and every pattern pair is in ``bundle``."""
    if pattern.upos is not None and pattern.upos != upos:
        return False
    return bundle.issuperset(pattern.feats)
