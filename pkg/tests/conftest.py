from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from gapcheck.conllu import AnnotatedToken, canonicalize_bundle

FIXTURES = Path(__file__).parent / "fixtures"
REFERENCE = FIXTURES / "reference"
WIKI = FIXTURES / "wiktionary"

_FEATURE_SPACE = {
    "Aspect": ["Imp", "Perf"],
    "Mood": ["Ind", "Sub", "Imp"],
    "Number": ["Sing", "Plur"],
    "Person": ["1", "2", "3"],
    "Tense": ["Pres", "Past", "Fut"],
    "VerbForm": ["Fin", "Inf", "Part"],
    "Voice": ["Act", "Pass"],
}
_UPOS = ["VERB", "NOUN", "ADJ", "AUX"]


@dataclass
class SyntheticCorpus:
    """Token arrays plus the pools they index, so oracles can work on raw tallies."""

    lemma_idx: np.ndarray
    upos_idx: np.ndarray
    bundle_idx: np.ndarray
    lemmata: list[str]
    upos: list[str]
    bundles: list[str]

    def tokens(self) -> list[AnnotatedToken]:
        parsed = [canonicalize_bundle(b) for b in self.bundles]
        return [AnnotatedToken(self.lemmata[l], self.lemmata[l], self.upos[u], parsed[b])
                for l, u, b in zip(self.lemma_idx.tolist(), self.upos_idx.tolist(),
                                   self.bundle_idx.tolist())]

    def conllu(self) -> str:
        lines = []
        for i, (l, u, b) in enumerate(zip(self.lemma_idx.tolist(), self.upos_idx.tolist(),
                                          self.bundle_idx.tolist())):
            tid = i % 12 + 1
            if tid == 1 and i:
                lines.append("")
            lines.append(f"{tid}\tw{l}\t{self.lemmata[l]}\t{self.upos[u]}\t_\t"
                         f"{self.bundles[b]}\t0\tdep\t_\t_")
        return "\n".join(lines) + "\n"


def random_bundles(rng: np.random.Generator, k: int) -> list[str]:
    out = set()
    keys = sorted(_FEATURE_SPACE)
    while len(out) < k:
        chosen = [key for key in keys if rng.random() < 0.5]
        out.add("|".join(f"{key}={rng.choice(_FEATURE_SPACE[key])}" for key in chosen) or "_")
    return sorted(out)


def synthetic_corpus(rng: np.random.Generator, n_tokens: int, n_lemmata: int,
                     n_bundles: int = 40) -> SyntheticCorpus:
    lemmata = [f"lem{i}" for i in range(n_lemmata)]
    bundles = random_bundles(rng, n_bundles)
    # Zipf-ish lemma distribution like real corpora
    weights = 1.0 / np.arange(1, n_lemmata + 1)
    weights /= weights.sum()
    return SyntheticCorpus(
        rng.choice(n_lemmata, size=n_tokens, p=weights),
        rng.integers(0, len(_UPOS), size=n_tokens),
        rng.integers(0, len(bundles), size=n_tokens),
        lemmata, list(_UPOS), bundles,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, (ok, detail) in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
