"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are printed as the tests run (visible with ``-s``) and repeated in
an "acceptance criteria" section of the terminal summary.
"""

import gc
import math
import subprocess
import sys
import time
import tracemalloc
from contextlib import contextmanager
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gapcheck import freqdb
from gapcheck.cli import EXIT_OK, main
from gapcheck.conllu import AnnotatedToken, canonicalize_bundle, parse_file, parse_stream
from gapcheck.freqdb import CountKey, FrequencyDatabase, build, merge
from gapcheck.gapspec import (
    GapSpec,
    Verdict,
    dumps_verdicts,
    load_gapspecs,
    summarize,
    validate_all,
)
from gapcheck.pattern import FeaturePattern
from gapcheck.stats import (
    AttestationBand,
    DivergenceClass,
    classify_attestation,
    classify_divergence,
    log_odds,
    mle_probs,
)
from gapcheck.wiktionary import RawGapAnnotation, compile_gapspecs, harvest_pages

from conftest import REFERENCE, WIKI, record_criterion, synthetic_corpus


@contextmanager
def criterion(number, label):
    notes = []
    try:
        yield notes
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else ""
        record_criterion(number, False, f"{label}: {type(exc).__name__} {msg}"[:300])
        raise
    record_criterion(number, True, "; ".join([label, *notes]))


# -- 1 --------------------------------------------------------------------------

def test_01_reference_fixture_verdicts():
    with criterion(1, "reference fixture verdicts") as notes:
        t0 = time.perf_counter()
        found = {}
        for lang in ("la", "it"):
            db = freqdb.load(REFERENCE / f"{lang}.db.tsv")
            specs, _ = load_gapspecs(REFERENCE / f"{lang}.gaps.json")
            for v in validate_all(db, specs):
                found[(v.lemma, v.pattern_text)] = v
        elapsed = time.perf_counter() - t0
        expected = [
            ("discrepo", "VERB;Voice=Pass", 3, AttestationBand.LIKELY_DEFECTIVE),
            ("excommunico", "VERB;Aspect=Perf", 846, AttestationBand.LIKELY_NOT_DEFECTIVE),
            ("vertere", "VERB;Tense=Past|VerbForm=Part", 6, AttestationBand.LIKELY_DEFECTIVE),
            ("astrifico", "VERB;Aspect=Perf", None, AttestationBand.NOT_ATTESTED),
        ]
        for lemma, pattern, n_w, band in expected:
            v = found[(lemma, pattern)]
            assert v.n_w == n_w, (lemma, v.n_w)
            assert v.band is band, (lemma, v.band)
        assert elapsed < 1.0, elapsed
        notes.append(f"4/4 bands exact, {elapsed * 1000:.0f} ms")


# -- 2, 3 -------------------------------------------------------------------------

def test_02_band_boundaries():
    with criterion(2, "band boundaries 10/11/100/101"):
        got = [classify_attestation(n) for n in (10, 11, 100, 101)]
        assert got == [AttestationBand.LIKELY_DEFECTIVE, AttestationBand.ON_THE_EDGE,
                       AttestationBand.ON_THE_EDGE, AttestationBand.LIKELY_NOT_DEFECTIVE]


def test_03_divergence_thresholds():
    with criterion(3, "divergence at 1.91/1.9/1.7/1.5/1.0 (strict >)"):
        got = [classify_divergence(x) for x in (1.91, 1.9, 1.7, 1.5, 1.0)]
        assert got == [DivergenceClass.LARGE, DivergenceClass.MODERATE, DivergenceClass.MODERATE,
                       DivergenceClass.SMALL, DivergenceClass.SMALL]


# -- 4 --------------------------------------------------------------------------

def _parse_bundle(text):
    return {} if text == "_" else dict(kv.split("=", 1) for kv in text.split("|"))


def _random_patterns(rng, corpus, k):
    """Partial patterns: a random subset of some bundle's pairs, maybe a UPOS."""
    out = [(None, {})]
    for _ in range(k):
        feats = _parse_bundle(corpus.bundles[rng.integers(len(corpus.bundles))])
        keep = {key: v for key, v in feats.items() if rng.random() < 0.6}
        upos = None if rng.random() < 0.3 else corpus.upos[rng.integers(len(corpus.upos))]
        out.append((upos, keep))
    return out


def oracle_log_odds(corpus, patterns):
    """Brute-force tally over the raw index arrays, then log(n_w N / (n_l n_f))."""
    cube = np.zeros((len(corpus.lemmata), len(corpus.upos), len(corpus.bundles)), dtype=np.int64)
    np.add.at(cube, (corpus.lemma_idx, corpus.upos_idx, corpus.bundle_idx), 1)
    N = int(cube.sum())
    n_l = cube.sum(axis=(1, 2))
    parsed = [_parse_bundle(b) for b in corpus.bundles]
    result = {}
    for upos, feats in patterns:
        bmask = np.array([all(d.get(k) == v for k, v in feats.items()) for d in parsed])
        umask = np.array([upos is None or u == upos for u in corpus.upos])
        n_w = cube[:, umask, :][:, :, bmask].sum(axis=(1, 2))
        n_f = int(n_w.sum())
        for li in np.nonzero(n_l)[0]:
            w = int(n_w[li])
            value = None if w == 0 else math.log(w * N / (int(n_l[li]) * n_f))
            result[(corpus.lemmata[li], upos, tuple(sorted(feats.items())))] = value
    return result


def test_04_log_odds_oracle():
    with criterion(4, "log-odds oracle equivalence, 100 corpora") as notes:
        rng = np.random.default_rng(2024)
        checked = worst = 0
        max_tokens = max_lemmata = 0
        for i in range(100):
            if i == 0:
                n_tokens, n_lemmata = 100_000, 1000
            else:
                n_tokens = int(10 ** rng.uniform(2, 5))
                n_lemmata = int(rng.integers(1, 1001))
            corpus = synthetic_corpus(rng, n_tokens, n_lemmata, n_bundles=int(rng.integers(5, 41)))
            max_tokens, max_lemmata = max(max_tokens, n_tokens), max(max_lemmata, n_lemmata)
            patterns = _random_patterns(rng, corpus, 6)
            expected = oracle_log_odds(corpus, patterns)
            db = build(parse_stream(corpus.conllu(), strict=True), "la")
            for (lemma, upos, feats), want in expected.items():
                got = log_odds(mle_probs(db, lemma, FeaturePattern.of(upos, dict(feats))))
                if want is None:
                    assert got is None, (i, lemma, upos, feats)
                else:
                    assert got is not None, (i, lemma, upos, feats)
                    worst = max(worst, abs(got - want))
                    assert abs(got - want) <= 1e-12, (i, lemma, upos, feats, got, want)
                checked += 1
        notes.append(f"{checked} values, max |diff| {worst:.1e}, "
                     f"largest corpus {max_tokens} tokens / {max_lemmata} lemmata")


# -- 5 --------------------------------------------------------------------------

def test_05_independence_zero():
    with criterion(5, "factorized db gives L = 0") as notes:
        rng = np.random.default_rng(5)
        lemma_w = rng.integers(1, 200, size=300)
        bundles = sorted({b for b in (
            "|".join(f"{k}={v}" for k, v in sorted(
                {"Case": rng.choice(["Nom", "Acc", "Gen"]), "Number": rng.choice(["Sing", "Plur"]),
                 "Gender": rng.choice(["Masc", "Fem", "Neut"])}.items()))
            for _ in range(200))})
        cells = [(upos, b) for upos in ("NOUN", "ADJ") for b in bundles]
        cell_w = rng.integers(1, 200, size=len(cells))
        pairs = {CountKey(f"l{i}", u, canonicalize_bundle(b)): int(a) * int(c)
                 for i, a in enumerate(lemma_w) for (u, b), c in zip(cells, cell_w)}
        db = FrequencyDatabase("la", pairs)
        patterns = [FeaturePattern.of(u, b) for u, b in cells]
        patterns += [FeaturePattern.of(None, "Case=Nom"), FeaturePattern.of("ADJ", "Number=Plur"),
                     FeaturePattern()]
        worst = 0.0
        for i in range(len(lemma_w)):
            for p in patterns:
                t = mle_probs(db, f"l{i}", p)
                assert t.n_w * t.N == t.n_l * t.n_f
                worst = max(worst, abs(log_odds(t)))
        assert worst <= 1e-9, worst
        notes.append(f"max |L| {worst:.1e} over {len(lemma_w) * len(patterns)} cells")


# -- 6 --------------------------------------------------------------------------

def test_06_scale_invariance():
    with criterion(6, "scale invariance k = 2, 7, 100") as notes:
        rng = np.random.default_rng(6)
        corpus = synthetic_corpus(rng, 5000, 120)
        tokens = corpus.tokens()
        patterns = [FeaturePattern.of(u, dict(f)) for u, f in _random_patterns(rng, corpus, 10)]
        base_db = build(tokens, "la")

        def table(db):
            out = {}
            for lemma in sorted(db.lemma_counts):
                for p in patterns:
                    out[(lemma, p)] = log_odds(mle_probs(db, lemma, p))
            return out

        base = table(base_db)
        worst = 0.0
        for k in (2, 7, 100):
            scaled = table(build(tokens * k, "la"))
            for key, value in base.items():
                other = scaled[key]
                assert classify_divergence(value) is classify_divergence(other), key
                if value is None:
                    assert other is None
                else:
                    worst = max(worst, abs(value - other))
        assert worst <= 1e-12, worst
        notes.append(f"{len(base)} values per k, max |diff| {worst:.1e}, no class changes")


# -- 7 --------------------------------------------------------------------------

_tokens = st.lists(
    st.builds(lambda l, u, f: AnnotatedToken(l, l, u, canonicalize_bundle(f)),
              st.sampled_from(["amo", "Amo", "dico", "sum", "_", "vèrtere"]),
              st.sampled_from(["VERB", "AUX", "NOUN", "PUNCT"]),
              st.sampled_from(["_", "Voice=Pass", "Mood=Ind|Voice=Act", "Tense=Past",
                               "Aspect=Perf|Tense=Past|VerbForm=Part"])),
    max_size=80)


def _conserved(db):
    pair = sum(db.pair_counts.values())
    return pair == sum(db.lemma_counts.values()) == sum(db.marginal_counts.values()) == db.total


def test_07_conservation_and_merge_algebra():
    with criterion(7, "count conservation + merge algebra") as notes:
        @settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
        @given(_tokens, _tokens, _tokens)
        def prop(xs, ys, zs):
            a, b, c = build(xs, "la"), build(ys, "la"), build(zs, "la")
            ab = merge(a, b)
            assert build(xs + ys, "la") == ab
            assert ab == merge(b, a)
            assert merge(ab, c) == merge(a, merge(b, c))
            abc = merge(ab, c)
            for db in (a, ab, abc, freqdb.loads(freqdb.dumps(abc))):
                assert _conserved(db)
            real = [t for t in xs + ys + zs if t.lemma != "_"]
            assert abc.total == len(real)
            assert freqdb.loads(freqdb.dumps(abc)) == abc

        prop()
        notes.append("300 hypothesis examples")


# -- 8 --------------------------------------------------------------------------

def test_08_shard_independence(tmp_path):
    with criterion(8, "shard counts 1, 2, 8 give byte-identical dbs") as notes:
        rng = np.random.default_rng(8)
        inputs = []
        for i, n in enumerate((40_000, 25_000)):
            p = tmp_path / f"in{i}.conllu"
            p.write_text(synthetic_corpus(rng, n, 400).conllu(), encoding="utf-8")
            inputs.append(str(p))
        outputs = []
        for n in (1, 2, 8):
            out = tmp_path / f"db{n}.tsv"
            code = main(["count", *inputs, "--language", "la", "--out", str(out),
                         "--shards", str(n), "--workers", str(min(n, 4))])
            assert code == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]
        notes.append(f"{len(outputs[0])} bytes each")


# -- 9 --------------------------------------------------------------------------

def _verdict(lemma, n_w):
    return Verdict(lemma, (FeaturePattern.of("VERB", "Voice=Pass"),), True,
                   classify_attestation(n_w), n_w, 5000, 9000, 10**7, 0.0, DivergenceClass.SMALL)


def test_09_report_reproduction(tmp_path, capsys):
    with criterion(9, "report reproduction") as notes:
        verdicts = ([_verdict(f"d{i:04d}", 1 + i % 10) for i in range(674)]
                    + [_verdict(f"e{i:04d}", 11 + i % 90) for i in range(254)]
                    + [_verdict(f"n{i:04d}", 101 + i) for i in range(72)])
        report = summarize(verdicts)
        rows = [str(report.band_pct[b]) for b in (AttestationBand.LIKELY_DEFECTIVE,
                                                  AttestationBand.ON_THE_EDGE,
                                                  AttestationBand.LIKELY_NOT_DEFECTIVE)]
        assert rows == ["67.4", "25.4", "7.2"], rows

        # same numbers through the CLI in json and table form
        path = tmp_path / "v.tsv"
        path.write_text(dumps_verdicts(verdicts), encoding="utf-8")
        assert main(["report", str(path), "--format", "json"]) == EXIT_OK
        import json
        data = json.loads(capsys.readouterr().out)
        assert [b["pct"] for b in data["bands"]] == [67.4, 25.4, 7.2]
        assert main(["report", str(path), "--format", "table"]) == EXIT_OK
        table = capsys.readouterr().out
        assert all(f"{x}%" in table for x in rows)

        # 124 claims, 103 lemmata present in the db
        pairs = {CountKey(f"lem{i:03d}", "VERB", canonicalize_bundle("Voice=Act")): 50
                 for i in range(103)}
        db = FrequencyDatabase("it", pairs)
        specs = [GapSpec(f"lem{i:03d}", "it", (FeaturePattern.of("VERB", "Voice=Pass"),))
                 for i in range(124)]
        report = summarize(validate_all(db, specs))
        assert report.total_lemmata == 124 and report.attested_lemmata == 103
        whole = report.attestation_pct.quantize(Decimal("1"), rounding="ROUND_HALF_UP")
        assert whole == 83
        notes.append(f"67.4 / 25.4 / 7.2; {report.attested_lemmata} of {report.total_lemmata} "
                     f"attested = {report.attestation_pct}% (~{whole}%)")


# -- 10 -------------------------------------------------------------------------

def _write_corpus(path, n_tokens, n_lemmata, n_bundles, seed):
    rng = np.random.default_rng(seed)
    path.write_text(synthetic_corpus(rng, n_tokens, n_lemmata, n_bundles).conllu(),
                    encoding="utf-8")


def _peak_bytes(path):
    gc.collect()
    tracemalloc.start()
    db = build(parse_file(path), "la")
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak, db.total


@pytest.mark.slow
def test_10_throughput_and_memory(tmp_path):
    with criterion(10, "1M tokens parse+count, streaming memory") as notes:
        big = tmp_path / "big.conllu"
        _write_corpus(big, 1_000_000, 1000, 40, seed=10)
        t0 = time.perf_counter()
        db = build(parse_file(big), "la")
        elapsed = time.perf_counter() - t0
        assert db.total == 1_000_000
        assert elapsed < 60, elapsed

        # same vocabulary, 4x the tokens: the peak should not grow with input
        small, large = tmp_path / "s.conllu", tmp_path / "l.conllu"
        _write_corpus(small, 50_000, 50, 10, seed=11)
        _write_corpus(large, 200_000, 50, 10, seed=11)
        peak_s, n_s = _peak_bytes(small)
        peak_l, n_l = _peak_bytes(large)
        assert (n_s, n_l) == (50_000, 200_000)
        assert peak_l < 1.25 * peak_s + 256 * 1024, (peak_s, peak_l)
        notes.append(f"{elapsed:.1f} s for 1M tokens; peak {peak_s // 1024} KiB at 50k vs "
                     f"{peak_l // 1024} KiB at 200k tokens")


# -- 11 -------------------------------------------------------------------------

_HARVEST = """
import sys
from pathlib import Path
from gapcheck.gapspec import dumps_gapspecs
from gapcheck.wiktionary import harvest_pages
wiki, lang, *titles = sys.argv[1:]
pages = [(t, (Path(wiki) / f"{t}.wikitext").read_text(encoding="utf-8")) for t in titles]
sys.stdout.write(dumps_gapspecs(harvest_pages(pages, lang).specs))
"""


def test_11_wiktionary_fixtures():
    with criterion(11, "Wiktionary snapshot parsing") as notes:
        from gapcheck.gapspec import dumps_gapspecs

        cases = {"la": ["discrepo", "excommunico"], "it": ["vertere"]}
        expected_patterns = {
            "discrepo": FeaturePattern.of("VERB", "Voice=Pass"),
            "excommunico": FeaturePattern.of("VERB", "Aspect=Perf"),
            "vertere": FeaturePattern.of("VERB", "Tense=Past|VerbForm=Part"),
        }
        for lang, titles in cases.items():
            pages = [(t, (WIKI / f"{t}.wikitext").read_text(encoding="utf-8")) for t in titles]
            h = harvest_pages(pages, lang)
            assert h.unmapped == []
            assert {s.lemma: s.patterns for s in h.specs} == \
                {t: (expected_patterns[t],) for t in titles}
            frozen = (WIKI / f"expected_{lang}.gaps.json").read_text(encoding="utf-8")
            assert dumps_gapspecs(h.specs) == frozen
            # separate interpreters with different hash seeds
            for seed in ("0", "12345"):
                proc = subprocess.run([sys.executable, "-c", _HARVEST, str(WIKI), lang, *titles],
                                      capture_output=True, text=True, encoding="utf-8",
                                      env={"PYTHONHASHSEED": seed, "PATH": ""})
                assert proc.returncode == 0, proc.stderr
                assert proc.stdout == frozen

        @settings(max_examples=200, deadline=None)
        @given(st.lists(st.tuples(st.text(min_size=1, max_size=8),
                                  st.sampled_from(["no passive", "no perfect", "impersonal",
                                                   "defective", "nosomething", "pl"])),
                        max_size=30))
        def partition(items):
            anns = [RawGapAnnotation(t, "Latin", "la-verb", p, "{{la-verb}}") for t, p in items]
            specs, unmapped = compile_gapspecs(anns, "la")
            assert len(specs) + len(unmapped) == len(anns)
            assert set(unmapped) <= set(anns)

        partition()
        notes.append("3 pages match frozen gap specs, byte-identical across runs, "
                     "partition holds (snapshots reconstructed offline, not checked live)")
