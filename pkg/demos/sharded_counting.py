"""
Sharded counting with a manifest
================================

Writes a synthetic CoNLL-U corpus, counts it with the CLI in one shard and in
four, and shows that both databases are the same bytes. Then a shard is made
to fail, the run stops with exit code 4, and a second invocation resumes only
the missing shard. Add ``--workers N`` to run shards in parallel.
"""

import random
import tempfile
from pathlib import Path

from gapcheck import shards
from gapcheck.cli import main

rng = random.Random(1)
lemmata = [f"verbum{i}" for i in range(200)]
bundles = ["Voice=Act", "Voice=Pass", "Aspect=Perf|Voice=Act", "Mood=Sub|Voice=Act", "_"]

work = Path(tempfile.mkdtemp(prefix="gapcheck-demo-"))
corpus = work / "corpus.conllu"
with open(corpus, "w", encoding="utf-8") as fh:
    for sent in range(4000):
        for i in range(1, 11):
            lemma = rng.choice(lemmata)
            fh.write(f"{i}\tw\t{lemma}\tVERB\t_\t{rng.choice(bundles)}\t0\tdep\t_\t_\n")
        fh.write("\n")
print("corpus:", corpus, corpus.stat().st_size, "bytes")

one, four = work / "one.tsv", work / "four.tsv"
main(["count", str(corpus), "--language", "la", "--out", str(one)])
main(["count", str(corpus), "--language", "la", "--out", str(four), "--shards", "4"])
print("identical:", one.read_bytes() == four.read_bytes())

# Make shard 2 fail, as a crashed node would.
real = shards.count_shard


def flaky(record, *args, **kwargs):
    if record.shard_id == 2:
        raise RuntimeError("node lost")
    return real(record, *args, **kwargs)


shards.count_shard = flaky
broken = work / "broken.tsv"
code = main(["count", str(corpus), "--language", "la", "--out", str(broken), "--shards", "4"])
print("exit code with a failed shard:", code)
print("manifest:", broken.with_name("broken.tsv.manifest.json"))

# Second attempt: shards 0, 1 and 3 are done and their checksums match, so
# only shard 2 runs.
shards.count_shard = real
code = main(["count", str(corpus), "--language", "la", "--out", str(broken), "--shards", "4"])
print("exit code after resume:", code, "| same as single shard:",
      broken.read_bytes() == one.read_bytes())
