"""Sharded counting with a manifest that records which shards finished.

The inputs are treated as one byte stream and cut into equal byte ranges.
A sentence belongs to the shard in which its first line starts, so every
token is counted exactly once whatever the shard count. Each shard writes
its own database file; the manifest is the only coordination point, so
shards can be run by separate processes or machines and merged later.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from . import freqdb
from .conllu import ConlluError, ParseDiagnostics, parse_stream
from .freqdb import BuildOptions, FrequencyDatabase

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
PENDING, DONE, FAILED = "pending", "done", "failed"


class ManifestError(Exception):
    pass


class IncompleteRunError(ManifestError):
    def __init__(self, missing: list[int]):
        self.missing = missing
        super().__init__(f"shards not done: {missing}")


@dataclass(frozen=True)
class Slice:
    path: str
    start: int
    end: int

    def to_json(self) -> dict:
        return {"path": self.path, "start": self.start, "end": self.end}


@dataclass
class ShardRecord:
    shard_id: int
    slices: list[Slice]
    output: str
    status: str = PENDING
    checksum: str | None = None
    error: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"slices": [s.to_json() for s in self.slices], "output": self.output,
                "status": self.status, "checksum": self.checksum, "error": self.error,
                "diagnostics": self.diagnostics}

    @classmethod
    def from_json(cls, shard_id: int, obj: dict) -> "ShardRecord":
        return cls(shard_id, [Slice(**s) for s in obj["slices"]], obj["output"],
                   obj.get("status", PENDING), obj.get("checksum"), obj.get("error"),
                   obj.get("diagnostics") or {})


@dataclass
class ShardManifest:
    language: str
    options: BuildOptions
    inputs: list[str]
    shards: dict[int, ShardRecord]
    strict: bool = False

    @property
    def complete(self) -> bool:
        return all(s.status == DONE for s in self.shards.values())

    def missing(self) -> list[int]:
        return sorted(i for i, s in self.shards.items() if s.status != DONE)

    def plan_matches(self, other: "ShardManifest") -> bool:
        return (self.language == other.language and self.options == other.options
                and self.inputs == other.inputs and self.strict == other.strict
                and {i: (s.slices, s.output) for i, s in self.shards.items()}
                == {i: (s.slices, s.output) for i, s in other.shards.items()})

    def to_json(self) -> dict:
        return {"version": MANIFEST_VERSION, "language": self.language,
                "options": self.options.encode(), "inputs": self.inputs, "strict": self.strict,
                "shards": {str(i): s.to_json() for i, s in sorted(self.shards.items())}}

    @classmethod
    def from_json(cls, obj: dict) -> "ShardManifest":
        if obj.get("version") != MANIFEST_VERSION:
            raise ManifestError(f"unsupported manifest version {obj.get('version')!r}")
        return cls(obj["language"], BuildOptions.decode(obj["options"]), list(obj["inputs"]),
                   {int(k): ShardRecord.from_json(int(k), v) for k, v in obj["shards"].items()},
                   bool(obj.get("strict", False)))

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
        tmp.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ShardManifest":
        try:
            return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ManifestError(f"bad manifest {path}: {exc}") from None


def plan_shards(inputs: Sequence[str | os.PathLike], n_shards: int, out_dir: str | os.PathLike
                ) -> dict[int, ShardRecord]:
    """Cut the concatenated inputs into ``n_shards`` contiguous byte ranges."""
    if n_shards < 1:
        raise ValueError("need at least one shard")
    sizes = [(str(p), os.path.getsize(p)) for p in inputs]
    total = sum(s for _, s in sizes)
    out_dir = Path(out_dir)
    shards = {}
    for i in range(n_shards):
        lo, hi = total * i // n_shards, total * (i + 1) // n_shards
        slices, offset = [], 0
        for path, size in sizes:
            a, b = max(lo, offset), min(hi, offset + size)
            if a < b:
                slices.append(Slice(path, a - offset, b - offset))
            offset += size
        shards[i] = ShardRecord(i, slices, str(out_dir / f"shard-{i:05d}.tsv"))
    return shards


def _is_blank(line: bytes) -> bool:
    return not line.strip(b"\r\n")


def iter_slice_lines(path: str, start: int, end: int) -> Iterator[tuple[int, bytes]]:
    """Lines of every sentence whose first line starts in ``[start, end)``.

    Yields ``(byte_offset, line)``. A sentence start is a non-blank line at
    the beginning of the file or right after a blank line.
    """
    with open(path, "rb") as fh:
        if start == 0:
            pos, prev_blank = 0, True
        else:
            fh.seek(start - 1)
            fh.readline()  # finish the line containing byte start-1
            pos = fh.tell()
            # was the line just before `pos` blank?
            back = min(pos, 3)
            fh.seek(pos - back)
            tail = fh.read(back)
            if pos == back:
                tail = b"\n" + tail  # file start counts as a line break
            prev_blank = tail.endswith(b"\n\n") or tail.endswith(b"\n\r\n")
            fh.seek(pos)
        owning = False
        for line in iter(fh.readline, b""):
            blank = _is_blank(line)
            if not blank and prev_blank:  # sentence start
                if pos >= end:
                    return
                owning = True
            if owning:
                yield pos, line
            pos += len(line)
            prev_blank = blank


def _line_number(path: str, offset: int) -> int:
    n = 1
    with open(path, "rb") as fh:
        remaining = offset
        while remaining > 0:
            chunk = fh.read(min(remaining, 1 << 20))
            if not chunk:
                break
            n += chunk.count(b"\n")
            remaining -= len(chunk)
    return n


def count_shard(record: ShardRecord, language: str, options: BuildOptions,
                strict: bool = False) -> tuple[FrequencyDatabase, ParseDiagnostics]:
    diag = ParseDiagnostics()
    db = freqdb.empty(language, options)
    for sl in record.slices:
        offsets: list[int] = []

        def lines(sl=sl, offsets=offsets):
            for off, line in iter_slice_lines(sl.path, sl.start, sl.end):
                offsets.append(off)
                if len(offsets) > 1:
                    offsets.pop(0)
                yield line

        try:
            part = freqdb.build(parse_stream(lines(), strict=strict, diagnostics=diag),
                                language, options)
        except ConlluError as exc:
            line_no = _line_number(sl.path, offsets[-1]) if offsets else None
            raise ConlluError(f"{sl.path}:{line_no}: {exc.reason}", line_no) from None
        db = freqdb.merge(db, part)
    return db, diag


def _run_one(record: ShardRecord, language: str, options: BuildOptions, strict: bool
             ) -> tuple[int, str, str | None, dict]:
    try:
        db, diag = count_shard(record, language, options, strict)
        text = freqdb.dumps(db)
        out = Path(record.output)
        tmp = out.with_name(out.name + ".tmp")
        tmp.write_text(text, encoding="utf-8", newline="\n")
        os.replace(tmp, out)
        counters = {k: v for k, v in vars(diag).items() if isinstance(v, int)
                    and k != "max_recorded_errors"}
        return record.shard_id, DONE, hashlib.sha256(text.encode("utf-8")).hexdigest(), counters
    except Exception as exc:  # recorded in the manifest; the run decides what to do
        return record.shard_id, FAILED, None, {"error": f"{type(exc).__name__}: {exc}"}


def file_checksum(path: str | os.PathLike) -> str | None:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return None


def run_shards(manifest: ShardManifest, manifest_path: str | os.PathLike,
               workers: int = 1, only: Sequence[int] | None = None) -> ShardManifest:
    """Run every shard that is not verifiably done, updating the manifest as they finish.

    A shard marked done whose output is missing or does not match its recorded
    checksum is run again.
    """
    todo = []
    for i, rec in sorted(manifest.shards.items()):
        if only is not None and i not in only:
            continue
        if rec.status == DONE and rec.checksum and file_checksum(rec.output) == rec.checksum:
            continue
        rec.status, rec.checksum, rec.error = PENDING, None, None
        todo.append(rec)
    manifest.save(manifest_path)

    def record(result):
        shard_id, status, checksum, info = result
        rec = manifest.shards[shard_id]
        rec.status, rec.checksum = status, checksum
        if status == FAILED:
            rec.error = info.get("error")
            log.error("shard %d failed: %s", shard_id, rec.error)
        else:
            rec.diagnostics = info
            log.info("shard %d done", shard_id)
        manifest.save(manifest_path)

    if workers <= 1 or len(todo) <= 1:
        for rec in todo:
            record(_run_one(rec, manifest.language, manifest.options, manifest.strict))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, rec, manifest.language, manifest.options,
                                   manifest.strict) for rec in todo]
            for fut in as_completed(futures):
                record(fut.result())
    return manifest


def merge_manifest(manifest: ShardManifest, allow_partial: bool = False) -> FrequencyDatabase:
    """Merge the outputs of all done shards.

    Refuses an incomplete run unless ``allow_partial`` is set, in which case
    the result carries ``partial`` and ``missing_shards`` metadata.
    """
    missing = manifest.missing()
    if missing and not allow_partial:
        raise IncompleteRunError(missing)
    dbs = [freqdb.empty(manifest.language, manifest.options)]
    for i, rec in sorted(manifest.shards.items()):
        if rec.status != DONE:
            continue
        if file_checksum(rec.output) != rec.checksum:
            raise ManifestError(f"shard {i} output {rec.output} does not match its checksum")
        dbs.append(freqdb.load(rec.output))
    merged = freqdb.merge_all(dbs)
    meta = {"sources": ";".join(sorted(os.path.basename(p) for p in manifest.inputs))}
    if missing:
        meta["partial"] = "1"
        meta["missing_shards"] = ",".join(map(str, missing))
    return FrequencyDatabase(merged.language, merged.pair_counts, merged.options, meta)
