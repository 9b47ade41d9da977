"""Template-scoped wikitext extraction.

This is deliberately not a wikitext grammar. It finds language sections,
extracts balanced ``{{...}}`` templates (nested ones included), splits their
parameters on top-level pipes, and reads the gap markers used by Latin and
Italian verb headword and conjugation templates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_NOWIKI_RE = re.compile(r"<nowiki>.*?</nowiki>|<!--.*?-->", re.S | re.I)
_L2_RE = re.compile(r"^==\s*([^=].*?)\s*==\s*$", re.M)


class SectionNotFound(LookupError):
    pass


@dataclass(frozen=True)
class Template:
    name: str
    positional: tuple[str, ...]
    named: tuple[tuple[str, str], ...]
    raw: str
    start: int

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.named:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class RawGapAnnotation:
    """One gap marker found on a page, with the wikitext it came from."""

    title: str
    language: str
    template: str
    phrase: str
    raw: str


def _mask(text: str) -> str:
    """Blank out nowiki spans and comments, keeping offsets stable."""
    return _NOWIKI_RE.sub(lambda m: " " * len(m.group(0)), text)


def language_section(wikitext: str, language: str) -> str:
    """Body of the ``==Language==`` section, up to the next level-2 heading."""
    masked = _mask(wikitext)
    heads = list(_L2_RE.finditer(masked))
    for i, m in enumerate(heads):
        if m.group(1) == language:
            end = heads[i + 1].start() if i + 1 < len(heads) else len(wikitext)
            return wikitext[m.end():end]
    raise SectionNotFound(f"no =={language}== section")


def find_templates(text: str) -> list[Template]:
    """All templates in ``text``, outermost and nested, in order of appearance."""
    masked = _mask(text)
    out: list[Template] = []
    stack: list[int] = []
    i, n = 0, len(masked)
    while i < n - 1:
        pair = masked[i:i + 2]
        if pair == "{{":
            # "{{{" opens a template parameter reference; treat it as opaque
            if masked.startswith("{{{", i):
                close = masked.find("}}}", i + 3)
                if close != -1:
                    i = close + 3
                    continue
            stack.append(i)
            i += 2
        elif pair == "}}" and stack:
            start = stack.pop()
            out.append(_make_template(text, masked, start, i + 2))
            i += 2
        else:
            i += 1
    out.sort(key=lambda t: t.start)
    return out


def split_params(inner: str, masked: str) -> list[str]:
    """Split on pipes that are not nested inside ``{{ }}`` or ``[[ ]]``."""
    parts, depth_t, depth_l, last = [], 0, 0, 0
    i = 0
    while i < len(masked):
        two = masked[i:i + 2]
        if two == "{{":
            depth_t += 1
            i += 2
            continue
        if two == "}}" and depth_t:
            depth_t -= 1
            i += 2
            continue
        if two == "[[":
            depth_l += 1
            i += 2
            continue
        if two == "]]" and depth_l:
            depth_l -= 1
            i += 2
            continue
        if masked[i] == "|" and depth_t == 0 and depth_l == 0:
            parts.append(inner[last:i])
            last = i + 1
        i += 1
    parts.append(inner[last:])
    return parts


def _make_template(text: str, masked: str, start: int, end: int) -> Template:
    inner, minner = text[start + 2:end - 2], masked[start + 2:end - 2]
    parts = split_params(inner, minner)
    name = parts[0].strip()
    positional, named = [], []
    for p in parts[1:]:
        key, sep, value = p.partition("=")
        if sep and "{{" not in key and "[[" not in key and key.strip():
            named.append((key.strip(), value.strip()))
        else:
            positional.append(p.strip())
    return Template(name, tuple(positional), tuple(named), text[start:end], start)


# -- gap markers ----------------------------------------------------------------

# Latin conjugation subtypes (".nopass" etc. on the first positional argument)
# that state a missing part of the paradigm.
LATIN_GAP_SUBTYPES = {
    "nopass": "no passive",
    "noperf": "no perfect",
    "nosup": "no supine",
    "nofut": "no future",
    "noimp": "no imperative",
    "nopasvperf": "no passive perfect",
    "noactvperf": "no active perfect",
    "supfutractvonly": "supine only in future active participle",
    "3only": "third person only",
    "pass3only": "passive third person only",
    "impers": "impersonal",
    "passimpers": "passive impersonal",
    "def": "defective",
}

# Subtypes that describe inflection class or spelling, not gaps.
LATIN_OTHER_SUBTYPES = {
    "depon", "semidepon", "optsemidepon", "sigm", "sigmpasv", "shorten", "perfaspres",
    "poetsyncperf", "optsyncperf", "alwayssyncperf", "sufn", "p3inf", "irreg", "lig",
    "nosigm", "nolig", "i", "suffix", "sync", "pl",
}

LATIN_TEMPLATES = {"la-verb", "la-conj", "la-conj-table"}
ITALIAN_TEMPLATES = {"it-verb", "it-conj"}
ITALIAN_PRINCIPAL_PARTS = (None, "no past historic", "no past participle")


def _norm_code(code: str) -> str:
    return code.strip().lower().replace("-", "").replace("_", "")


def _latin_gaps(t: Template) -> list[str]:
    phrases: list[str] = []
    if t.positional:
        spec = t.positional[0]
        if "<" in spec:  # newer angle-bracket syntax: "discrepō<1+.nopass>"
            spec = spec[spec.index("<") + 1:spec.rindex(">")] if ">" in spec else spec
        for code in spec.split(".")[1:]:
            code = _norm_code(code)
            if not code or code in LATIN_OTHER_SUBTYPES:
                continue
            phrases.append(LATIN_GAP_SUBTYPES.get(code, code))
    for key, value in t.named:
        code = _norm_code(key)
        if code in LATIN_GAP_SUBTYPES and value.strip().lower() not in ("", "0", "no", "n"):
            phrases.append(LATIN_GAP_SUBTYPES[code])
    return phrases


def _italian_gaps(t: Template) -> list[str]:
    phrases: list[str] = []
    if t.positional:
        spec = t.positional[0]
        _, slash, parts = spec.partition("/")
        if slash:
            for i, part in enumerate(parts.split(",")):
                if i < len(ITALIAN_PRINCIPAL_PARTS) and part.strip() == "-" \
                        and ITALIAN_PRINCIPAL_PARTS[i]:
                    phrases.append(ITALIAN_PRINCIPAL_PARTS[i])
    if (t.get("pp") or "").strip() == "-":
        phrases.append("no past participle")
    if (t.get("phis") or "").strip() == "-":
        phrases.append("no past historic")
    for key, value in t.named:
        if _norm_code(key) == "nopp" and value.strip() not in ("", "0"):
            phrases.append("no past participle")
    return phrases


def gap_phrases(t: Template) -> list[str]:
    """Gap phrases carried by a headword or conjugation template (may be empty)."""
    if t.name in LATIN_TEMPLATES:
        return _latin_gaps(t)
    if t.name in ITALIAN_TEMPLATES:
        return _italian_gaps(t)
    return []


def parse_gap_annotations(wikitext: str, language: str, title: str = "") -> list[RawGapAnnotation]:
    """Gap markers in the ``language`` section of a page.

    Raises :class:`SectionNotFound` when the page has no such section. Phrases
    that are not in the known inventory are still returned (as the raw code)
    so that compilation can route them to review. Repeated markers, e.g. the
    same flag on the headword and the conjugation table, are reported once.
    """
    section = language_section(wikitext, language)
    out: list[RawGapAnnotation] = []
    seen: set[str] = set()
    for t in find_templates(section):
        for phrase in gap_phrases(t):
            if phrase in seen:
                continue
            seen.add(phrase)
            out.append(RawGapAnnotation(title, language, t.name, phrase, t.raw))
    return out
