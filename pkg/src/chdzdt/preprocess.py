"""Corpus-to-lexicon pipeline: normalization, filtering, multi-label merging.

The pipeline order is fixed: region filter -> emoji normalization ->
character unification -> elongation capping -> spacing -> diacritic
stripping -> whitespace tokenization. Running the normalization twice
yields the same text as running it once.
"""

from __future__ import annotations

import itertools
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources

from .chartok import is_emoji_char
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

LABELS = ("AR", "BER", "DZ", "EN", "FR")
MAX_WORD_LEN = 30
_TATWEEL = "ـ"


class NormRules:
    """Normalization tables: emoji aliases, character unification,
    diacritics, elongation cap, region-filter patterns."""

    def __init__(self, emoji_aliases=None, char_unification=None, diacritics=(),
                 elongation_cap: int = 2, region_patterns=()):
        if elongation_cap < 1:
            raise ConfigError(f"elongation cap must be >= 1, got {elongation_cap}")
        self.emoji_aliases = dict(emoji_aliases or {})
        self.char_unification = dict(char_unification or {})
        self.diacritics = frozenset(diacritics) | {_TATWEEL}
        self.elongation_cap = int(elongation_cap)
        self.region_patterns = []
        for pat in region_patterns:
            try:
                self.region_patterns.append(re.compile(pat))
            except re.error as exc:
                raise ConfigError(f"bad region pattern {pat!r}: {exc}") from exc
        # longest alias first so ":-)" is not eaten by ":)"; an alias fires
        # only when not followed by a letter or digit, and letter-initial
        # aliases (xD) also need a left boundary
        self._alias_res = []
        for src, dst in sorted(self.emoji_aliases.items(), key=lambda kv: -len(kv[0])):
            pat = re.escape(src) + r"(?![^\W_])"
            if src[:1].isalpha():
                pat = r"(?<![^\W_])" + pat
            self._alias_res.append((re.compile(pat), dst))
        self._strip_table = {ord(c): None for c in self.diacritics}

    @classmethod
    def from_file(cls, path) -> "NormRules":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read rules file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"rules file {path} is not valid JSON: {exc}") from exc
        return cls(
            emoji_aliases=raw.get("emoji_aliases", {}),
            char_unification=raw.get("char_unification", {}),
            diacritics=raw.get("diacritics", ()),
            elongation_cap=raw.get("elongation_cap", 2),
            region_patterns=raw.get("region_patterns", ()),
        )

    @classmethod
    def default(cls) -> "NormRules":
        raw = json.loads(
            resources.files("chdzdt").joinpath("data/norm_rules.json").read_text("utf-8"))
        return cls(
            emoji_aliases=raw["emoji_aliases"],
            char_unification=raw["char_unification"],
            diacritics=raw["diacritics"],
            elongation_cap=raw["elongation_cap"],
            region_patterns=raw["region_patterns"],
        )


def normalize_emojis(text: str, rules: NormRules) -> str:
    """Turn textual emoticons into emoji and cap identical-emoji runs at 2."""
    for pattern, dst in rules._alias_res:
        text = pattern.sub(dst, text)
    out = []
    run_char, run_len = None, 0
    for ch in text:
        if ch == run_char and is_emoji_char(ch):
            run_len += 1
            if run_len > 2:
                continue
        else:
            run_char, run_len = ch, 1
        out.append(ch)
    return "".join(out)


def normalize_chars(text: str, rules: NormRules) -> str:
    for src, dst in rules.char_unification.items():
        text = text.replace(src, dst)
    return text


def cap_elongation(text: str, k: int = 2) -> str:
    """Shorten runs of more than k identical alphabetic characters to k."""
    if k < 1:
        raise ConfigError(f"elongation cap must be >= 1, got {k}")
    out = []
    run_char, run_len = None, 0
    for ch in text:
        if ch == run_char:
            run_len += 1
            if run_len > k and ch.isalpha():
                continue
        else:
            run_char, run_len = ch, 1
        out.append(ch)
    return "".join(out)


def fix_spacing(text: str) -> str:
    """Detach punctuation from words, separate emojis, collapse spaces."""
    tokens = []
    current = []  # (kind, chars) of the run being built
    kind = None

    def flush():
        if current:
            tokens.append("".join(current))
            current.clear()

    for ch in text:
        if ch.isspace():
            flush()
            kind = None
        elif is_emoji_char(ch):
            flush()
            tokens.append(ch)
            kind = None
        else:
            k = "punct" if unicodedata.category(ch).startswith("P") else "word"
            if k != kind:
                flush()
                kind = k
            current.append(ch)
    flush()
    return " ".join(tokens)


def strip_diacritics(text: str, rules: NormRules) -> str:
    return text.translate(rules._strip_table)


def region_filter(comment: str, patterns) -> bool:
    """True = keep, False = drop (a pattern matched)."""
    return not any(p.search(comment) for p in patterns)


def normalize_text(text: str, rules: NormRules) -> str:
    """Apply the op sequence, re-sweeping until the text is stable.

    Later stages can expose new matches for earlier ones (spacing isolates
    an emoticon, unification canonicalizes a dash inside one), so the fixed
    op order is swept to a fixpoint; real text stabilizes in one or two
    sweeps and the bound is a safety net.
    """
    for _ in range(4):
        out = normalize_emojis(text, rules)
        out = normalize_chars(out, rules)
        out = cap_elongation(out, rules.elongation_cap)
        out = fix_spacing(out)
        out = strip_diacritics(out, rules)
        if out == text:
            return out
        text = out
    logger.warning("normalization did not stabilize within 4 sweeps")
    return text


@dataclass
class SourceStream:
    """One input corpus: UTF-8 lines with a single language label."""

    path: str
    label: str
    kind: str = "standard"
    lines: list = None  # in-memory override, mainly for tests

    def __post_init__(self):
        if self.label not in LABELS:
            raise ConfigError(f"unknown source label {self.label!r}, expected one of {LABELS}")
        if self.kind not in ("social", "standard"):
            raise ConfigError(f"source kind must be social or standard, got {self.kind!r}")

    def iter_lines(self):
        if self.lines is not None:
            yield from self.lines
            return
        try:
            with open(self.path, encoding="utf-8") as fh:
                yield from fh
        except OSError as exc:
            raise DataError(f"cannot read stream {self.path!r} ({self.label}): {exc}") from exc


@dataclass
class LexiconEntry:
    word: str
    labels: tuple
    freq: dict = field(default_factory=dict)


def build_lexicon(streams, rules: NormRules, max_len: int = MAX_WORD_LEN):
    """Run every stream through the pipeline and merge into one word list.

    Label sets are unions across streams; per-label frequencies accumulate;
    words longer than max_len Unicode scalars are dropped. Output is sorted
    lexicographically so identical inputs give identical files.
    """
    if not streams:
        raise DataError("build_lexicon needs at least one stream")
    counts: dict = {}
    for stream in streams:
        dropped = 0
        for line in stream.iter_lines():
            line = line.rstrip("\n")
            if stream.kind == "social" and not region_filter(line, rules.region_patterns):
                dropped += 1
                continue
            for word in normalize_text(line, rules).split():
                if len(word) > max_len:
                    continue
                counts.setdefault(word, {}).setdefault(stream.label, 0)
                counts[word][stream.label] += 1
        if dropped:
            logger.info("region filter dropped %d lines from %s", dropped, stream.label)
    return [
        LexiconEntry(word=w, labels=tuple(sorted(freq)), freq=dict(sorted(freq.items())))
        for w, freq in sorted(counts.items())
    ]


def write_lexicon(entries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            freq = ",".join(f"{lab}:{n}" for lab, n in sorted(e.freq.items()))
            fh.write(f"{e.word}\t{','.join(e.labels)}\t{freq}\n")


def read_lexicon(path):
    entries = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read lexicon {path}: {exc}") from exc
    with fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{ln}: expected 3 tab-separated fields")
            word, labels, freqs = parts
            labels = tuple(labels.split(","))
            for lab in labels:
                if lab not in LABELS:
                    raise DataError(f"{path}:{ln}: unknown label {lab!r}")
            freq = {}
            for item in freqs.split(","):
                lab, _, n = item.partition(":")
                freq[lab] = int(n)
            entries.append(LexiconEntry(word=word, labels=labels, freq=freq))
    return entries


def all_label_combinations():
    combos = []
    for r in range(1, len(LABELS) + 1):
        combos.extend("+".join(c) for c in itertools.combinations(LABELS, r))
    return combos


def lexicon_stats(entries) -> dict:
    """Counts per label combination (all 31) plus a 5-char-bin length histogram."""
    combos = {c: 0 for c in all_label_combinations()}
    bins = {f"{lo}-{lo + 4}": 0 for lo in range(1, MAX_WORD_LEN, 5)}
    for e in entries:
        combos["+".join(e.labels)] += 1
        lo = (len(e.word) - 1) // 5 * 5 + 1
        bins[f"{lo}-{lo + 4}"] += 1
    return {
        "total_words": len(entries),
        "combinations": combos,
        "length_histogram": bins,
    }
