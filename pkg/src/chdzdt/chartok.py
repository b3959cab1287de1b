"""Word-level character tokenizer over a Unicode-range-defined vocabulary.

A vocabulary is five single-character special tokens (ids 0-4, fixed order
PAD, CLS, MASK, UNK, SEP) followed by every declared character in ascending
code-point order. Words are iterated as Unicode scalar values, prefixed
with CLS (held outside the character budget), truncated to ``max_chars``
and padded to a fixed length of ``1 + max_chars``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError

SPECIAL_TOKENS = ("PAD", "CLS", "MASK", "UNK", "SEP")
# private-use code points so they can never collide with real text
SPECIAL_CHARS = ("", "", "", "", "")
PAD_ID, CLS_ID, MASK_ID, UNK_ID, SEP_ID = range(len(SPECIAL_TOKENS))

DEFAULT_MAX_CHARS = 20

# Emoji/pictograph/dingbat/symbol blocks of the shipped charset. The
# preprocess module uses this same list for emoji detection, keeping one
# source of truth for what counts as an emoji.
EMOJI_BLOCKS = (
    (9728, 9983),     # miscellaneous symbols
    (9984, 10175),    # dingbats
    (127744, 128511), # miscellaneous symbols and pictographs
    (128512, 128591), # emoticons
    (128640, 128767), # transport and map symbols
    (129280, 129535), # supplemental symbols and pictographs
)


def is_emoji_char(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_BLOCKS)


class CharVocab:
    """Immutable bidirectional character<->id map; safe to share."""

    def __init__(self, ranges, extras=()):
        chars = set()
        for interval in ranges:
            if len(interval) != 2:
                raise ConfigError(f"range must be [lo, hi], got {interval!r}")
            lo, hi = int(interval[0]), int(interval[1])
            if lo > hi:
                raise ConfigError(f"malformed range [{lo}, {hi}]")
            if lo < 0 or hi > 0x10FFFF or (lo <= 0xDFFF and hi >= 0xD800):
                raise ConfigError(f"range [{lo}, {hi}] contains invalid code points")
            chars.update(range(lo, hi + 1))
        for extra in extras:
            if len(extra) != 1:
                raise ConfigError(f"extras must be single characters, got {extra!r}")
            chars.add(ord(extra))
        for special in SPECIAL_CHARS:
            if ord(special) in chars:
                raise ConfigError(
                    f"U+{ord(special):04X} is reserved for a special token")
        self.ranges = tuple(sorted((int(lo), int(hi)) for lo, hi in ranges))
        self.extras = tuple(sorted(extras))
        ordered = list(SPECIAL_CHARS) + [chr(cp) for cp in sorted(chars)]
        self.stoi = {ch: i for i, ch in enumerate(ordered)}
        self.itos = ordered

    @property
    def size(self) -> int:
        return len(self.itos)

    def char_id(self, ch: str) -> int:
        return self.stoi.get(ch, UNK_ID)

    def __contains__(self, ch: str) -> bool:
        return ch in self.stoi

    def spec(self) -> dict:
        return {"ranges": [list(r) for r in self.ranges], "extras": list(self.extras)}


@dataclass
class TokenizedWord:
    """Fixed-length id sequence: CLS, then characters, then PAD fill."""

    ids: np.ndarray
    attention_mask: np.ndarray
    original_length: int


def build_vocab(range_spec, extras=()) -> CharVocab:
    return CharVocab(range_spec, extras)


def load_vocab_spec(path) -> CharVocab:
    with open(path, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"vocabulary spec {path} is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict) or "ranges" not in spec:
        raise ConfigError(f"vocabulary spec {path} must contain a 'ranges' list")
    return CharVocab(spec["ranges"], spec.get("extras", ()))


def default_vocab() -> CharVocab:
    raw = resources.files("chdzdt").joinpath("data/charset.json").read_text("utf-8")
    spec = json.loads(raw)
    return CharVocab(spec["ranges"], spec.get("extras", ()))


def encode_word(vocab: CharVocab, word: str, max_chars: int = DEFAULT_MAX_CHARS) -> TokenizedWord:
    word = word.strip()
    if not word:
        raise ValueError("cannot encode an empty word")
    chars = list(word)
    original_length = len(chars)
    kept = chars[:max_chars]
    ids = np.full(1 + max_chars, PAD_ID, dtype=np.int64)
    ids[0] = CLS_ID
    for i, ch in enumerate(kept):
        ids[1 + i] = vocab.char_id(ch)
    mask = np.zeros(1 + max_chars, dtype=np.int64)
    mask[:1 + len(kept)] = 1
    return TokenizedWord(ids=ids, attention_mask=mask, original_length=original_length)


def decode(vocab: CharVocab, ids) -> str:
    """Drop special tokens and map the rest back to characters."""
    out = []
    for i in np.asarray(ids).reshape(-1):
        i = int(i)
        if i >= vocab.size or i < 0:
            raise IndexError(f"id {i} out of range for vocabulary of size {vocab.size}")
        if i < len(SPECIAL_TOKENS):
            continue
        out.append(vocab.itos[i])
    return "".join(out)
