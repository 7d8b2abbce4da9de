"""Word and character vocabularies.

Reserved ids are fixed: ``<unk>``=0, ``<s>``=1, ``</s>``=2, ``<pad>``=3, and
character vocabularies additionally reserve the word boundary ``_``=4.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, FormatError

UNK, BOS, EOS, PAD = 0, 1, 2, 3
BOUNDARY = 4
RESERVED = ("<unk>", "<s>", "</s>", "<pad>")
BOUNDARY_SYMBOL = "_"

_HEADER = "#hnmt-vocab v1 kind="


class Vocabulary:
    """Bidirectional token/id map with reserved symbols first."""

    def __init__(self, tokens: Sequence[str], kind: str = "word"):
        if kind not in ("word", "char"):
            raise ValueError(f"vocabulary kind must be word or char, not {kind!r}")
        self.kind = kind
        reserved = list(RESERVED) + ([BOUNDARY_SYMBOL] if kind == "char" else [])
        seen = set(reserved)
        self.tokens = list(reserved)
        for tok in tokens:
            if tok in seen:
                raise DataError(f"duplicate or reserved token {tok!r} in vocabulary")
            seen.add(tok)
            self.tokens.append(tok)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        self.n_reserved = len(reserved)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        i = self.index.get(token)
        return i is not None and i >= self.n_reserved

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and (self.kind, self.tokens) == (other.kind, other.tokens)

    def __repr__(self) -> str:
        return f"Vocabulary(kind={self.kind}, size={len(self)})"

    @property
    def words(self) -> list[str]:
        """Non-reserved tokens in id order."""
        return self.tokens[self.n_reserved :]

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        lines = [_HEADER + self.kind] + self.words
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> Vocabulary:
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or not lines[0].startswith(_HEADER):
            raise FormatError(f"{path}: missing '{_HEADER}...' header")
        kind = lines[0][len(_HEADER) :].strip()
        if kind not in ("word", "char"):
            raise FormatError(f"{path}: unknown vocabulary kind {kind!r}")
        return cls(lines[1:], kind)


def build_word_vocab(corpus: Iterable[Sequence[str]], size: int) -> Vocabulary:
    """Top-``size`` tokens by frequency; ties go to the lexicographically
    smaller token."""
    if size < 1:
        raise ValueError("vocabulary size must be at least 1")
    counts = Counter(tok for sent in corpus for tok in sent)
    if not counts:
        raise DataError("cannot build a vocabulary from an empty corpus")
    for tok in RESERVED:
        counts.pop(tok, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([tok for tok, _ in ranked[:size]], "word")


def build_char_vocab(
    corpus: Iterable[Sequence[str]], size: int, word_vocab: Vocabulary | None = None
) -> Vocabulary:
    """The ``size`` most frequent characters.

    Characters are counted over token occurrences; with ``word_vocab`` only
    tokens inside that vocabulary (the frequent words) are counted.
    """
    if size < 1:
        raise ValueError("character vocabulary size must be at least 1")
    counts: Counter = Counter()
    any_token = False
    for sent in corpus:
        for tok in sent:
            any_token = True
            if word_vocab is not None and tok not in word_vocab:
                continue
            counts.update(tok)
    if not any_token:
        raise DataError("cannot build a character vocabulary from an empty corpus")
    counts.pop(BOUNDARY_SYMBOL, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([ch for ch, _ in ranked[:size]], "char")


def encode_word_chars(word: str, cv: Vocabulary) -> list[int]:
    """Character ids of ``word`` followed by the boundary id.

    A literal ``_`` in the word maps to the boundary id as well.
    """
    return [cv.index.get(ch, UNK) for ch in word] + [BOUNDARY]


def decode_word_chars(ids: Iterable[int], cv: Vocabulary) -> str:
    """Inverse of :func:`encode_word_chars`, stopping at the first boundary."""
    out = []
    for i in ids:
        if i == BOUNDARY:
            break
        out.append(cv.tokens[i])
    return "".join(out)


def spellable(word: str, cv: Vocabulary) -> bool:
    return all(ch == BOUNDARY_SYMBOL or ch in cv for ch in word)


def char_coverage(words: Iterable[str], cv: Vocabulary) -> float:
    """Fraction of distinct ``words`` spelled entirely with listed characters."""
    types = set(words)
    if not types:
        return 1.0
    return sum(spellable(w, cv) for w in types) / len(types)


def token_coverage(corpus: Iterable[Sequence[str]], wv: Vocabulary) -> tuple[float, float]:
    """(token coverage, type coverage) of ``wv`` over ``corpus``."""
    counts = Counter(tok for sent in corpus for tok in sent)
    if not counts:
        return 1.0, 1.0
    covered = sum(c for tok, c in counts.items() if tok in wv)
    return covered / sum(counts.values()), sum(tok in wv for tok in counts) / len(counts)
