"""Corpus reading and padded mini-batches with rare-word bookkeeping.

Source rare words are collected per type (one entry per distinct surface
form, listing every slot it occupies), target rare words per token (one
entry per occurrence), mirroring how the two character components consume
them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError
from .vocab import BOS, BOUNDARY_SYMBOL, EOS, PAD, UNK, Vocabulary, encode_word_chars

Pair = tuple[list[str], list[str]]


def read_corpus(path) -> list[list[str]]:
    """One sentence per line, whitespace-separated tokens."""
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh]


def read_parallel(src_path, tgt_path) -> list[Pair]:
    src, tgt = read_corpus(src_path), read_corpus(tgt_path)
    if len(src) != len(tgt):
        raise DataError(f"{src_path} has {len(src)} lines but {tgt_path} has {len(tgt)}")
    return list(zip(src, tgt))


@dataclass
class Vocabs:
    src_word: Vocabulary
    tgt_word: Vocabulary
    src_char: Vocabulary
    tgt_char: Vocabulary


@dataclass
class RareType:
    surface: str
    chars: list[int]
    slots: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class RareToken:
    surface: str
    chars: list[int]
    sentence: int
    position: int


@dataclass
class Batch:
    src: np.ndarray  # B x n ids
    src_mask: np.ndarray  # B x n, 1.0 for real tokens
    tgt_in: np.ndarray  # B x m, <s> + tokens
    tgt_out: np.ndarray  # B x m, tokens + </s>
    tgt_mask: np.ndarray
    src_rare: list[RareType]
    tgt_rare: list[RareToken]
    src_tokens: list[list[str]]
    tgt_tokens: list[list[str]]

    @property
    def size(self) -> int:
        return self.src.shape[0]

    @property
    def n_target_tokens(self) -> int:
        return int(self.tgt_mask.sum())


def char_units(tokens: Sequence[str]) -> list[str]:
    """A sentence as one character sequence, ``_`` between words."""
    return list(BOUNDARY_SYMBOL.join(tokens))


def _pad(rows: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(r) for r in rows)
    ids = np.full((len(rows), width), PAD, dtype=np.int64)
    mask = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        ids[i, : len(r)] = r
        mask[i, : len(r)] = 1.0
    return ids, mask


def make_batch(pairs: Sequence[Pair], vocabs: Vocabs, max_len: int = 50, mode: str = "hybrid") -> Batch:
    """Pad one group of sentence pairs.

    ``max_len`` truncates both sides (in characters for ``mode="char"``);
    tokens past it are dropped.
    """
    if mode == "char":
        src_units = [char_units(s)[:max_len] for s, _ in pairs]
        tgt_units = [char_units(t)[:max_len] for _, t in pairs]
        sv, tv = vocabs.src_char, vocabs.tgt_char
    else:
        src_units = [list(s[:max_len]) for s, _ in pairs]
        tgt_units = [list(t[:max_len]) for _, t in pairs]
        sv, tv = vocabs.src_word, vocabs.tgt_word
    if any(not s for s in src_units):
        raise DataError("empty source sentence in batch")
    src, src_mask = _pad([sv.encode(s) for s in src_units])
    tgt_ids = [tv.encode(t) for t in tgt_units]
    tgt_in, tgt_mask = _pad([[BOS] + t for t in tgt_ids])
    tgt_out, _ = _pad([t + [EOS] for t in tgt_ids])

    src_rare: list[RareType] = []
    tgt_rare: list[RareToken] = []
    if mode != "char":
        by_type: dict[str, RareType] = {}
        for b, sent in enumerate(src_units):
            for p, tok in enumerate(sent):
                if src[b, p] == UNK:
                    entry = by_type.get(tok)
                    if entry is None:
                        entry = by_type[tok] = RareType(tok, encode_word_chars(tok, vocabs.src_char))
                        src_rare.append(entry)
                    entry.slots.append((b, p))
        for b, sent in enumerate(tgt_units):
            for p, tok in enumerate(sent):
                if tgt_out[b, p] == UNK:
                    tgt_rare.append(RareToken(tok, encode_word_chars(tok, vocabs.tgt_char), b, p))
    return Batch(
        src, src_mask, tgt_in, tgt_out, tgt_mask, src_rare, tgt_rare,
        src_units if mode != "char" else [list(s) for s, _ in pairs],
        tgt_units if mode != "char" else [list(t) for _, t in pairs],
    )


def make_batches(
    pairs: Sequence[Pair],
    vocabs: Vocabs,
    batch_size: int,
    max_len: int = 50,
    seed: int = 0,
    epoch: int = 0,
    shuffle: bool = True,
    mode: str = "hybrid",
) -> Iterator[Batch]:
    """Yield the batches of one epoch.

    The order is a pure function of ``(seed, epoch)``.  Pairs with an empty
    source side are skipped.
    """
    if batch_size < 1:
        raise ValueError("batch size must be at least 1")
    usable = [p for p in pairs if p[0]]
    order = np.arange(len(usable))
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(len(usable))
    for start in range(0, len(order), batch_size):
        yield make_batch([usable[i] for i in order[start : start + batch_size]], vocabs, max_len, mode)


def count_batches(n_pairs: int, batch_size: int) -> int:
    return -(-n_pairs // batch_size)
