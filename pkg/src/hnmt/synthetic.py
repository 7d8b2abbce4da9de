"""Synthetic parallel corpora for tests, demos and the acceptance harness.

The "inflection" task maps every source word to a target word by a fixed
character rule (append ``n`` after a vowel, ``a`` otherwise).  A small
set of frequent words fills most positions; the remaining slots hold rare
words drawn fresh from a small alphabet, so they appear (almost) once and
must be handled by the character components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VOWELS = frozenset("aeiou")


def inflect(word: str) -> str:
    return word + ("n" if word[-1] in VOWELS else "a")


@dataclass
class InflectionTask:
    train: list[tuple[list[str], list[str]]]
    test: list[tuple[list[str], list[str]]]
    frequent: list[str]
    rare_train: set[str]
    rare_test: set[str]


def _random_word(rng: np.random.Generator, alphabet: str, lo: int, hi: int) -> str:
    n = int(rng.integers(lo, hi + 1))
    return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), n))


def inflection_task(
    n_train: int = 500,
    n_test: int = 100,
    n_frequent: int = 30,
    sent_len: tuple[int, int] = (2, 4),
    rare_per_sentence: int = 1,
    alphabet: str = "abdeikmo",
    rare_len: tuple[int, int] = (3, 5),
    seed: int = 0,
) -> InflectionTask:
    """Sentences of frequent words with ``rare_per_sentence`` rare words
    each.  Test rare words never occur in the training data."""
    rng = np.random.default_rng(seed)
    frequent: list[str] = []
    while len(frequent) < n_frequent:
        w = _random_word(rng, alphabet, 2, 3)
        if w not in frequent:
            frequent.append(w)
    seen = set(frequent)

    def fresh() -> str:
        while True:
            w = _random_word(rng, alphabet, *rare_len)
            if w not in seen:
                seen.add(w)
                return w

    def sentences(n: int, pool: set[str]):
        out = []
        for _ in range(n):
            length = int(rng.integers(sent_len[0], sent_len[1] + 1))
            words = [frequent[i] for i in rng.integers(0, n_frequent, length)]
            for _ in range(rare_per_sentence):
                w = fresh()
                pool.add(w)
                words.insert(int(rng.integers(0, len(words) + 1)), w)
            out.append((words, [inflect(w) for w in words]))
        return out

    rare_train: set[str] = set()
    rare_test: set[str] = set()
    train = sentences(n_train, rare_train)
    test = sentences(n_test, rare_test)
    return InflectionTask(train, test, frequent, rare_train, rare_test)


def open_vocab_corpus(n_pairs: int = 500, vocab_size: int = 50, rare_fraction: float = 0.2,
                      seed: int = 0) -> list[tuple[list[str], list[str]]]:
    """Parallel corpus whose most frequent ``vocab_size`` types fill a
    ``vocab_size``-word vocabulary exactly, plus singleton types making up
    at least ``rare_fraction`` of all types on each side."""
    rng = np.random.default_rng(seed)
    n_freq = vocab_size
    n_rare = math.ceil(n_freq * rare_fraction / (1 - rare_fraction))
    task = inflection_task(n_train=n_pairs, n_test=0, n_frequent=n_freq, rare_per_sentence=0,
                           sent_len=(3, 6), seed=seed)
    pairs = task.train
    pool = sorted(task.frequent)
    rare = set()
    while len(rare) < n_rare:
        w = _random_word(rng, "abdeikmoprstu", 4, 6)
        if w not in pool:
            rare.add(w)
    for i, w in enumerate(sorted(rare)):
        src, _ = pairs[(i * len(pairs)) // n_rare]
        src.insert(int(rng.integers(0, len(src) + 1)), w)
    return [(src, [inflect(w) for w in src]) for src, _ in pairs]


def copy_corpus(n_pairs: int = 200, n_words: int = 8, length: tuple[int, int] = (2, 5),
                seed: int = 0) -> list[tuple[list[str], list[str]]]:
    """Word-level copy task over a tiny vocabulary."""
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(n_words)]
    out = []
    for _ in range(n_pairs):
        n = int(rng.integers(length[0], length[1] + 1))
        s = [words[i] for i in rng.integers(0, n_words, n)]
        out.append((s, list(s)))
    return out
