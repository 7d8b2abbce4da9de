"""Two-stage inference: word-level beam search, then character-level beam
search for each emitted ``<unk>``; plus the attention-based unk-replace
baseline (dictionary lookup, identity copy when absent)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, ContractError
from .tensor import Tensor
from .vocab import BOS, BOUNDARY, BOUNDARY_SYMBOL, EOS, PAD, UNK

log = logging.getLogger(__name__)

STRATEGIES = ("char", "unk-replace", "none")


@dataclass
class Hypothesis:
    tokens: list[int]
    score: float
    step_scores: list[float] = field(default_factory=list)
    alignments: list[int] = field(default_factory=list)
    seeds: dict[int, np.ndarray] = field(default_factory=dict)  # position -> char seed
    complete: bool = False  # ended by the terminator rather than the length cap
    order: int = 0  # completion order, for tie-breaking


@dataclass
class Translation:
    tokens: list[str]
    char_positions: list[int] = field(default_factory=list)
    replaced_positions: list[int] = field(default_factory=list)
    score: float = 0.0
    char_scores: dict[int, float] = field(default_factory=dict)
    replaced_scores: dict[int, float] = field(default_factory=dict)

    def text(self) -> str:
        return " ".join(self.tokens)

    def meta_lines(self) -> list[str]:
        rows = [(p, "char", self.char_scores[p]) for p in self.char_positions]
        rows += [(p, "replace", self.replaced_scores[p]) for p in self.replaced_positions]
        return [f"{p}\t{kind}\t{s:.6f}" for p, kind, s in sorted(rows)]


StepFn = Callable[[np.ndarray, list], tuple[np.ndarray, list, dict]]


def _take_state(state: list, rows: np.ndarray) -> list:
    return [(Tensor(h.data[rows]), Tensor(c.data[rows])) for h, c in state]


def beam_search(
    step: StepFn,
    state: list,
    end: int,
    banned: list[int],
    beam: int,
    max_steps: int,
    length_norm: bool = False,
    on_step: Callable[[Hypothesis, int, dict, int], None] | None = None,
    start: int = BOS,
) -> list[Hypothesis]:
    """Generic length-capped beam search.

    Each step keeps the ``beam`` best unfinished extensions; extensions by
    ``end`` that rank within the top ``beam`` candidates are set aside as
    finished.  Search stops early once the best finished score beats every
    live one (log-probabilities only decrease).  Ties go to the lower token
    id, then the better-ranked parent, then earlier completion.  Returns
    all finished hypotheses, best first.
    """
    if beam < 1 or max_steps < 1:
        raise ContractError("beam width and length cap must be at least 1")
    live = [Hypothesis([], 0.0)]
    finished: list[Hypothesis] = []

    def final_key(h: Hypothesis):
        s = h.score / max(1, len(h.tokens) + h.complete) if length_norm else h.score
        return (-s, h.order)

    for t in range(max_steps):
        prev = np.array([h.tokens[-1] if h.tokens else start for h in live], dtype=np.int64)
        logp, new_state, info = step(prev, state)
        logp = logp.copy()
        logp[:, banned] = -np.inf
        cand = np.array([h.score for h in live])[:, None] + logp
        K, V = cand.shape
        flat = cand.reshape(-1)
        parents, toks = np.divmod(np.arange(K * V), V)
        ranked = np.lexsort((parents, toks, -flat))
        ok = np.isfinite(flat[ranked])
        is_end = toks[ranked] == end
        ends = ranked[:beam][ok[:beam] & is_end[:beam]]
        others = ranked[ok & ~is_end][:beam]
        next_live: list[Hypothesis] = []
        rows = []
        last = t == max_steps - 1
        for idx in np.concatenate([ends, others]):
            tok, p = int(toks[idx]), int(parents[idx])
            parent = live[p]
            h = Hypothesis(
                parent.tokens + [tok], float(flat[idx]), parent.step_scores + [float(logp[p, tok])],
                parent.alignments.copy(), dict(parent.seeds),
            )
            if on_step is not None:
                on_step(h, t, info, p)
            if tok == end or last:
                h.complete = tok == end
                h.order = len(finished)
                finished.append(h)
            else:
                next_live.append(h)
                rows.append(p)
        if not next_live:
            break
        live = next_live
        state = _take_state(new_state, np.array(rows))
        if not length_norm and finished and max(h.score for h in finished) >= live[0].score:
            break
    finished.sort(key=final_key)
    return finished


def beam_search_word(model, tokens: list[str], beam: int = 5, max_len: int | None = None,
                     length_norm: bool = False) -> list[Hypothesis]:
    """N-best word-level hypotheses (tokens exclude the final ``</s>``)."""
    if not tokens:
        raise ContractError("cannot translate an empty source sentence")
    enc, _ = model.encode_tokens(tokens)
    if max_len is None:
        max_len = min(model._max_len(), 2 * enc.states.shape[1] + 10)
    states, mask = enc.states.data, enc.mask

    def step(prev, state):
        k = len(prev)
        out = model.decoder_step(prev, state, Tensor(np.repeat(states, k, 0)), np.repeat(mask, k, 0))
        return out.log_probs, out.state, {"out": out}

    def record(h, t, info, parent):
        out = info["out"]
        h.alignments.append(int(out.alignment[parent]))
        if h.tokens[-1] == UNK:
            cp = None if out.counterpart is None else out.counterpart[parent]
            h.seeds[t] = model.char_seed(out.attentional[parent], cp).copy()

    hyps = beam_search(step, model.initial_state(enc, 1), EOS, [BOS, PAD], beam, max_len, length_norm, record)
    for h in hyps:
        if h.complete:
            h.tokens = h.tokens[:-1]
            h.alignments = h.alignments[:-1]
    return hyps


def beam_search_char(model, seed: np.ndarray, beam: int = 5, max_chars: int = 50,
                     banned: list[int] | None = None) -> tuple[str, float, bool]:
    """Spell one word from a character-decoder seed.

    Returns ``(word, log-probability, complete)``; ``complete`` is False when
    no hypothesis reached the boundary within ``max_chars`` steps and the
    best partial spelling is returned instead.
    """
    seed = np.asarray(seed, dtype=np.float64).reshape(1, -1)
    if seed.shape[1] != model.config.char_dim:
        raise ConfigError(f"seed width {seed.shape[1]} != character hidden {model.config.char_dim}")
    never = [UNK, BOS, EOS, PAD] + list(banned or [])

    def step(prev, state):
        logp, state = model.char_step(prev, state)
        if (prev == BOS).all():
            # no empty words
            logp = logp.copy()
            logp[:, BOUNDARY] = -np.inf
        return logp, state, {}

    hyps = beam_search(step, model.char_initial_state(seed), BOUNDARY, never, beam, max_chars)
    if not hyps:
        return "", float("-inf"), False
    done = [h for h in hyps if h.complete]
    best = done[0] if done else hyps[0]
    chars = best.tokens[:-1] if best.complete else best.tokens
    cv = model.vocabs.tgt_char
    return "".join(cv.tokens[i] for i in chars), best.score, best.complete


def load_dictionary(path) -> dict[str, str]:
    """``source<TAB>target`` lines; the first entry for a source word wins."""
    out: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) >= 2:
            out.setdefault(parts[0], parts[1])
    return out


def check_strategy(mode: str, strategy: str) -> None:
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if strategy == "char" and mode != "hybrid":
        raise ConfigError("strategy 'char' needs a hybrid model")
    if strategy == "unk-replace" and mode == "char":
        raise ConfigError("strategy 'unk-replace' needs a word-level model")


def translate(
    model,
    tokens: list[str],
    beam: int = 5,
    char_beam: int = 5,
    strategy: str = "char",
    dictionary: dict[str, str] | None = None,
    max_len: int | None = None,
    max_chars: int = 50,
) -> Translation:
    check_strategy(model.mode, strategy)
    hyps = beam_search_word(model, tokens, beam, max_len)
    best = hyps[0]
    if model.mode == "char":
        text = "".join(model.tgt_vocab.tokens[i] for i in best.tokens)
        words = [w for w in text.split(BOUNDARY_SYMBOL) if w]
        return Translation(words, score=best.score)
    out = Translation(model.tgt_vocab.decode(best.tokens), score=best.score)
    if strategy == "none":
        return out
    if strategy == "unk-replace" and dictionary is None:
        log.warning("no dictionary given; <unk> replaced by identity copy")
        dictionary = {}
    for pos, tok in enumerate(best.tokens):
        if tok != UNK:
            continue
        if strategy == "char":
            word, score, _ = beam_search_char(model, best.seeds[pos], char_beam, max_chars)
            out.tokens[pos] = word
            out.char_positions.append(pos)
            out.char_scores[pos] = score
        else:
            src = tokens[min(best.alignments[pos], len(tokens) - 1)]
            out.tokens[pos] = dictionary.get(src, src)
            out.replaced_positions.append(pos)
            out.replaced_scores[pos] = best.step_scores[pos]
    return out
