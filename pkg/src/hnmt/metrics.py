"""Perplexity, corpus BLEU-4, chrF3 and Spearman's rho.

BLEU is single-reference, case-sensitive and unsmoothed: any zero n-gram
precision makes the score 0.  An order for which the hypothesis corpus has
no n-grams at all (every line shorter than n) is dropped from the mean.
chrF removes spaces and averages character n-gram precision and recall
(n = 1..6) over the orders that occur.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError, DataError


@dataclass
class CorpusScore:
    name: str
    value: float
    components: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value


def perplexity(total_loss: float, tokens: int) -> float:
    """``exp(loss / tokens)`` for a summed loss in nats."""
    if tokens < 1:
        raise ContractError("perplexity needs at least one token")
    return math.exp(total_loss / tokens)


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def _as_tokens(x) -> list[str]:
    return x.split() if isinstance(x, str) else list(x)


def _check_lengths(hyps, refs) -> None:
    if len(hyps) != len(refs):
        raise DataError(f"{len(hyps)} hypotheses but {len(refs)} references")


def bleu(hypotheses: Sequence, references: Sequence, max_order: int = 4) -> CorpusScore:
    """Corpus BLEU; sentences may be strings or token lists."""
    _check_lengths(hypotheses, references)
    matches = [0] * max_order
    possible = [0] * max_order
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp, ref = _as_tokens(hyp), _as_tokens(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            possible[n - 1] += max(len(hyp) - n + 1, 0)
    # orders with no hypothesis n-grams at all are left out of the mean
    orders = [n for n in range(max_order) if possible[n]]
    precisions = [matches[n] / possible[n] if possible[n] else 0.0 for n in range(max_order)]
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    if not orders or min(precisions[n] for n in orders) == 0.0:
        value = 0.0
    else:
        value = bp * math.exp(sum(math.log(precisions[n]) for n in orders) / len(orders))
    return CorpusScore("BLEU", value, {
        "precisions": precisions, "brevity_penalty": bp,
        "hyp_len": hyp_len, "ref_len": ref_len,
    })


def _chars(x) -> str:
    s = x if isinstance(x, str) else " ".join(x)
    return "".join(s.split())


def chrf(hypotheses: Sequence, references: Sequence, beta: float = 3.0, max_order: int = 6) -> CorpusScore:
    _check_lengths(hypotheses, references)
    match = np.zeros(max_order)
    hyp_count = np.zeros(max_order)
    ref_count = np.zeros(max_order)
    for hyp, ref in zip(hypotheses, references):
        h, r = _chars(hyp), _chars(ref)
        for n in range(1, max_order + 1):
            hg, rg = _ngrams(h, n), _ngrams(r, n)
            match[n - 1] += sum(min(c, rg[g]) for g, c in hg.items())
            hyp_count[n - 1] += sum(hg.values())
            ref_count[n - 1] += sum(rg.values())
    p_orders = hyp_count > 0
    r_orders = ref_count > 0
    chrP = float(np.mean(match[p_orders] / hyp_count[p_orders])) if p_orders.any() else 0.0
    chrR = float(np.mean(match[r_orders] / ref_count[r_orders])) if r_orders.any() else 0.0
    b2 = beta * beta
    denom = b2 * chrP + chrR
    value = (1 + b2) * chrP * chrR / denom if denom > 0 else 0.0
    return CorpusScore(f"chrF{beta:g}", value, {"chrP": chrP, "chrR": chrR, "beta": beta})


def chrf3(hypotheses: Sequence, references: Sequence) -> CorpusScore:
    return chrf(hypotheses, references, beta=3.0)


def spearman_rho(model_scores: Sequence[float], human_scores: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    a = np.asarray(model_scores, dtype=float)
    b = np.asarray(human_scores, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ContractError("spearman_rho needs two equal-length lists of at least 2 scores")
    ra, rb = rankdata(a) - (a.size + 1) / 2, rankdata(b) - (b.size + 1) / 2
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        raise ContractError("spearman_rho is undefined for a constant score list")
    return float(ra @ rb) / denom


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


def read_similarity(path) -> list[tuple[str, str, float]]:
    """``word1<TAB>word2<TAB>score`` lines."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected word1<TAB>word2<TAB>score")
            out.append((parts[0], parts[1], float(parts[2])))
    return out


def rare_word_similarity(pairs: Sequence[tuple[str, str, float]], model) -> float:
    """Spearman rho between cosine similarities of source-side word
    representations and human scores.

    In-vocabulary words use their encoder embedding; rare words (hybrid
    models) are built from characters, so every word gets a vector.
    """
    model_scores = [
        cosine(model.word_representation(w1), model.word_representation(w2)) for w1, w2, _ in pairs
    ]
    return spearman_rho(model_scores, [s for _, _, s in pairs])


def report(scores: Sequence[CorpusScore | tuple[str, float]]) -> str:
    """``metric<TAB>value`` lines."""
    lines = []
    for s in scores:
        name, value = (s.name, s.value) if isinstance(s, CorpusScore) else s
        lines.append(f"{name}\t{value:.6f}")
    return "\n".join(lines) + "\n"
