"""Corpus BLEU, chrF3 and rank correlation on hand-sized inputs.

The numbers printed here can be checked with pencil and paper.
"""

import math

from hnmt import metrics

# %% BLEU: clipped n-gram precision and the brevity penalty
s = metrics.bleu(["the the the"], ["the cat"])
print("clipping:", s.components["precisions"][:2], "->", s.value)

s = metrics.bleu(["a b c d"], ["a b c d a b c d"])
print(f"brevity: BP = {s.components['brevity_penalty']:.6f} (exp(-1) = {math.exp(-1):.6f})")

hyps = ["the cat sat on the mat", "a dog barked"]
refs = ["the cat sat on a mat", "the dog barked"]
s = metrics.bleu(hyps, refs)
print(f"BLEU {s.value:.4f}  precisions {[round(p, 3) for p in s.components['precisions']]}")

# %% chrF3 rewards partially correct spellings, which BLEU cannot see
for hyp in ["jedenactileta", "jedenactilety", "jedenact"]:
    b = metrics.bleu([hyp], ["jedenactileta"]).value
    c = metrics.chrf3([hyp], ["jedenactileta"]).value
    print(f"{hyp:15s} BLEU {b:.3f}  chrF3 {c:.3f}")

# %% Spearman correlation depends on ranks only
model = [0.9, 0.1, 0.4, 0.6]
human = [8.0, 1.0, 3.5, 7.0]
print("rho:", metrics.spearman_rho(model, human))
print("rho after a monotone transform:", metrics.spearman_rho([v**3 for v in model], human))
