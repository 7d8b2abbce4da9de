"""Open-vocabulary translation on a toy inflection task.

Source words map to target words by a fixed spelling rule (add ``n`` after
a vowel, ``a`` otherwise).  A few frequent words fill most slots and every
sentence also holds one word seen nowhere else.  A word-level model can
only emit ``<unk>`` for those.  The hybrid model spells them with its
character decoder instead.

Training takes two to three minutes on one core.  Lower ``EPOCHS`` for a
quicker (and less accurate) run.
"""

import time

from hnmt import HybridModel, ModelConfig, TrainConfig, build_char_vocab, build_word_vocab, train, translate
from hnmt.data import Vocabs
from hnmt.synthetic import inflect, inflection_task

N_TRAIN, BATCH = 20000, 32
EPOCHS = 11.2

task = inflection_task(n_train=N_TRAIN, n_test=20, sent_len=(0, 1), seed=3)
print("a training pair:", task.train[0])

src = [s for s, _ in task.train]
tgt = [t for _, t in task.train]
sw, tw = build_word_vocab(src, 30), build_word_vocab(tgt, 30)
vocabs = Vocabs(sw, tw, build_char_vocab(src, 50, sw), build_char_vocab(tgt, 50, tw))
print(f"{len(sw.words)} frequent source words; target chars: {''.join(vocabs.tgt_char.words)}")

# %% Train a one-layer hybrid model
cfg = ModelConfig(mode="hybrid", path="separate", dim=64, layers=1, char_layers=1,
                  dropout=0.0, init_range=0.4, seed=3)
model = HybridModel(cfg, vocabs)
t0 = time.time()
# constant rate for 6.4 epochs, then four halvings
tcfg = TrainConfig(epochs=EPOCHS, lr=0.5, decay_start=6.4, decay_every=1.2,
                   batch_size=BATCH, seed=3, log_every=N_TRAIN // BATCH)
state = train(model, task.train, tcfg, log=print)
print(f"trained {state.steps} steps in {time.time() - t0:.0f}s")

# %% Translate held-out sentences.  Every rare word here is new to the model.
hits = total = 0
for src_tokens, ref in task.test[:10]:
    word_only = translate(model, src_tokens, beam=4, strategy="none")
    hybrid = translate(model, src_tokens, beam=4, char_beam=5, strategy="char")
    print(f"src    {' '.join(src_tokens)}")
    print(f"  none {word_only.text()}")
    print(f"  char {hybrid.text()}    (ref {' '.join(ref)})")
    for i, w in enumerate(src_tokens):
        if w in task.rare_test:
            total += 1
            hits += i < len(hybrid.tokens) and hybrid.tokens[i] == inflect(w)
print(f"unseen rare words spelled exactly: {hits}/{total}")
