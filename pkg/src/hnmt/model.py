"""Word-character hybrid encoder-decoder.

Three modes share one backbone (deep LSTM encoder, deep LSTM decoder,
global bilinear attention, bias-free softmax):

* ``word``: the backbone over word vocabularies; rare words are ``<unk>``.
* ``char``: the backbone over character vocabularies, the sentence being a
  single character sequence with ``_`` between words.
* ``hybrid``: the word backbone plus a source character encoder that
  replaces the ``<unk>`` embedding of each rare source word, and a target
  character decoder, seeded from the attentional state (``same`` path) or
  from a dedicated counterpart vector (``separate`` path), that spells
  every rare target word.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import tensor as T
from .attention import AttentionParams, attend, counterpart_state
from .data import Batch, RareToken, Vocabs, make_batch
from .errors import ConfigError, ContractError
from .layers import LstmLayer, embed, lstm_forward, lstm_stack_step, project_logits, zero_state
from .tensor import Tensor
from .vocab import BOS, EOS, PAD, UNK, encode_word_chars

MODES = ("word", "char", "hybrid")
PATHS = ("same", "separate")


@dataclass
class ModelConfig:
    mode: str = "hybrid"
    path: str = "separate"
    dim: int = 64
    layers: int = 2
    char_dim: int = 0  # 0 means "same as dim"; any other value must equal dim
    char_layers: int = 2
    alpha: float = 1.0
    dropout: float = 0.2
    init_range: float = 0.1
    seed: int = 0
    max_len: int = 50
    char_max_len: int = 300

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.path not in PATHS:
            raise ConfigError(f"path must be one of {PATHS}, got {self.path!r}")
        if self.char_dim == 0:
            self.char_dim = self.dim
        if self.char_dim != self.dim:
            raise ConfigError(
                f"character hidden size {self.char_dim} must equal word hidden size {self.dim} "
                "so attentional states can seed the character decoder"
            )
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if min(self.dim, self.layers, self.char_layers, self.max_len, self.char_max_len) < 1:
            raise ConfigError("dimensions, depths and lengths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                continue
            t = kinds[k]
            out[k] = v if t == "str" else (float(v) if t == "float" else int(v))
        return cls(**out)


@dataclass
class LossBreakdown:
    J: Tensor
    J_w: float
    J_c: float
    n_word: int
    n_char: int


@dataclass
class Encoded:
    states: Tensor  # B x n x h
    final: list
    mask: np.ndarray  # B x n


@dataclass
class TeacherForced:
    hidden: Tensor  # B x m x h, top decoder layer
    context: Tensor
    attentional: Tensor
    logits: Tensor  # (B*m) x |V|
    J_w: Tensor


@dataclass
class DecoderStep:
    log_probs: np.ndarray  # K x |V|
    state: list
    attentional: np.ndarray  # K x h
    counterpart: np.ndarray | None
    alignment: np.ndarray  # K, argmax source position


class HybridModel:
    """All learnable parameters plus the forward computations."""

    def __init__(self, config: ModelConfig, vocabs: Vocabs, params: dict[str, Tensor] | None = None):
        self.config = config
        self.vocabs = vocabs
        self.params = self._init_params() if params is None else params
        self._bind()

    # ------------------------------------------------------------------ setup

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def src_vocab(self):
        return self.vocabs.src_char if self.mode == "char" else self.vocabs.src_word

    @property
    def tgt_vocab(self):
        return self.vocabs.tgt_char if self.mode == "char" else self.vocabs.tgt_word

    def _shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.config
        d = c.dim
        shapes: dict[str, tuple[int, ...]] = {
            "src_emb": (len(self.src_vocab), d),
            "tgt_emb": (len(self.tgt_vocab), d),
        }

        def lstm(prefix, depth):
            for i in range(depth):
                shapes[f"{prefix}.{i}.Wx"] = (4 * d, d)
                shapes[f"{prefix}.{i}.Wh"] = (4 * d, d)
                shapes[f"{prefix}.{i}.b"] = (4 * d,)

        lstm("enc", c.layers)
        lstm("dec", c.layers)
        shapes["attn.Wa"] = (d, d)
        shapes["attn.W"] = (d, 2 * d)
        shapes["out.W"] = (d, len(self.tgt_vocab))
        # backbone first, so a word model with the same seed draws the same values
        if c.mode == "hybrid" and c.path == "separate":
            shapes["attn.Wc"] = (d, 2 * d)
        if c.mode == "hybrid":
            shapes["src_char_emb"] = (len(self.vocabs.src_char), d)
            lstm("charenc", c.char_layers)
            shapes["tgt_char_emb"] = (len(self.vocabs.tgt_char), d)
            lstm("chardec", c.char_layers)
            shapes["char_out.W"] = (d, len(self.vocabs.tgt_char))
        return shapes

    def _init_params(self) -> dict[str, Tensor]:
        rng = np.random.default_rng(self.config.seed)
        r = self.config.init_range
        return {
            name: Tensor(rng.uniform(-r, r, size=shape), requires_grad=True, name=name)
            for name, shape in self._shapes().items()
        }

    def _bind(self) -> None:
        shapes = self._shapes()
        if set(shapes) != set(self.params):
            missing = sorted(set(shapes) - set(self.params))
            extra = sorted(set(self.params) - set(shapes))
            raise ConfigError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ConfigError(f"{name}: shape {self.params[name].shape}, expected {shape}")
        p = self.params
        c = self.config

        def stack(prefix, depth):
            return [LstmLayer(p[f"{prefix}.{i}.Wx"], p[f"{prefix}.{i}.Wh"], p[f"{prefix}.{i}.b"]) for i in range(depth)]

        self.encoder = stack("enc", c.layers)
        self.decoder = stack("dec", c.layers)
        self.attention = AttentionParams(p["attn.Wa"], p["attn.W"], p.get("attn.Wc"))
        if c.mode == "hybrid":
            self.char_encoder = stack("charenc", c.char_layers)
            self.char_decoder = stack("chardec", c.char_layers)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    # --------------------------------------------------------------- training

    def char_source_reps(self, char_seqs, training: bool = False, rng=None) -> Tensor:
        """Top-layer final state of the character encoder, run from zero
        state over each sequence (one row per word type)."""
        if any(len(s) == 0 for s in char_seqs):
            raise ContractError("empty character sequence")
        ids, mask = _pad_time_major(char_seqs)
        x = embed(self.params["src_char_emb"], ids)
        _, finals = lstm_forward(
            self.char_encoder, x, None, self.config.dropout, training, rng, mask=mask
        )
        return finals[-1][0]

    def _source_inputs(self, src: np.ndarray, rare, training, rng) -> Tensor:
        """Time-major source embeddings with rare slots substituted."""
        table = self.params["src_emb"]
        ids = src.T.copy()
        if self.mode == "hybrid" and rare:
            reps = self.char_source_reps([r.chars for r in rare], training, rng)
            base = table.shape[0]
            table = T.concat([table, reps], axis=0)
            for k, r in enumerate(rare):
                for b, p in r.slots:
                    ids[p, b] = base + k
        return embed(table, ids)

    def encode(self, batch: Batch, training: bool = False, rng=None) -> Encoded:
        x = self._source_inputs(batch.src, batch.src_rare, training, rng)
        outs, finals = lstm_forward(
            self.encoder, x, None, self.config.dropout, training, rng, mask=batch.src_mask.T
        )
        return Encoded(T.stack(outs, axis=1), finals, batch.src_mask)

    def decode_teacher_forced(self, batch: Batch, enc: Encoded, training: bool = False, rng=None) -> TeacherForced:
        x = embed(self.params["tgt_emb"], batch.tgt_in.T.copy())
        outs, _ = lstm_forward(self.decoder, x, enc.final, self.config.dropout, training, rng)
        hidden = T.stack(outs, axis=1)
        att = attend(hidden, enc.states, self.attention, enc.mask)
        B, m, h = hidden.shape
        logits = project_logits(self.params["out.W"], T.reshape(att.attentional, (B * m, h)))
        J_w = T.cross_entropy(logits, batch.tgt_out.reshape(-1), batch.tgt_mask.reshape(-1))
        return TeacherForced(hidden, att.context, att.attentional, logits, J_w)

    def _seeds(self, tf: TeacherForced, rows: np.ndarray) -> Tensor:
        B, m, h = tf.hidden.shape
        if self.config.path == "same":
            return T.take_rows(T.reshape(tf.attentional, (B * m, h)), rows)
        ct = T.take_rows(T.reshape(tf.context, (B * m, h)), rows)
        ht = T.take_rows(T.reshape(tf.hidden, (B * m, h)), rows)
        return counterpart_state(ct, ht, self.attention.Wc)

    def char_target_loss(self, rare: list[RareToken], tf: TeacherForced, training: bool = False, rng=None):
        """Summed character cross-entropy over rare target tokens, or
        ``None`` when there are none.

        Entries are put in (sentence, position) order first, so the result
        does not depend on the order they are given in.
        """
        if not rare:
            return None
        rare = sorted(rare, key=lambda r: (r.sentence, r.position))
        m = tf.hidden.shape[1]
        rows = np.array([r.sentence * m + r.position for r in rare], dtype=np.int64)
        seeds = self._seeds(tf, rows)
        return self.char_decoder_loss(seeds, [r.chars for r in rare], training, rng)

    def char_decoder_loss(self, seeds: Tensor, char_seqs, training: bool = False, rng=None) -> Tensor:
        """Loss of spelling ``char_seqs`` (each ending in the boundary id)
        from first-layer seeds; all cells and higher layers start at zero."""
        if seeds.shape[-1] != self.config.char_dim:
            raise ConfigError(f"seed width {seeds.shape[-1]} != character hidden {self.config.char_dim}")
        inputs, mask = _pad_time_major([[BOS] + s[:-1] for s in char_seqs])
        targets, _ = _pad_time_major(char_seqs)
        x = embed(self.params["tgt_char_emb"], inputs)
        R = len(char_seqs)
        init = zero_state(self.config.char_layers, R, self.config.char_dim)
        init[0] = (seeds, init[0][1])
        outs, _ = lstm_forward(self.char_decoder, x, init, self.config.dropout, training, rng)
        top = T.concat(outs, axis=0) if len(outs) > 1 else outs[0]
        logits = project_logits(self.params["char_out.W"], top)
        return T.cross_entropy(logits, targets.reshape(-1), mask.reshape(-1))

    def total_loss(self, batch: Batch, training: bool = False, rng=None, alpha: float | None = None) -> LossBreakdown:
        """``J = J_w + alpha * J_c`` for hybrid models.

        Word mode has ``J = J_w``; char mode reports its whole-sentence
        character loss as ``J_c`` with ``J = J_c``.
        """
        alpha = self.config.alpha if alpha is None else alpha
        enc = self.encode(batch, training, rng)
        tf = self.decode_teacher_forced(batch, enc, training, rng)
        n_tok = batch.n_target_tokens
        if self.mode == "char":
            return LossBreakdown(tf.J_w, 0.0, float(tf.J_w.data), 0, n_tok)
        if self.mode == "word":
            return LossBreakdown(tf.J_w, float(tf.J_w.data), 0.0, n_tok, 0)
        J_c = self.char_target_loss(batch.tgt_rare, tf, training, rng)
        if J_c is None:
            return LossBreakdown(tf.J_w, float(tf.J_w.data), 0.0, n_tok, 0)
        n_char = sum(len(r.chars) for r in batch.tgt_rare)
        J = tf.J_w + J_c * alpha if alpha != 0 else tf.J_w
        return LossBreakdown(J, float(tf.J_w.data), float(J_c.data), n_tok, n_char)

    # --------------------------------------------------------------- decoding

    def source_batch(self, tokens: list[str]) -> Batch:
        """Single-sentence batch for the source side only."""
        if not tokens:
            raise ContractError("cannot translate an empty source sentence")
        return make_batch([(tokens, [])], self.vocabs, self._max_len(), self.mode)

    def _max_len(self) -> int:
        return self.config.char_max_len if self.mode == "char" else self.config.max_len

    def encode_tokens(self, tokens: list[str]) -> tuple[Encoded, Batch]:
        batch = self.source_batch(tokens)
        return self.encode(batch), batch

    def initial_state(self, enc: Encoded, k: int) -> list:
        return [(_tile(h, k), _tile(c, k)) for h, c in enc.final]

    def decoder_step(self, prev: np.ndarray, state: list, states: Tensor, mask: np.ndarray) -> DecoderStep:
        """One word-level step for ``K = len(prev)`` hypotheses sharing a source."""
        x = embed(self.params["tgt_emb"], prev)
        state = lstm_stack_step(self.decoder, x, state)
        ht = state[-1][0]
        att = attend(ht, states, self.attention, mask)
        logits = project_logits(self.params["out.W"], att.attentional)
        counterpart = None
        if self.attention.Wc is not None:
            counterpart = counterpart_state(att.context, ht, self.attention.Wc).data
        return DecoderStep(
            T.log_softmax_rows(logits.data), state, att.attentional.data, counterpart,
            att.weights.data.argmax(axis=1),
        )

    def char_seed(self, step_attentional: np.ndarray, step_counterpart: np.ndarray | None) -> np.ndarray:
        if self.config.path == "separate" and step_counterpart is not None:
            return step_counterpart
        return step_attentional

    def char_initial_state(self, seeds: np.ndarray) -> list:
        k = seeds.shape[0]
        state = zero_state(self.config.char_layers, k, self.config.char_dim)
        state[0] = (Tensor(seeds), state[0][1])
        return state

    def char_step(self, prev: np.ndarray, state: list) -> tuple[np.ndarray, list]:
        x = embed(self.params["tgt_char_emb"], prev)
        state = lstm_stack_step(self.char_decoder, x, state)
        logits = project_logits(self.params["char_out.W"], state[-1][0])
        return T.log_softmax_rows(logits.data), state

    def sequence_logprob(self, src_tokens: list[str], out_ids: list[int]) -> float:
        """Teacher-forced log-probability of emitting ``out_ids``.

        No end-of-sentence token is appended: a sequence that should end
        with ``</s>`` must include it.
        """
        batch = self.source_batch(src_tokens)
        batch.tgt_in = np.array([[BOS] + list(out_ids[:-1])], dtype=np.int64)
        batch.tgt_out = np.array([list(out_ids)], dtype=np.int64)
        batch.tgt_mask = np.ones((1, len(out_ids)))
        enc = self.encode(batch)
        tf = self.decode_teacher_forced(batch, enc)
        return -float(tf.J_w.data)

    def word_representation(self, word: str) -> np.ndarray:
        """Encoder-side vector for ``word``: its embedding row when in
        vocabulary, else the character encoder's representation."""
        if word in self.vocabs.src_word or self.mode != "hybrid":
            return self.params["src_emb"].data[self.vocabs.src_word.id(word)].copy()
        reps = self.char_source_reps([encode_word_chars(word, self.vocabs.src_char)])
        return reps.data[0].copy()


def _pad_time_major(seqs) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    ids = np.full((width, len(seqs)), PAD, dtype=np.int64)
    mask = np.zeros((width, len(seqs)))
    for j, s in enumerate(seqs):
        ids[: len(s), j] = s
        mask[: len(s), j] = 1.0
    return ids, mask


def _tile(t: Tensor, k: int) -> Tensor:
    return Tensor(np.repeat(t.data, k, axis=0))

