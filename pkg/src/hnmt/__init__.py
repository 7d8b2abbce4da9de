"""Hybrid word-character neural machine translation on a small numpy
autodiff substrate."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Batch, Vocabs, make_batch, make_batches, read_corpus, read_parallel
from .decode import Translation, beam_search_char, beam_search_word, translate
from .model import HybridModel, LossBreakdown, ModelConfig
from .tensor import Tape, Tensor, grad_check
from .train import TrainConfig, TrainState, lr_at, sgd_step, train
from .vocab import Vocabulary, build_char_vocab, build_word_vocab

__all__ = [
    "Batch", "HybridModel", "LossBreakdown", "ModelConfig", "Tape", "Tensor",
    "TrainConfig", "TrainState", "Translation", "Vocabs", "Vocabulary",
    "beam_search_char", "beam_search_word", "build_char_vocab", "build_word_vocab",
    "grad_check", "load_checkpoint", "lr_at", "make_batch", "make_batches",
    "read_corpus", "read_parallel", "save_checkpoint", "sgd_step", "train", "translate",
]
__version__ = "0.1.0"
