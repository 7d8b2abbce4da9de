import numpy as np
import pytest

from hnmt.data import Vocabs
from hnmt.model import HybridModel, ModelConfig
from hnmt.vocab import build_char_vocab, build_word_vocab

# two frequent words per side; "zq" / "wz" are rare
MICRO_PAIRS = [
    (["a", "b", "zq"], ["x", "y", "wz"]),
    (["b", "a"], ["x", "y"]),
    (["zq", "b", "a"], ["y", "wz", "x"]),
]


def micro_vocabs(pairs=MICRO_PAIRS, size=2, char_size=8) -> Vocabs:
    src = [s for s, _ in pairs]
    tgt = [t for _, t in pairs]
    return Vocabs(
        build_word_vocab(src, size), build_word_vocab(tgt, size),
        build_char_vocab(src, char_size), build_char_vocab(tgt, char_size),
    )


def micro_model(mode="hybrid", path="same", dim=4, layers=2, seed=0, init=0.5, vocabs=None, **kw):
    cfg = ModelConfig(mode=mode, path=path, dim=dim, layers=layers, char_layers=layers,
                      dropout=0.0, init_range=init, seed=seed, **kw)
    return HybridModel(cfg, vocabs or micro_vocabs())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ------------------------------------------------------ acceptance report

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
