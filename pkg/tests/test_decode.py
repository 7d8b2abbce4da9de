import numpy as np
import pytest

from conftest import micro_model
from oracles import exhaustive_char_search, exhaustive_word_search, greedy_by_rescoring, random_micro_model

from hnmt.decode import (
    Translation, beam_search, beam_search_char, beam_search_word, check_strategy,
    load_dictionary, translate,
)
from hnmt.errors import ConfigError, ContractError
from hnmt.tensor import Tensor
from hnmt.vocab import BOS, BOUNDARY, EOS, PAD, UNK

SRC = ["s0", "s2", "s1"]


def _table_step(table):
    """A step function over a fixed (prev -> log-prob row) table."""

    def step(prev, state):
        return np.log(table[prev]), state, {}

    return step


def _dummy_state(k=1):
    return [(Tensor(np.zeros((k, 1))), Tensor(np.zeros((k, 1))))]


# ----------------------------------------------------------- generic core


def test_beam_prefers_lower_token_id_on_ties():
    table = np.tile([0.3, 0.3, 0.3, 0.1], (4, 1))
    hyps = beam_search(_table_step(table), _dummy_state(), end=3, banned=[], beam=1, max_steps=2, start=0)
    assert hyps[0].tokens == [0, 0]


def test_beam_early_stop_when_finished_beats_live():
    table = np.array([[0.1, 0.1, 0.8], [0.5, 0.0, 0.5], [0.3, 0.3, 0.4]])
    calls = []

    def step(prev, state):
        calls.append(len(prev))
        return np.log(table[prev] + 1e-300), state, {}

    hyps = beam_search(step, _dummy_state(), end=2, banned=[], beam=2, max_steps=10, start=0)
    assert hyps[0].tokens == [2] and hyps[0].complete
    assert len(calls) == 1


def test_beam_truncates_at_length_cap():
    table = np.array([[0.9, 0.1], [0.9, 0.1]])
    hyps = beam_search(_table_step(table), _dummy_state(), end=1, banned=[], beam=1, max_steps=3, start=0)
    best = max(hyps, key=lambda h: h.score)
    assert best.tokens == [0, 0, 0] and not best.complete


def test_beam_argument_errors():
    with pytest.raises(ContractError):
        beam_search(_table_step(np.ones((2, 2))), _dummy_state(), 1, [], beam=0, max_steps=3)


# -------------------------------------------------------------- word beam


@pytest.mark.parametrize("seed", range(8))
def test_wide_word_beam_matches_exhaustive_search(seed):
    # output size counts every emittable token: the words, <unk> and </s>
    rng = np.random.default_rng(seed)
    V, max_len = int(rng.integers(3, 5)), int(rng.integers(1, 5))
    m = random_micro_model(seed, V - 2)
    hyps = beam_search_word(m, SRC, beam=V * max_len, max_len=max_len)
    tokens, score = exhaustive_word_search(m, SRC, max_len)
    assert hyps[0].tokens == tokens
    assert abs(hyps[0].score - score) <= 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_three_symbol_model_three_step_beam_three(seed):
    m = random_micro_model(50 + seed, 1)
    hyps = beam_search_word(m, SRC, beam=3, max_len=3)
    tokens, score = exhaustive_word_search(m, SRC, 3)
    assert hyps[0].tokens == tokens and abs(hyps[0].score - score) <= 1e-9


def test_beam_search_is_deterministic():
    m = random_micro_model(9, 3)
    a = beam_search_word(m, SRC, beam=4, max_len=5)
    b = beam_search_word(m, SRC, beam=4, max_len=5)
    assert [(h.tokens, h.score) for h in a] == [(h.tokens, h.score) for h in b]


@pytest.mark.parametrize("seed", range(6))
def test_wider_beam_never_finds_worse(seed):
    m = random_micro_model(200 + seed, 3, init=0.7)
    one = beam_search_word(m, SRC, beam=1, max_len=5)[0].score
    assert beam_search_word(m, SRC, beam=4, max_len=5)[0].score >= one - 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_unit_beam_equals_greedy(seed):
    m = random_micro_model(100 + seed, 3, init=0.5)
    assert beam_search_word(m, SRC, beam=1, max_len=6)[0].tokens == greedy_by_rescoring(m, SRC, 6)


def test_hypothesis_scores_are_sequence_logprobs():
    m = micro_model("hybrid", "separate", seed=3)
    for h in beam_search_word(m, ["a", "zq"], beam=3, max_len=5):
        out = h.tokens + ([EOS] if h.complete else [])
        assert h.score == pytest.approx(m.sequence_logprob(["a", "zq"], out), abs=1e-10)
        assert h.score == pytest.approx(sum(h.step_scores), abs=1e-12)


def test_word_beam_never_emits_reserved_inputs():
    m = random_micro_model(3, 2, init=2.0)
    for h in beam_search_word(m, SRC, beam=4, max_len=4):
        assert BOS not in h.tokens and PAD not in h.tokens


def test_empty_source_is_contract_error():
    with pytest.raises(ContractError):
        beam_search_word(micro_model(), [], beam=2)


# -------------------------------------------------------------- char beam


@pytest.mark.parametrize("seed", range(4))
def test_wide_char_beam_matches_exhaustive_search(seed):
    m = micro_model("hybrid", seed=seed, init=1.0)
    V = len(m.vocabs.tgt_char)
    s = np.random.default_rng(seed).uniform(-1, 1, m.config.char_dim)
    word, score, complete = beam_search_char(m, s, beam=V ** 3, max_chars=3)
    chars, best, done = exhaustive_char_search(m, s, 3)
    cv = m.vocabs.tgt_char
    assert word == "".join(cv.tokens[c] for c in chars)
    assert complete == done
    assert abs(score - best) <= 1e-9


def test_char_beam_spells_nonempty_words_from_char_vocab():
    m = micro_model("hybrid", seed=2)
    allowed = set(m.vocabs.tgt_char.words)
    for k in range(5):
        s = np.random.default_rng(k).uniform(-1, 1, m.config.char_dim)
        word, score, _ = beam_search_char(m, s, beam=3, max_chars=6)
        assert word and set(word) <= allowed and score < 0


def test_unit_char_beam_is_greedy_rollout():
    m = micro_model("hybrid", seed=5, init=1.0)
    s = np.random.default_rng(5).uniform(-1, 1, m.config.char_dim)
    state, prev, chars = m.char_initial_state(s.reshape(1, -1)), np.array([BOS]), []
    for k in range(6):
        logp, state = m.char_step(prev, state)
        logp[0, [UNK, BOS, EOS, PAD]] = -np.inf
        if k == 0:
            logp[0, BOUNDARY] = -np.inf
        c = int(np.argmax(logp[0]))
        if c == BOUNDARY:
            break
        chars.append(c)
        prev = np.array([c])
    word, _, _ = beam_search_char(m, s, beam=1, max_chars=6)
    assert word == "".join(m.vocabs.tgt_char.tokens[c] for c in chars)


def test_unreachable_boundary_returns_partial():
    m = micro_model("hybrid", seed=1)
    s = np.zeros(m.config.char_dim)
    word, score, complete = beam_search_char(m, s, beam=2, max_chars=3, banned=[BOUNDARY])
    assert len(word) == 3 and not complete and np.isfinite(score)


def test_char_beam_seed_width_error():
    with pytest.raises(ConfigError):
        beam_search_char(micro_model(), np.zeros(7))


# -------------------------------------------------------------- strategies


def _unk_model():
    # the first micro-model whose best translation contains <unk>
    for seed in range(200):
        m = micro_model("hybrid", "separate", seed=seed, init=1.0)
        if UNK in beam_search_word(m, ["a", "zq"], beam=3, max_len=4)[0].tokens:
            return m
    raise AssertionError("no micro-model emits <unk>")


def test_rare_free_output_identical_across_strategies():
    for seed in range(40):
        m = micro_model("hybrid", "separate", seed=seed)
        base = translate(m, ["a", "b"], beam=2, strategy="none", max_len=4)
        if "<unk>" not in base.tokens:
            break
    for strategy in ("char", "unk-replace"):
        assert translate(m, ["a", "b"], beam=2, strategy=strategy, dictionary={}, max_len=4).tokens == base.tokens


def test_char_strategy_leaves_no_unk():
    m = _unk_model()
    t = translate(m, ["a", "zq"], beam=3, strategy="char", max_len=4)
    assert t.char_positions and "<unk>" not in t.tokens
    for p in t.char_positions:
        assert t.tokens[p] and t.char_scores[p] < 0


def test_none_strategy_keeps_unk():
    t = translate(_unk_model(), ["a", "zq"], beam=3, strategy="none", max_len=4)
    assert "<unk>" in t.tokens and t.meta_lines() == []


def test_unk_replace_uses_dictionary_then_identity():
    m = _unk_model()
    src = ["zq", "zq"]
    t = translate(m, src, beam=3, strategy="unk-replace", dictionary={"zq": "ZQ"}, max_len=4)
    assert t.replaced_positions and all(t.tokens[p] == "ZQ" for p in t.replaced_positions)
    t = translate(m, src, beam=3, strategy="unk-replace", dictionary={}, max_len=4)
    assert all(t.tokens[p] == "zq" for p in t.replaced_positions)


def test_strategy_checks():
    check_strategy("hybrid", "char")
    check_strategy("word", "unk-replace")
    with pytest.raises(ConfigError):
        check_strategy("word", "char")
    with pytest.raises(ConfigError):
        check_strategy("char", "unk-replace")
    with pytest.raises(ConfigError):
        check_strategy("hybrid", "bpe")


def test_char_mode_translation_splits_on_boundary():
    m = micro_model("char", seed=1)
    t = translate(m, ["ab"], beam=2, strategy="none", max_len=8)
    assert all(w and "_" not in w for w in t.tokens)


def test_meta_lines_sorted_by_position():
    t = Translation(["x", "y", "z"], char_positions=[2], replaced_positions=[0],
                    char_scores={2: -1.5}, replaced_scores={0: -0.25})
    assert t.meta_lines() == ["0\treplace\t-0.250000", "2\tchar\t-1.500000"]
    assert t.text() == "x y z"


def test_load_dictionary_first_entry_wins(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("a\tA\na\tB\n\nb\tC\tjunk\nnotab\n", encoding="utf-8")
    assert load_dictionary(p) == {"a": "A", "b": "C"}
