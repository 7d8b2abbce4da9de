import pytest

from hnmt import metrics
from hnmt.checkpoint import load_checkpoint
from hnmt.cli import main
from hnmt.synthetic import open_vocab_corpus

SMALL_TRAIN = [
    "--vocab-size", "12", "--dim", "8", "--layers", "1", "--char-layers", "1",
    "--epochs", "1", "--batch-size", "8", "--quiet",
]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    pairs = open_vocab_corpus(n_pairs=40, vocab_size=12, seed=0)
    (d / "s.txt").write_text("".join(" ".join(s) + "\n" for s, _ in pairs), encoding="utf-8")
    (d / "t.txt").write_text("".join(" ".join(t) + "\n" for _, t in pairs), encoding="utf-8")
    return d


@pytest.fixture(scope="module")
def trained(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
                 "--out", str(out), "--seed", "42", *SMALL_TRAIN])
    assert code == 0
    return out


def test_build_vocab_writes_four_files_deterministically(corpus, tmp_path, capsys):
    args = ["build-vocab", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
            "--vocab-size", "12", "--char-size", "200"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    report = capsys.readouterr().out
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["src.char.vocab", "src.word.vocab", "tgt.char.vocab", "tgt.word.vocab"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert "src.token_coverage" in report


def test_build_vocab_large_size_covers_everything(corpus, tmp_path, capsys):
    assert main(["build-vocab", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
                 "--vocab-size", "100000", "--out", str(tmp_path)]) == 0
    rows = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(rows["src.token_coverage"]) == 1.0 and float(rows["tgt.type_coverage"]) == 1.0


def test_missing_corpus_names_the_path(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert main(["build-vocab", "--src", str(missing), "--tgt", str(missing), "--out", str(tmp_path)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_train_writes_checkpoint_and_log(trained):
    assert (trained / "model.ckpt").exists()
    lines = (trained / "train.log").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "progress\tlr\tJ\tJw\tJc\tppl_w\tppl_c"
    assert load_checkpoint(trained / "model.ckpt").config.seed == 42


def test_train_is_deterministic(corpus, trained, tmp_path):
    assert main(["train", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
                 "--out", str(tmp_path), "--seed", "42", *SMALL_TRAIN]) == 0
    assert (tmp_path / "model.ckpt").read_bytes() == (trained / "model.ckpt").read_bytes()
    assert (tmp_path / "train.log").read_text() == (trained / "train.log").read_text()


def test_word_mode_checkpoint_has_no_char_params(corpus, tmp_path):
    assert main(["train", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
                 "--out", str(tmp_path), "--mode", "word", *SMALL_TRAIN]) == 0
    assert not any("char" in k for k in load_checkpoint(tmp_path / "model.ckpt").params)


def test_char_mode_with_unk_replace_is_usage_error(corpus, tmp_path):
    assert main(["train", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
                 "--out", str(tmp_path), "--mode", "char", "--strategy", "unk-replace"]) == 2


def test_seed_falls_back_to_environment(corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("HNMT_SEED", "9")
    assert main(["train", "--src", str(corpus / "s.txt"), "--tgt", str(corpus / "t.txt"),
                 "--out", str(tmp_path), *SMALL_TRAIN]) == 0
    assert load_checkpoint(tmp_path / "model.ckpt").config.seed == 9


def test_config_file_values_and_overrides(corpus, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"src={corpus / 's.txt'}\ntgt={corpus / 't.txt'}\ndim=6\nseed=5\n"
                   "vocab-size=12\nlayers=1\nchar_layers=1\nepochs=0.5\nquiet=true\n", encoding="utf-8")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o"), "--dim", "4"]) == 0
    m = load_checkpoint(tmp_path / "o" / "model.ckpt")
    assert m.config.dim == 4 and m.config.seed == 5
    cfg.write_text("bogus=1\n", encoding="utf-8")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_translate_char_strategy_has_no_unk(corpus, trained, tmp_path):
    out = tmp_path / "hyp.txt"
    assert main(["translate", "--ckpt", str(trained / "model.ckpt"), "--in", str(corpus / "s.txt"),
                 "--out", str(out), "--beam", "2", "--char-beam", "2", "--meta"]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 40 and not any("<unk>" in line.split() for line in lines)
    meta = (tmp_path / "hyp.txt.meta").read_text(encoding="utf-8")
    assert meta.count("\n\n") == 39 or meta.strip() == ""


def test_translate_threads_keep_order(corpus, trained, tmp_path):
    base = ["translate", "--ckpt", str(trained / "model.ckpt"), "--in", str(corpus / "s.txt"), "--beam", "2"]
    assert main([*base, "--out", str(tmp_path / "one")]) == 0
    assert main([*base, "--out", str(tmp_path / "three"), "--threads", "3"]) == 0
    assert (tmp_path / "one").read_text() == (tmp_path / "three").read_text()


def test_translate_empty_input(trained, tmp_path):
    (tmp_path / "empty").write_text("", encoding="utf-8")
    assert main(["translate", "--ckpt", str(trained / "model.ckpt"), "--in", str(tmp_path / "empty"),
                 "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o").read_text() == ""


def test_translate_dict_with_char_strategy_is_usage_error(corpus, trained, tmp_path):
    d = tmp_path / "d.tsv"
    d.write_text("a\tb\n", encoding="utf-8")
    assert main(["translate", "--ckpt", str(trained / "model.ckpt"), "--in", str(corpus / "s.txt"),
                 "--out", str(tmp_path / "o"), "--dict", str(d)]) == 2


def test_eval_identity_and_mismatch(tmp_path, capsys):
    (tmp_path / "h").write_text("a b c d\ne f g h\n", encoding="utf-8")
    (tmp_path / "r").write_text("a b c d\n", encoding="utf-8")
    assert main(["eval", "--hyp", str(tmp_path / "h"), "--ref", str(tmp_path / "h")]) == 0
    rows = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(rows["BLEU"]) == 1.0 and float(rows["chrF3"]) == 1.0
    assert main(["eval", "--hyp", str(tmp_path / "h"), "--ref", str(tmp_path / "r")]) == 1
    assert "2 lines" in capsys.readouterr().err


def test_eval_similarity_identical_ranks(trained, tmp_path, capsys):
    model = load_checkpoint(trained / "model.ckpt")
    words = [("zzab", "abzz"), ("kek", "kok"), ("mamo", "omam"), ("w1", "w2"), ("bob", "bab")]
    rows = [(a, b, float(metrics.cosine(model.word_representation(a), model.word_representation(b))))
            for a, b in words]
    p = tmp_path / "sim.tsv"
    p.write_text("".join(f"{a}\t{b}\t{s!r}\n" for a, b, s in rows), encoding="utf-8")
    assert main(["eval", "--similarity", str(p), "--ckpt", str(trained / "model.ckpt")]) == 0
    out = capsys.readouterr().out
    assert out.strip() == "spearman_rho\t1.000000"


def test_eval_needs_inputs():
    assert main(["eval"]) == 2


@pytest.mark.parametrize("command", ["build-vocab", "train", "translate", "eval"])
def test_help_lists_defaults(command, capsys):
    with pytest.raises(SystemExit) as e:
        main([command, "--help"])
    assert e.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    assert "--config" in text
    if command == "train":
        for flag in ("--lr", "--decay-start", "--clip-norm", "--batch-size", "--dropout", "--init-range"):
            assert flag in text
        assert "SGD learning rate (default: 1.0)" in text and "sentence pairs per update (default: 128)" in text
