"""``hnmt`` command line: build-vocab, train, translate, eval.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines whose
keys are flag names (``beam=4`` or ``char-beam=5``); flags given on the
command line win over the file.  ``HNMT_SEED`` supplies the seed when
neither sets one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import metrics
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Vocabs, read_corpus, read_parallel
from .decode import STRATEGIES, check_strategy, load_dictionary, translate
from .errors import ConfigError, DataError, FormatError, NumericError
from .model import MODES, PATHS, HybridModel, ModelConfig
from .train import TrainConfig, default_strategy, train
from .vocab import Vocabulary, build_char_vocab, build_word_vocab, char_coverage, token_coverage

VOCAB_FILES = {
    "src_word": ("src.word.vocab", "word"),
    "tgt_word": ("tgt.word.vocab", "word"),
    "src_char": ("src.char.vocab", "char"),
    "tgt_char": ("tgt.char.vocab", "char"),
}

DESK_NOTE = (
    "note: desk-scale defaults (dim 64, depth 2, vocab 1000); "
    "the published setup used dim 1024, depth 4, vocab 50000"
)


class UsageError(Exception):
    """Bad flag combination; reported with exit status 2."""


# --------------------------------------------------------------------- config


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _install_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Make config-file values the defaults of ``parser``; flags still win."""
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for k, v in values.items():
        a = actions.get(k)
        if a is None or k in ("help", "config"):
            raise UsageError(f"unknown config key {k!r}")
        if isinstance(a, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if v.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {k!r} needs a boolean, got {v!r}")
            defaults[k] = v.lower() in ("true", "1", "yes")
        else:
            # string defaults go through the action's type conversion
            defaults[k] = v
        a.required = False
    parser.set_defaults(**defaults)


def _config_path(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("HNMT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"HNMT_SEED must be an integer, got {env!r}") from None


def _require_files(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- build-vocab


def write_vocabs(vocabs: Vocabs, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for attr, (name, _) in VOCAB_FILES.items():
        getattr(vocabs, attr).save(out / name)


def read_vocabs(vocab_dir) -> Vocabs:
    d = Path(vocab_dir)
    _require_files(*(d / name for name, _ in VOCAB_FILES.values()))
    return Vocabs(**{attr: Vocabulary.load(d / name) for attr, (name, _) in VOCAB_FILES.items()})


def build_vocabs(pairs, vocab_size: int, char_size: int) -> Vocabs:
    src = [s for s, _ in pairs]
    tgt = [t for _, t in pairs]
    sw, tw = build_word_vocab(src, vocab_size), build_word_vocab(tgt, vocab_size)
    # characters come from the frequent words only
    return Vocabs(sw, tw, build_char_vocab(src, char_size, sw), build_char_vocab(tgt, char_size, tw))


def coverage_report(pairs, vocabs: Vocabs) -> str:
    rows = []
    for side, corpus in (("src", [s for s, _ in pairs]), ("tgt", [t for _, t in pairs])):
        wv = getattr(vocabs, f"{side}_word")
        cv = getattr(vocabs, f"{side}_char")
        tok_cov, type_cov = token_coverage(corpus, wv)
        rare = sorted({w for s in corpus for w in s if w not in wv})
        rows += [
            (f"{side}.word_vocab_size", len(wv)),
            (f"{side}.char_vocab_size", len(cv)),
            (f"{side}.token_coverage", tok_cov),
            (f"{side}.type_coverage", type_cov),
            (f"{side}.rare_char_coverage", char_coverage(rare, cv) if rare else 1.0),
        ]
    return metrics.report(rows)


def cmd_build_vocab(args) -> int:
    _require_files(args.src, args.tgt)
    pairs = read_parallel(args.src, args.tgt)
    vocabs = build_vocabs(pairs, args.vocab_size, args.char_size)
    write_vocabs(vocabs, args.out)
    sys.stdout.write(coverage_report(pairs, vocabs))
    return 0


# ---------------------------------------------------------------------- train


def model_config(args, seed: int) -> ModelConfig:
    return ModelConfig(
        mode=args.mode, path=args.path, dim=args.dim, layers=args.layers,
        char_dim=args.dim, char_layers=args.char_layers, alpha=args.alpha,
        dropout=args.dropout, init_range=args.init_range, seed=seed,
        max_len=args.max_len, char_max_len=args.char_max_len,
    )


def cmd_train(args) -> int:
    strategy = args.strategy or default_strategy(args.mode)
    try:
        check_strategy(args.mode, strategy)
    except ConfigError as e:
        raise UsageError(str(e)) from None
    if (args.dev_src is None) != (args.dev_tgt is None):
        raise UsageError("--dev-src and --dev-tgt go together")
    _require_files(args.src, args.tgt, args.dev_src, args.dev_tgt)
    vocab_dir = Path(args.vocab_dir) if args.vocab_dir else None
    if vocab_dir is not None and not vocab_dir.is_dir():
        raise FileNotFoundError(f"no such vocabulary directory: {vocab_dir}")
    seed = resolve_seed(args.seed)
    pairs = read_parallel(args.src, args.tgt)
    dev = read_parallel(args.dev_src, args.dev_tgt) if args.dev_src else None
    vocabs = read_vocabs(vocab_dir) if vocab_dir else build_vocabs(pairs, args.vocab_size, args.char_size)
    cfg = model_config(args, seed)
    tcfg = TrainConfig(
        epochs=args.epochs, lr=args.lr, decay_start=args.decay_start, decay_every=args.decay_every,
        clip_norm=args.clip_norm, batch_size=args.batch_size, seed=seed, log_every=args.log_every,
        eval_every=args.eval_every, dev_beam=1, dev_strategy=strategy, checkpoint_dir=args.out,
    )
    _say(DESK_NOTE)
    _say("config " + json.dumps({**cfg.to_dict(), **{k: v for k, v in vars(tcfg).items()
                                                     if k != "checkpoint_dir"}}, sort_keys=True))
    model = HybridModel(cfg, vocabs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = Path(args.log) if args.log else out / "train.log"
    with open(log_path, "w", encoding="utf-8") as fh:
        def log(line: str) -> None:
            fh.write(line + "\n")
            fh.flush()
            if not args.quiet:
                print(line)

        train(model, pairs, tcfg, dev, log)
    save_checkpoint(model, out / "model.ckpt")
    _say(f"wrote {out / 'model.ckpt'}")
    return 0


# ------------------------------------------------------------------ translate


def cmd_translate(args) -> int:
    _require_files(args.ckpt, args.input, args.dict)
    model = load_checkpoint(args.ckpt)
    try:
        check_strategy(model.mode, args.strategy)
    except ConfigError as e:
        raise UsageError(str(e)) from None
    if args.dict and args.strategy != "unk-replace":
        raise UsageError("--dict only applies to --strategy unk-replace")
    dictionary = load_dictionary(args.dict) if args.dict else None
    if args.strategy == "unk-replace" and dictionary is None:
        _say("warning: no dictionary given; <unk> replaced by identity copy")
        dictionary = {}
    sentences = Path(args.input).read_text(encoding="utf-8").splitlines()

    def run(line: str):
        tokens = line.split()
        if not tokens:
            return None
        return translate(model, tokens, args.beam, args.char_beam, args.strategy, dictionary,
                         args.max_len, args.max_chars)

    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            results = list(pool.map(run, sentences))  # map keeps input order
    else:
        results = [run(s) for s in sentences]
    out = Path(args.output)
    out.write_text("".join((r.text() if r else "") + "\n" for r in results), encoding="utf-8")
    if args.meta:
        blocks = ["".join(line + "\n" for line in (r.meta_lines() if r else [])) for r in results]
        Path(str(out) + ".meta").write_text("\n".join(blocks) + ("\n" if blocks else ""), encoding="utf-8")
    return 0


# ----------------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    if args.similarity is None and (args.hyp is None or args.ref is None):
        raise UsageError("eval needs --hyp and --ref, or --similarity with --ckpt")
    if args.similarity is not None and args.ckpt is None:
        raise UsageError("--similarity needs --ckpt")
    _require_files(args.hyp, args.ref, args.similarity, args.ckpt)
    scores = []
    if args.hyp is not None:
        hyps = read_corpus(args.hyp)
        refs = read_corpus(args.ref)
        # read_corpus keeps empty lines, so counts are line counts
        if len(hyps) != len(refs):
            raise DataError(f"{args.hyp} has {len(hyps)} lines but {args.ref} has {len(refs)}")
        scores += [metrics.bleu(hyps, refs), metrics.chrf3(hyps, refs)]
    if args.similarity is not None:
        model = load_checkpoint(args.ckpt)
        rho = metrics.rare_word_similarity(metrics.read_similarity(args.similarity), model)
        scores.append(("spearman_rho", rho))
        _say("note: rho is reported in [-1, 1]; multiply by 100 for the usual percent scale")
    sys.stdout.write(metrics.report(scores))
    return 0


# --------------------------------------------------------------------- parser


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="hnmt", description="Hybrid word-character NMT.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.add_argument("--config", help="key=value file; command-line flags override it")
        return p

    p = add("build-vocab", "Build word and character vocabularies and print coverage.")
    p.add_argument("--src", required=True, help="source training corpus")
    p.add_argument("--tgt", required=True, help="target training corpus")
    p.add_argument("--vocab-size", type=_positive_int, default=1000, help="words per language")
    p.add_argument("--char-size", type=_positive_int, default=200, help="characters per language")
    p.add_argument("--out", required=True, help="output directory for the four vocabulary files")
    p.set_defaults(func=cmd_build_vocab)

    p = add("train", "Train a word, char or hybrid model.")
    p.add_argument("--src", required=True, help="source training corpus")
    p.add_argument("--tgt", required=True, help="target training corpus")
    p.add_argument("--dev-src", help="source dev corpus")
    p.add_argument("--dev-tgt", help="target dev corpus")
    p.add_argument("--vocab-dir", help="directory from build-vocab (built on the fly if omitted)")
    p.add_argument("--vocab-size", type=_positive_int, default=1000, help="words per language when building")
    p.add_argument("--char-size", type=_positive_int, default=200, help="characters per language when building")
    p.add_argument("--mode", choices=MODES, default="hybrid", help="word, char, or hybrid model")
    p.add_argument("--path", choices=PATHS, default="separate", help="character-decoder seeding path")
    p.add_argument("--strategy", choices=STRATEGIES, help="dev decoding strategy (default from mode)")
    p.add_argument("--dim", type=_positive_int, default=64, help="embedding and hidden size")
    p.add_argument("--layers", type=_positive_int, default=2, help="word LSTM depth")
    p.add_argument("--char-layers", type=_positive_int, default=2, help="character LSTM depth")
    p.add_argument("--alpha", type=float, default=1.0, help="weight of the character loss")
    p.add_argument("--dropout", type=float, default=0.2, help="dropout on LSTM layer inputs")
    p.add_argument("--init-range", type=float, default=0.1, help="uniform init in [-r, r]")
    p.add_argument("--epochs", type=float, default=6.0, help="training budget in epochs")
    p.add_argument("--lr", type=float, default=1.0, help="initial SGD learning rate")
    p.add_argument("--decay-start", type=float, default=4.0, help="epoch after which the rate halves")
    p.add_argument("--decay-every", type=float, default=0.5, help="epochs between halvings")
    p.add_argument("--clip-norm", type=float, default=5.0, help="global gradient norm cap")
    p.add_argument("--batch-size", type=_positive_int, default=128, help="sentence pairs per update")
    p.add_argument("--max-len", type=_positive_int, default=50, help="word-level truncation")
    p.add_argument("--char-max-len", type=_positive_int, default=300,
                   help="char-mode truncation (the backprop window)")
    p.add_argument("--seed", type=int, default=None, help="random seed (falls back to HNMT_SEED, then 0)")
    p.add_argument("--log-every", type=_positive_int, default=10, help="batches per log line")
    p.add_argument("--eval-every", type=float, default=0.5, help="epochs between dev evaluations")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--log", help="training log file (default OUT/train.log)")
    p.add_argument("--quiet", action="store_true", help="do not echo the log to stdout")
    p.set_defaults(func=cmd_train)

    p = add("translate", "Translate a tokenized file, one sentence per line.")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--in", dest="input", required=True, help="source sentences")
    p.add_argument("--out", dest="output", required=True, help="output translations")
    p.add_argument("--beam", type=_positive_int, default=5, help="word beam width")
    p.add_argument("--char-beam", type=_positive_int, default=5, help="character beam width")
    p.add_argument("--strategy", choices=STRATEGIES, default="char", help="<unk> handling")
    p.add_argument("--dict", help="source<TAB>target dictionary for unk-replace")
    p.add_argument("--meta", action="store_true",
                   help="also write OUT.meta: position<TAB>mechanism<TAB>score, blank line between sentences")
    p.add_argument("--max-len", type=_positive_int, default=None,
                   help="word length cap (default min(model max, 2*source+10))")
    p.add_argument("--max-chars", type=_positive_int, default=50, help="character length cap")
    p.add_argument("--threads", type=_positive_int, default=1, help="sentences translated in parallel")
    p.set_defaults(func=cmd_translate)

    p = add("eval", "Score translations (BLEU, chrF3) or rare-word similarity (Spearman rho).")
    p.add_argument("--hyp", help="hypothesis file")
    p.add_argument("--ref", help="reference file")
    p.add_argument("--similarity", help="word1<TAB>word2<TAB>score file")
    p.add_argument("--ckpt", help="checkpoint for --similarity")
    p.set_defaults(func=cmd_eval)
    return parser


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    path = _config_path(argv)
    commands = parser._subparsers._group_actions[0].choices
    if path is not None and argv and argv[0] in commands:
        _require_files(path)
        _install_config(commands[argv[0]], read_config(path))
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return args.func(args)
    except UsageError as e:
        _say(f"hnmt: usage error: {e}")
        return 2
    except (OSError, DataError, FormatError, ConfigError, NumericError) as e:
        _say(f"hnmt: error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
