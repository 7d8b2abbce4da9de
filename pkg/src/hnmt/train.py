"""Plain SGD training with a step-decay schedule and global-norm clipping."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from . import metrics
from .checkpoint import save_checkpoint
from .data import Pair, count_batches, make_batches
from .decode import translate
from .errors import NumericError
from .model import HybridModel
from .tensor import Tape, Tensor

LOG_COLUMNS = ("progress", "lr", "J", "Jw", "Jc", "ppl_w", "ppl_c")


@dataclass
class TrainConfig:
    epochs: float = 6.0
    lr: float = 1.0
    decay_start: float = 4.0  # epochs at the initial rate
    decay_every: float = 0.5  # then halve this often
    decay_factor: float = 0.5
    clip_norm: float = 5.0
    batch_size: int = 128
    seed: int = 0
    log_every: int = 10  # batches per log line
    eval_every: float = 0.5  # epochs between dev evaluations / checkpoints
    dev_beam: int = 1  # greedy dev BLEU keeps evaluation cheap
    dev_strategy: str | None = None  # None: char for hybrid, unk-replace for word
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.lr < 0 or self.clip_norm <= 0 or self.batch_size < 1:
            raise ValueError("epochs and lr must be >= 0; clip norm and batch size > 0")
        if self.decay_every <= 0 or not 0 < self.decay_factor <= 1:
            raise ValueError("decay interval must be positive and factor in (0, 1]")


@dataclass
class TrainState:
    progress: float = 0.0
    lr: float = 0.0
    steps: int = 0
    history: list[dict] = field(default_factory=list)
    dev_history: list[dict] = field(default_factory=list)
    best_dev: float | None = None
    checkpoints: list[str] = field(default_factory=list)


def lr_at(progress: float, cfg: TrainConfig) -> float:
    """Initial rate until ``decay_start`` epochs, then one decay per
    completed ``decay_every`` interval."""
    if progress < 0:
        raise ValueError("progress must be nonnegative")
    if progress < cfg.decay_start:
        return cfg.lr
    # guard against 4.4999999 style float drift in fractional progress
    halvings = math.floor((progress - cfg.decay_start) / cfg.decay_every + 1e-9)
    return cfg.lr * cfg.decay_factor**halvings


def global_norm(params: Iterable[Tensor]) -> float:
    return math.sqrt(sum(float((p.grad * p.grad).sum()) for p in params if p.grad is not None))


def sgd_step(params: dict[str, Tensor] | Sequence[Tensor], lr: float, clip_norm: float = 5.0) -> float:
    """Rescale gradients to at most ``clip_norm`` (global L2), apply
    ``p -= lr * grad`` and clear the gradients.  Returns the pre-clip norm."""
    named = params.items() if isinstance(params, dict) else ((p.name or str(i), p) for i, p in enumerate(params))
    named = list(named)
    for name, p in named:
        if p.grad is not None and not np.isfinite(p.grad).all():
            bad = int((~np.isfinite(p.grad)).sum())
            raise NumericError(f"non-finite gradient in {name} ({bad} entries)")
    norm = global_norm(p for _, p in named)
    factor = clip_norm / norm if norm > clip_norm else 1.0
    for _, p in named:
        if p.grad is not None:
            p.data -= (lr * factor) * p.grad
            p.grad = None
    return norm


def _ppl(loss: float, n: int) -> float:
    return metrics.perplexity(loss, n) if n else float("nan")


def format_log(rec: dict) -> str:
    return "\t".join(f"{rec[k]:.6f}" if k != "progress" else f"{rec[k]:.4f}" for k in LOG_COLUMNS)


def evaluate_perplexity(model: HybridModel, pairs: Sequence[Pair], batch_size: int = 64) -> dict:
    """Summed losses and word / character perplexities in evaluation mode."""
    J_w = J_c = 0.0
    n_w = n_c = 0
    for batch in make_batches(pairs, model.vocabs, batch_size, model._max_len(), shuffle=False, mode=model.mode):
        br = model.total_loss(batch)
        J_w += br.J_w
        J_c += br.J_c
        n_w += br.n_word
        n_c += br.n_char
    return {"J_w": J_w, "J_c": J_c, "ppl_w": _ppl(J_w, n_w), "ppl_c": _ppl(J_c, n_c)}


def default_strategy(mode: str) -> str:
    return {"hybrid": "char", "word": "unk-replace", "char": "none"}[mode]


def evaluate_bleu(model: HybridModel, pairs: Sequence[Pair], beam: int = 1,
                  strategy: str | None = None) -> float:
    strategy = strategy or default_strategy(model.mode)
    hyps = [
        translate(model, src, beam, beam, strategy, dictionary={}).tokens for src, _ in pairs if src
    ]
    return metrics.bleu(hyps, [tgt for src, tgt in pairs if src]).value


def train(
    model: HybridModel,
    pairs: Sequence[Pair],
    cfg: TrainConfig,
    dev: Sequence[Pair] | None = None,
    log: TextIO | Callable[[str], None] | None = None,
) -> TrainState:
    """Train in place.  Logs ``progress lr J Jw Jc ppl_w ppl_c`` every
    ``log_every`` batches (J values per sentence over the interval);
    evaluates and checkpoints every ``eval_every`` epochs."""
    emit = log.write if hasattr(log, "write") else log

    def say(line: str) -> None:
        if emit is not None:
            emit(line + "\n") if hasattr(log, "write") else emit(line)

    state = TrainState(lr=lr_at(0.0, cfg))
    n_batches = count_batches(sum(1 for s, _ in pairs if s), cfg.batch_size)
    if n_batches == 0 or cfg.epochs == 0:
        return state
    drop_rng = np.random.default_rng([cfg.seed, 1])
    total_steps = math.ceil(cfg.epochs * n_batches)
    eval_steps = max(1, round(cfg.eval_every * n_batches))
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    acc = dict(J=0.0, Jw=0.0, Jc=0.0, nw=0, nc=0, sents=0, batches=0)
    say("\t".join(LOG_COLUMNS))
    epoch = 0
    while state.steps < total_steps:
        for batch in make_batches(pairs, model.vocabs, cfg.batch_size, model._max_len(),
                                  cfg.seed, epoch, mode=model.mode):
            if state.steps >= total_steps:
                break
            state.lr = lr_at(state.progress, cfg)
            with Tape() as tape:
                br = model.total_loss(batch, training=True, rng=drop_rng)
                objective = br.J * (1.0 / batch.size)
            tape.backward(objective)
            sgd_step(model.params, state.lr, cfg.clip_norm)
            state.steps += 1
            state.progress = state.steps / n_batches
            acc["J"] += float(br.J.data)
            acc["Jw"] += br.J_w
            acc["Jc"] += br.J_c
            acc["nw"] += br.n_word
            acc["nc"] += br.n_char
            acc["sents"] += batch.size
            acc["batches"] += 1
            if acc["batches"] == cfg.log_every or state.steps == total_steps:
                s = acc["sents"]
                rec = {
                    "progress": state.progress, "lr": state.lr,
                    "J": acc["J"] / s, "Jw": acc["Jw"] / s, "Jc": acc["Jc"] / s,
                    "ppl_w": _ppl(acc["Jw"], acc["nw"]), "ppl_c": _ppl(acc["Jc"], acc["nc"]),
                }
                state.history.append(rec)
                say(format_log(rec))
                acc = dict.fromkeys(acc, 0)
                acc.update(J=0.0, Jw=0.0, Jc=0.0)
            if state.steps % eval_steps == 0 or state.steps == total_steps:
                _evaluate(model, dev, cfg, state, ckpt_dir, say)
        epoch += 1
    return state


def _evaluate(model, dev, cfg, state, ckpt_dir, say) -> None:
    score = None
    if dev:
        ev = evaluate_perplexity(model, dev)
        ev["bleu"] = evaluate_bleu(model, dev, cfg.dev_beam, cfg.dev_strategy)
        ev["progress"] = state.progress
        state.dev_history.append(ev)
        say(f"# dev progress={state.progress:.4f} ppl_w={ev['ppl_w']:.4f} "
            f"ppl_c={ev['ppl_c']:.4f} bleu={ev['bleu']:.4f}")
        score = ev["bleu"]
    if ckpt_dir is None:
        return
    path = ckpt_dir / f"model.{state.progress:.2f}.ckpt"
    save_checkpoint(model, path)
    state.checkpoints.append(str(path))
    if score is not None and (state.best_dev is None or score > state.best_dev):
        state.best_dev = score
        save_checkpoint(model, ckpt_dir / "model.best.ckpt")


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
