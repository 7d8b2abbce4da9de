"""Global attention with a bilinear score.

Queries may be a single decoder step (B x h) or all steps at once
(B x m x h); the latter is what teacher-forced training uses, since the
attentional state is never fed back into the decoder LSTM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class AttentionParams:
    Wa: Tensor  # h x h bilinear score
    W: Tensor  # h x 2h attentional combiner
    Wc: Tensor | None = None  # h x 2h; separate-path counterpart of W

    def __post_init__(self):
        h = self.Wa.shape[0]
        if self.Wa.shape != (h, h) or self.W.shape != (h, 2 * h):
            raise DimensionError(f"attention shapes Wa={self.Wa.shape} W={self.W.shape}")
        if self.Wc is not None and self.Wc.shape != self.W.shape:
            raise DimensionError(f"Wc {self.Wc.shape} must match W {self.W.shape}")


@dataclass
class AttentionOutput:
    context: Tensor
    weights: Tensor
    attentional: Tensor


def _as_steps(q: Tensor) -> tuple[Tensor, bool]:
    if q.data.ndim == 2:
        return T.reshape(q, (q.shape[0], 1, q.shape[1])), True
    return q, False


def score_bilinear(ht: Tensor, source_states: Tensor, Wa: Tensor) -> Tensor:
    """``score[b, (t,) i] = ht[b, (t,)] . Wa . source_states[b, i]``."""
    if source_states.data.ndim != 3 or source_states.shape[1] == 0:
        raise ContractError(f"need at least one source state, got {source_states.shape}")
    q, single = _as_steps(ht)
    B, m, h = q.shape
    if source_states.shape[0] != B or source_states.shape[2] != h or Wa.shape != (h, h):
        raise DimensionError(
            f"score_bilinear: query {ht.shape}, states {source_states.shape}, Wa {Wa.shape}"
        )
    proj = T.reshape(T.reshape(q, (B * m, h)) @ Wa, (B, m, h))
    scores = T.bmm(proj, T.transpose(source_states))
    return T.reshape(scores, (B, scores.shape[2])) if single else scores


def _combine(ct: Tensor, ht: Tensor, W: Tensor) -> Tensor:
    lead = ct.shape[:-1]
    flat = T.reshape(T.concat([ct, ht], axis=-1), (-1, 2 * ct.shape[-1]))
    out = T.tanh(flat @ T.transpose(W))
    return T.reshape(out, lead + (W.shape[0],))


def attend(
    ht: Tensor, source_states: Tensor, params: AttentionParams, mask: np.ndarray | None = None
) -> AttentionOutput:
    """Context vector, alignment weights and attentional state ``tanh(W [c; h])``.

    ``mask`` (B x n, truthy = real token) removes padding before the softmax.
    """
    q, single = _as_steps(ht)
    scores = score_bilinear(q, source_states, params.Wa)
    B, m, n = scores.shape
    full_mask = None
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (B, n):
            raise DimensionError(f"attention mask {mask.shape} for scores {(B, n)}")
        if not mask.any(axis=1).all():
            raise ContractError("attention: every source position is masked")
        full_mask = np.broadcast_to(mask[:, None, :], (B, m, n))
    weights = T.softmax_rows(scores, full_mask)
    context = T.bmm(weights, source_states)
    attentional = _combine(context, q, params.W)
    if single:
        h = context.shape[2]
        return AttentionOutput(
            T.reshape(context, (B, h)), T.reshape(weights, (B, n)), T.reshape(attentional, (B, h))
        )
    return AttentionOutput(context, weights, attentional)


def counterpart_state(ct: Tensor, ht: Tensor, Wc: Tensor) -> Tensor:
    """Separate-path seed ``tanh(Wc [c; h])``."""
    if ct.shape != ht.shape or Wc.shape != (ct.shape[-1], 2 * ct.shape[-1]):
        raise DimensionError(f"counterpart_state: c {ct.shape}, h {ht.shape}, Wc {Wc.shape}")
    return _combine(ct, ht, Wc)
