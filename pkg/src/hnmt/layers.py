"""LSTM stacks, embedding lookup, output projection and dropout.

Gate order inside the stacked ``4h`` rows is fixed as input, forget,
candidate, output (i, f, g, o); checkpoints depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, VocabularyError
from .tensor import Tensor

GATE_ORDER = ("input", "forget", "candidate", "output")


@dataclass
class LstmLayer:
    """One LSTM layer: ``Wx`` (4h x in), ``Wh`` (4h x h), bias ``b`` (4h)."""

    Wx: Tensor
    Wh: Tensor
    b: Tensor

    def __post_init__(self):
        four_h, h = self.Wh.shape
        if four_h != 4 * h or self.Wx.shape[0] != four_h or self.b.shape != (four_h,):
            raise DimensionError(
                f"inconsistent LSTM shapes Wx={self.Wx.shape} Wh={self.Wh.shape} b={self.b.shape}"
            )

    @property
    def hidden(self) -> int:
        return self.Wh.shape[1]

    @property
    def input_size(self) -> int:
        return self.Wx.shape[1]

    def tensors(self) -> dict[str, Tensor]:
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b}

    @classmethod
    def create(cls, input_size: int, hidden: int, rng: np.random.Generator, init: float = 0.1):
        def u(*shape):
            return Tensor(rng.uniform(-init, init, size=shape), requires_grad=True)

        return cls(u(4 * hidden, input_size), u(4 * hidden, hidden), u(4 * hidden))


# (h, c) per layer
LayerState = tuple[Tensor, Tensor]


def zero_state(depth: int, batch: int, hidden: int) -> list[LayerState]:
    return [(Tensor(np.zeros((batch, hidden))), Tensor(np.zeros((batch, hidden)))) for _ in range(depth)]


def _gates(pre: Tensor, c: Tensor, h_size: int) -> LayerState:
    i = T.sigmoid(T.slice_last(pre, 0, h_size))
    f = T.sigmoid(T.slice_last(pre, h_size, 2 * h_size))
    g = T.tanh(T.slice_last(pre, 2 * h_size, 3 * h_size))
    o = T.sigmoid(T.slice_last(pre, 3 * h_size, 4 * h_size))
    c_new = f * c + i * g
    return o * T.tanh(c_new), c_new


def lstm_step(layer: LstmLayer, x: Tensor, state: LayerState) -> LayerState:
    """One recurrence step for a batch of rows ``x`` (B x in)."""
    h, c = state
    if x.shape[-1] != layer.input_size or h.shape[-1] != layer.hidden:
        raise DimensionError(
            f"lstm_step: input {x.shape} / state {h.shape} for layer {layer.Wx.shape}"
        )
    pre = T.add_bias(x @ T.transpose(layer.Wx) + h @ T.transpose(layer.Wh), layer.b)
    return _gates(pre, c, layer.hidden)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``p == 0``."""
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractError("training-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return T.dropout_mask(x, mask)


def lstm_forward(
    stack: Sequence[LstmLayer],
    inputs: Sequence[Tensor] | Tensor,
    init: Sequence[LayerState] | None = None,
    dropout_p: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> tuple[list[Tensor], list[LayerState]]:
    """Run a stacked LSTM over ``inputs``: a list of B x in tensors, or one
    time-major (T, B, in) tensor.

    Returns the top-layer hidden rows per step and the final state of every
    layer.  ``mask`` (T x B of 0/1) freezes the state of a row past its
    length, so the final state is that of the last real step.  Dropout hits
    the input of each layer, never the recurrent path.

    The input projection is computed for all steps at once, so the stack is
    evaluated layer by layer rather than step by step.
    """
    if not 0.0 <= dropout_p < 1.0:
        raise ContractError(f"dropout probability {dropout_p} outside [0, 1)")
    if isinstance(inputs, Tensor):
        # time-major block (T, B, in)
        steps, batch = inputs.shape[:2]
        if steps == 0:
            raise ContractError("lstm_forward on an empty sequence")
        layer_in = T.reshape(inputs, (steps * batch, inputs.shape[2]))
    else:
        steps = len(inputs)
        if steps == 0:
            raise ContractError("lstm_forward on an empty sequence")
        batch = inputs[0].shape[0]
        layer_in = T.concat(list(inputs), axis=0) if steps > 1 else inputs[0]
    if init is None:
        init = zero_state(len(stack), batch, stack[0].hidden)
    if len(init) != len(stack):
        raise ContractError(f"{len(init)} initial states for {len(stack)} layers")

    finals: list[LayerState] = []
    outputs: list[Tensor] = []
    for layer, (h, c) in zip(stack, init):
        if layer_in.shape[-1] != layer.input_size:
            raise DimensionError(
                f"lstm_forward: input width {layer_in.shape[-1]} for layer {layer.Wx.shape}"
            )
        layer_in = dropout(layer_in, dropout_p, rng, training)
        proj = T.add_bias(layer_in @ T.transpose(layer.Wx), layer.b)
        WhT = T.transpose(layer.Wh)
        outputs = []
        for t in range(steps):
            pre = T.slice_axis(proj, t * batch, (t + 1) * batch, axis=0) if steps > 1 else proj
            h_new, c_new = _gates(pre + h @ WhT, c, layer.hidden)
            if mask is not None and not mask[t].all():
                h_new = T.blend(h_new, h, mask[t])
                c_new = T.blend(c_new, c, mask[t])
            h, c = h_new, c_new
            outputs.append(h)
        finals.append((h, c))
        layer_in = T.concat(outputs, axis=0) if steps > 1 else outputs[0]
    return outputs, finals


def lstm_stack_step(
    stack: Sequence[LstmLayer], x: Tensor, state: Sequence[LayerState]
) -> list[LayerState]:
    """Advance every layer by one step (evaluation mode, used in decoding)."""
    new = []
    for layer, st in zip(stack, state):
        st = lstm_step(layer, x, st)
        new.append(st)
        x = st[0]
    return new


def embed(table: Tensor, ids) -> Tensor:
    """Row lookup; raises :class:`VocabularyError` naming a bad id."""
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    bad = ids[(ids < 0) | (ids >= n)]
    if bad.size:
        raise VocabularyError(f"token id {int(bad[0])} outside vocabulary of size {n}")
    return T.take_rows(table, ids)


def project_logits(weight: Tensor, h: Tensor) -> Tensor:
    """Bias-free logits ``h W`` for ``W`` of shape (d, |V|)."""
    if h.shape[-1] != weight.shape[0]:
        raise DimensionError(f"project_logits: hidden {h.shape} vs weight {weight.shape}")
    return h @ weight
