"""A tour of the autodiff substrate.

Every model in ``hnmt`` is built from a handful of tape-recorded numpy
operations.  This script builds a tiny two-layer LSTM classifier by hand,
checks its gradients against finite differences, and takes a few SGD steps.

Run with ``python demos/01_autodiff_and_lstm.py``.
"""

import numpy as np

from hnmt import tensor as T
from hnmt.layers import LstmLayer, lstm_forward
from hnmt.tensor import Tape, Tensor, grad_check
from hnmt.train import sgd_step

rng = np.random.default_rng(0)

# %% A scalar example: d/dx sum(tanh(x) * x)
x = Tensor(np.array([[0.5, -1.0, 2.0]]), requires_grad=True)
with Tape() as tape:
    y = T.total(T.mul(T.tanh(x), x))
tape.backward(y)
analytic = np.tanh(x.data) + x.data * (1 - np.tanh(x.data) ** 2)
print("tape gradient  ", x.grad.round(6))
print("closed form    ", analytic.round(6))

# %% A two-layer LSTM over five random inputs, scored by cross-entropy
hidden, n_in, n_out = 6, 3, 4
stack = [LstmLayer.create(n_in, hidden, rng, init=0.3), LstmLayer.create(hidden, hidden, rng, init=0.3)]
W_out = Tensor(rng.uniform(-0.3, 0.3, (hidden, n_out)), requires_grad=True)
inputs = [Tensor(rng.normal(size=(2, n_in))) for _ in range(5)]
targets = np.array([1, 3])


def loss(_=None):
    tops, _ = lstm_forward(stack, inputs)
    return T.cross_entropy(T.matmul(tops[-1], W_out), targets)


# %% grad_check perturbs one tensor at a time with central differences
params = [t for layer in stack for t in layer.tensors().values()] + [W_out]
worst = max(grad_check(loss, p) for p in params)
print(f"max relative gradient error over {sum(p.size for p in params)} coordinates: {worst:.2e}")

# %% A few plain SGD steps with global-norm clipping
for step in range(30):
    with Tape() as tape:
        J = loss()
    tape.backward(J)
    norm = sgd_step(params, lr=0.5, clip_norm=5.0)
    if step % 10 == 0:
        print(f"step {step:2d}  loss {float(J.data):.4f}  grad norm {norm:.3f}")
print(f"final loss {float(loss().data):.4f}")
