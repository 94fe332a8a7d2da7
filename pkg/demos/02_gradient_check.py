"""Check the hand-written backward passes against finite differences.

Every layer of the classifier is probed on a small random instance; the
printed numbers are norm-wise relative errors and should sit well below 1e-3.
"""

# %%
from __future__ import annotations

import numpy as np

from ecg_gaf.nn import conv2d_backward, conv2d_forward, dense_backward, dense_forward, softmax_cross_entropy

rng = np.random.default_rng(0)


def numeric_grad(f, x, step=1e-3):
    g = np.zeros(x.shape)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f()
        flat[i] = orig - step
        gf[i] = (up - f()) / (2 * step)
        flat[i] = orig
    return g


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


# %% Convolution: 3x3 kernel, valid padding.
x = rng.normal(size=(2, 6, 6, 3)).astype(np.float32)
w = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
b = rng.normal(size=4).astype(np.float32)
probe = rng.normal(size=(2, 4, 4, 4))
f = lambda: float(np.sum(conv2d_forward(x, w, b) * probe))  # noqa: E731
gx, gw, gb = conv2d_backward(probe.astype(np.float32), x, w)
print("conv2d  dx %.1e  dw %.1e  db %.1e" % (rel(gx, numeric_grad(f, x)), rel(gw, numeric_grad(f, w)), rel(gb, numeric_grad(f, b))))

# %% Dense layer.
x = rng.normal(size=(3, 8)).astype(np.float32)
w = rng.normal(size=(5, 8)).astype(np.float32)
b = rng.normal(size=5).astype(np.float32)
probe = rng.normal(size=(3, 5))
f = lambda: float(np.sum(dense_forward(x, w, b) * probe))  # noqa: E731
gx, gw, gb = dense_backward(probe.astype(np.float32), x, w)
print("dense   dx %.1e  dw %.1e  db %.1e" % (rel(gx, numeric_grad(f, x)), rel(gw, numeric_grad(f, w)), rel(gb, numeric_grad(f, b))))

# %% Softmax cross-entropy, evaluated in float64.
logits = rng.normal(size=(4, 5))
labels = np.array([0, 3, 1, 4])
loss, grad = softmax_cross_entropy(logits, labels)
num = numeric_grad(lambda: softmax_cross_entropy(logits, labels)[0], logits)
print("softmax-ce loss %.4f  dlogits %.1e" % (loss, rel(grad, num)))
