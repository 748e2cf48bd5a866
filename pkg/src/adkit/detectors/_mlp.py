"""Fully connected network with leaky-ReLU hidden layers and a sigmoid output.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of shape
``(n, fan_in)`` maps to ``X @ W + b``.
"""

from __future__ import annotations

import numpy as np

from .._rng import Xoshiro256

LEAK = 0.01


def glorot_uniform(rng: Xoshiro256, layer_sizes):
    """Uniform(-s, s) weights with s = sqrt(6 / (fan_in + fan_out)); zero biases.

    Draws are consumed layer by layer, each matrix in row-major order.
    """
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-s, s, fan_in * fan_out).reshape(fan_in, fan_out)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return weights, biases


def leaky_relu(a):
    return np.where(a > 0, a, LEAK * a)


def sigmoid(a):
    # split by sign to avoid overflow in exp
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def forward(X, weights, biases):
    """Return the network output and the per-layer cache needed by :func:`backward`."""
    inputs, pre = [], []
    h = X
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        inputs.append(h)
        a = h @ w + b
        pre.append(a)
        h = sigmoid(a) if i == last else leaky_relu(a)
    return h, (inputs, pre, h)


def backward(cache, grad_out, weights):
    """Backpropagate ``dL/d output``; return (weight grads, bias grads, dL/d input)."""
    inputs, pre, out = cache
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    g = grad_out * out * (1.0 - out)
    for i in range(len(weights) - 1, -1, -1):
        if i < len(weights) - 1:
            g = g * np.where(pre[i] > 0, 1.0, LEAK)
        grad_w[i] = inputs[i].T @ g
        grad_b[i] = g.sum(axis=0)
        g = g @ weights[i].T
    return grad_w, grad_b, g
