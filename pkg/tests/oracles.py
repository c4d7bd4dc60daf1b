"""Shared independent oracles: finite differences and loss-through-network."""

import numpy as np

from kdfm.losses import batch_loss
from kdfm.network import backward, forward, unflatten_params


def loss_and_grad_through_net(spec, net, params, x, targets):
    """Mean batch loss as a function of the flat parameter vector."""
    candidate = unflatten_params(net, params)
    _, probs, trace = forward(candidate, x)
    values, grads = batch_loss(spec, targets, probs)
    return float(values.mean()), backward(candidate, trace, grads / len(values))


def central_differences(f, params, h=1e-5):
    """Central finite-difference gradient of a scalar function, one coordinate at a time."""
    grad = np.zeros_like(params)
    for j in range(len(params)):
        plus = params.copy()
        minus = params.copy()
        plus[j] += h
        minus[j] -= h
        grad[j] = (f(plus) - f(minus)) / (2.0 * h)
    return grad


def max_rel_error(a, b, floor=1e-6):
    """Elementwise relative error with a floor so near-zero pairs compare sanely."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
