"""Small feedforward softmax classifier with explicit forward/backward passes.

All math is float64. Parameters flatten into a single vector in layer order,
each layer contributing its weight matrix (row-major) followed by its bias,
so the optimizer and the EMA tracker only ever see flat vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class Network:
    """Fully connected ReLU network with a softmax head.

    weights[j] has shape [arch[j], arch[j+1]]; biases[j] has shape [arch[j+1]].
    The activation feeding the final layer is exposed as the embedding.
    """

    arch: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def num_classes(self) -> int:
        return self.arch[-1]

    @property
    def embedding_dim(self) -> int:
        return self.arch[-2]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class ForwardTrace:
    """Everything backward() needs: per-layer inputs and pre-activations.

    layer_inputs[j] is the input to layer j (layer_inputs[0] is the batch);
    pre_activations[j] is the affine output of layer j before ReLU/softmax.
    The embedding is the input to the final layer.
    """

    layer_inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    probs: np.ndarray

    @property
    def embedding(self) -> np.ndarray:
        return self.layer_inputs[-1]


def init_network(arch, seed: int) -> Network:
    """He-uniform weights (+-sqrt(6/fan_in)), zero biases, deterministic per seed."""
    arch = tuple(int(w) for w in arch)
    if len(arch) < 2:
        raise ConfigError(f"arch needs at least input and output widths, got {arch}")
    if any(w < 1 for w in arch):
        raise ConfigError(f"all layer widths must be >= 1, got {arch}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(arch=arch, weights=weights, biases=biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def forward(net: Network, batch: np.ndarray):
    """Run the network on a [B, d] batch.

    Returns (logits [B, K], probs [B, K], trace).
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.arch[0]:
        raise ShapeError(
            f"batch shape {batch.shape} does not match input width {net.arch[0]}"
        )
    layer_inputs = [batch]
    pre_activations = []
    x = batch
    last = len(net.weights) - 1
    for j, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = x @ w + b
        pre_activations.append(z)
        if j < last:
            x = np.maximum(z, 0.0)
            layer_inputs.append(x)
    logits = pre_activations[-1]
    probs = softmax(logits)
    return logits, probs, ForwardTrace(layer_inputs, pre_activations, probs)


def backward(net: Network, trace: ForwardTrace, grad_logits: np.ndarray) -> np.ndarray:
    """Backpropagate dLoss/dlogits to a flat parameter gradient.

    grad_logits must already carry any batch averaging; backward only applies
    the chain rule.
    """
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != trace.pre_activations[-1].shape:
        raise ShapeError(
            f"grad_logits shape {grad_logits.shape} does not match "
            f"logits shape {trace.pre_activations[-1].shape}"
        )
    if len(trace.layer_inputs) != len(net.weights) or any(
        a.shape[1] != w.shape[0] for a, w in zip(trace.layer_inputs, net.weights)
    ):
        raise ShapeError("trace does not match this network's layer shapes")
    grad_w = [np.empty(0)] * len(net.weights)
    grad_b = [np.empty(0)] * len(net.biases)
    delta = grad_logits
    for j in range(len(net.weights) - 1, -1, -1):
        grad_w[j] = trace.layer_inputs[j].T @ delta
        grad_b[j] = delta.sum(axis=0)
        if j > 0:
            delta = (delta @ net.weights[j].T) * (trace.pre_activations[j - 1] > 0.0)
    return np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(grad_w, grad_b)]
    )


def flatten_params(net: Network) -> np.ndarray:
    """Flat copy of all parameters, layer by layer, weights before bias."""
    return np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(net.weights, net.biases)]
    )


def unflatten_params(net: Network, params: np.ndarray) -> Network:
    """Rebuild a network with the same arch from a flat parameter vector."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (net.num_params,):
        raise ShapeError(
            f"expected a flat vector of length {net.num_params}, got {params.shape}"
        )
    weights, biases = [], []
    offset = 0
    for fan_in, fan_out in zip(net.arch[:-1], net.arch[1:]):
        weights.append(params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out).copy())
        offset += fan_in * fan_out
        biases.append(params[offset : offset + fan_out].copy())
        offset += fan_out
    return Network(arch=net.arch, weights=weights, biases=biases)
