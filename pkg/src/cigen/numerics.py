"""Minimal dense feed-forward networks with explicit backpropagation.

Every network in this package (generator, discriminator, information
network) is a small fixed-topology MLP, so gradients are written out by
hand and verified against central finite differences instead of pulling
in an autodiff framework.  All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIGMOID_CLAMP = 30.0

HIDDEN_ACTIVATIONS = ("tanh", "relu")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid")


class ShapeError(ValueError):
    """Raised when matrix dimensions do not line up."""


def as_matrix(a, name="input"):
    """Validate and convert `a` to a finite 2-D float64 array.

    Raises ShapeError for non-2D input and ValueError for NaN/Inf entries.
    """
    out = np.asarray(a, dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return out


def sigmoid(t):
    # clamp keeps exp in range and the output strictly inside (0, 1)
    t = np.clip(t, -SIGMOID_CLAMP, SIGMOID_CLAMP)
    return 1.0 / (1.0 + np.exp(-t))


class Mlp:
    """Fully connected network with one activation per hidden layer.

    Parameters
    ----------
    layer_dims : sequence of int
        (input, hidden..., output) widths.
    hidden_activation : {"tanh", "relu"}
    output_activation : {"identity", "sigmoid"}
    seed : int
        Seed for Xavier-uniform weight initialization.
    """

    def __init__(self, layer_dims, hidden_activation="tanh",
                 output_activation="identity", seed=0):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ShapeError(f"bad layer dims {layer_dims}")
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {hidden_activation!r}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.layer_dims = layer_dims
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = np.sqrt(6.0 / (d_in + d_out))
            self.weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
            self.biases.append(np.zeros(d_out))

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        """Flat list of parameter arrays, weights and biases interleaved."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self):
        clone = Mlp.__new__(Mlp)
        clone.layer_dims = list(self.layer_dims)
        clone.hidden_activation = self.hidden_activation
        clone.output_activation = self.output_activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def _apply_hidden(self, t):
        if self.hidden_activation == "tanh":
            return np.tanh(t)
        return np.maximum(t, 0.0)

    def forward(self, x):
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x):
        """Forward pass returning (output, cache) for a later backward call."""
        x = as_matrix(x)
        if x.shape[1] != self.input_dim:
            raise ShapeError(
                f"input has {x.shape[1]} columns, network expects {self.input_dim}")
        activations = [x]
        pre = []
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            t = h @ w + b
            pre.append(t)
            if i < self.n_layers - 1:
                h = self._apply_hidden(t)
            elif self.output_activation == "sigmoid":
                h = sigmoid(t)
            else:
                h = t
            activations.append(h)
        return h, (activations, pre)

    def backward(self, cache, upstream_grad):
        """Backpropagate `upstream_grad` (dLoss/dOutput) through the cache.

        Returns (grads, input_grad) where grads matches parameters() layout.
        """
        activations, pre = cache
        upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
        if upstream_grad.shape != activations[-1].shape:
            raise ShapeError(
                f"upstream grad shape {upstream_grad.shape} does not match "
                f"output shape {activations[-1].shape}")
        delta = upstream_grad
        if self.output_activation == "sigmoid":
            s = activations[-1]
            # derivative is 0 where the pre-activation was clamped
            inside = np.abs(pre[-1]) < SIGMOID_CLAMP
            delta = delta * s * (1.0 - s) * inside
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grads_w[i] = activations[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                if self.hidden_activation == "tanh":
                    delta = delta * (1.0 - activations[i] ** 2)
                else:
                    delta = delta * (pre[i - 1] > 0.0)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return grads, delta


@dataclass
class AdamState:
    """Bias-corrected Adam accumulator for a list of parameter arrays."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def _ensure(self, params):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(self.m) != len(params):
            raise ShapeError("parameter count changed under Adam state")


def adam_step(state, params, grads):
    """One in-place Adam update of `params` along `grads`.

    Parameter arrays are mutated; `state` is advanced by one step.
    """
    state._ensure(params)
    state.step += 1
    lr, b1, b2, eps = (state.learning_rate, state.beta1,
                       state.beta2, state.epsilon)
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


@dataclass
class GradCheckReport:
    max_relative_error: float
    excluded: list  # (param_index, flat_coordinate) pairs near ReLU kinks


def gradient_check(net, loss_fn, x, h=1e-5):
    """Compare analytic parameter gradients against central differences.

    `loss_fn(output)` must return (scalar loss, dloss/doutput).  Coordinates
    whose perturbation flips a ReLU activation pattern are excluded from the
    maximum and reported instead, since the analytic and numeric values are
    not comparable there.
    """
    x = as_matrix(x)
    out, cache = net.forward_cached(x)
    _, dout = loss_fn(out)
    analytic, _ = net.backward(cache, dout)

    params = net.parameters()
    max_err = 0.0
    excluded = []
    for pi, p in enumerate(params):
        flat = p.ravel()
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + h
            out_plus, cache_plus = net.forward_cached(x)
            loss_plus, _ = loss_fn(out_plus)
            pat_plus = ([t > 0.0 for t in cache_plus[1][:-1]]
                        if net.hidden_activation == "relu" else None)
            flat[ci] = orig - h
            out_minus, cache_minus = net.forward_cached(x)
            loss_minus, _ = loss_fn(out_minus)
            pat_minus = ([t > 0.0 for t in cache_minus[1][:-1]]
                         if net.hidden_activation == "relu" else None)
            flat[ci] = orig
            if pat_plus is not None:
                flipped = any(np.any(a != b) for a, b in zip(pat_plus, pat_minus))
                if flipped:
                    excluded.append((pi, ci))
                    continue
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            a = analytic[pi].ravel()[ci]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            max_err = max(max_err, err)
    return GradCheckReport(max_relative_error=max_err, excluded=excluded)
