"""
Minimal multilayer perceptron for the Q-function: ReLU hidden layers, identity
output, exact backpropagation and bias-corrected Adam.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import hashlib

import numpy as np

from app.core.errors import InvalidParameterError


@dataclass
class GradientSet:
    """Gradients of a scalar loss with respect to every layer's weights and biases."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def is_zero(self) -> bool:
        return all(not g.any() for g in self.weights + self.biases)

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for pair in zip(self.weights, self.biases) for g in pair])


class Mlp:
    """
    Fully connected network. weights[i] has shape (layer_dims[i], layer_dims[i+1]).
    """

    def __init__(self, layer_dims: Sequence[int], weights: List[np.ndarray], biases: List[np.ndarray]):
        if len(layer_dims) < 2:
            raise InvalidParameterError("layer_dims", list(layer_dims), "needs input and output dims")
        if len(weights) != len(layer_dims) - 1 or len(biases) != len(weights):
            raise InvalidParameterError("weights", len(weights), "one weight/bias pair per layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_dims[i], layer_dims[i + 1]) or b.shape != (layer_dims[i + 1],):
                raise InvalidParameterError(f"layer[{i}]", (w.shape, b.shape), "shape mismatch")
        self.layer_dims = list(layer_dims)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]

    @classmethod
    def initialize(cls, layer_dims: Sequence[int], rng: np.random.Generator) -> "Mlp":
        """Glorot-uniform weights, zero biases."""
        if any(d < 1 for d in layer_dims):
            raise InvalidParameterError("layer_dims", list(layer_dims), "all dims must be >= 1")
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def _as_batch(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x[np.newaxis, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise InvalidParameterError("x", x.shape, f"expected input dim {self.input_dim}")
        return batch, single

    def _trace(self, batch: np.ndarray) -> List[np.ndarray]:
        """Activations of every layer, input first."""
        activations = [batch]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = activations[-1] @ w + b
            activations.append(z if i == last else np.maximum(z, 0.0))
        return activations

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for one state (1-D) or a batch of states (2-D)."""
        batch, single = self._as_batch(x)
        out = self._trace(batch)[-1]
        return out[0] if single else out

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> GradientSet:
        """
        Backpropagate dLoss/dq through the network. Batch gradients are summed.

        Raises:
            InvalidParameterError: If grad_out does not match the forward output shape
        """
        batch, single = self._as_batch(x)
        delta = np.asarray(grad_out, dtype=np.float64)
        if single:
            delta = delta[np.newaxis, :]
        if delta.shape != (batch.shape[0], self.output_dim):
            raise InvalidParameterError("grad_out", np.shape(grad_out), "shape mismatch with output")

        activations = self._trace(batch)
        grad_w: List[Optional[np.ndarray]] = [None] * len(self.weights)
        grad_b: List[Optional[np.ndarray]] = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grad_w[i] = activations[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (activations[i] > 0.0)
        return GradientSet(weights=grad_w, biases=grad_b)

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.parameters())

    def same_parameters(self, other: "Mlp") -> bool:
        return self.layer_dims == other.layer_dims and all(
            np.array_equal(a, b) for a, b in zip(self.parameters(), other.parameters())
        )

    def param_hash(self) -> str:
        digest = hashlib.sha256()
        for p in self.parameters():
            digest.update(np.ascontiguousarray(p).tobytes())
        return digest.hexdigest()[:16]

    def to_arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        arrays = {f"{prefix}_dims": np.asarray(self.layer_dims, dtype=np.int64)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"{prefix}_w{i}"] = w
            arrays[f"{prefix}_b{i}"] = b
        return arrays

    @classmethod
    def from_arrays(cls, arrays, prefix: str) -> "Mlp":
        dims = [int(d) for d in arrays[f"{prefix}_dims"]]
        layers = len(dims) - 1
        return cls(
            dims,
            [np.array(arrays[f"{prefix}_w{i}"]) for i in range(layers)],
            [np.array(arrays[f"{prefix}_b{i}"]) for i in range(layers)],
        )


@dataclass
class AdamState:
    """First/second moments per parameter plus Adam hyperparameters."""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, learning_rate: float = 1e-3, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        params = net.parameters()
        return cls(
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )

    def copy(self) -> "AdamState":
        return AdamState(
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            step=self.step, m=[a.copy() for a in self.m], v=[a.copy() for a in self.v],
        )

    def to_arrays(self, prefix: str = "adam") -> Dict[str, np.ndarray]:
        arrays = {}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            arrays[f"{prefix}_m{i}"] = m
            arrays[f"{prefix}_v{i}"] = v
        return arrays

    @classmethod
    def from_arrays(cls, arrays, count: int, hyper: dict, prefix: str = "adam") -> "AdamState":
        return cls(
            learning_rate=hyper["learning_rate"], beta1=hyper["beta1"], beta2=hyper["beta2"],
            eps=hyper["eps"], step=hyper["step"],
            m=[np.array(arrays[f"{prefix}_m{i}"]) for i in range(count)],
            v=[np.array(arrays[f"{prefix}_v{i}"]) for i in range(count)],
        )

    def hyper(self) -> dict:
        return {
            "learning_rate": self.learning_rate, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "step": self.step,
        }


def adam_step(opt: AdamState, net: Mlp, grads: GradientSet) -> Mlp:
    """One bias-corrected Adam update applied in place; returns net."""
    params = net.parameters()
    flat_grads = [g for pair in zip(grads.weights, grads.biases) for g in pair]
    if len(flat_grads) != len(params) or len(opt.m) != len(params):
        raise InvalidParameterError("grads", len(flat_grads), "does not match the network")

    opt.step += 1
    correction1 = 1.0 - opt.beta1 ** opt.step
    correction2 = 1.0 - opt.beta2 ** opt.step
    for i, (param, grad) in enumerate(zip(params, flat_grads)):
        if grad.shape != param.shape:
            raise InvalidParameterError(f"grads[{i}]", grad.shape, f"expected {param.shape}")
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad * grad
        m_hat = opt.m[i] / correction1
        v_hat = opt.v[i] / correction2
        param -= opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.eps)
    return net


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to pred."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def huber_loss(pred: np.ndarray, target: np.ndarray, delta: float = 1.0) -> Tuple[float, np.ndarray]:
    diff = pred - target
    small = np.abs(diff) <= delta
    values = np.where(small, 0.5 * diff * diff, delta * (np.abs(diff) - 0.5 * delta))
    grad = np.where(small, diff, delta * np.sign(diff)) / diff.size
    return float(np.mean(values)), grad


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def gradient_check(net: Mlp, x: np.ndarray, upstream: np.ndarray, h: float = 1e-5) -> float:
    """
    Compare backward() against central finite differences of L = sum(forward(x) * upstream).

    Returns:
        Largest per-tensor relative error
    """
    analytic = net.backward(x, upstream)
    analytic_flat = [g for pair in zip(analytic.weights, analytic.biases) for g in pair]
    worst = 0.0
    for param, grad in zip(net.parameters(), analytic_flat):
        numeric = np.zeros_like(param)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            plus = float(np.sum(net.forward(x) * upstream))
            param[index] = original - h
            minus = float(np.sum(net.forward(x) * upstream))
            param[index] = original
            numeric[index] = (plus - minus) / (2.0 * h)
        worst = max(worst, _relative_error(grad, numeric))
    return worst
