"""Minimal feedforward networks with exact reverse-mode gradients and Adam.

Everything is float64 numpy.  Inputs may be a single vector (in_dim,) or a
batch (B, in_dim); weights are stored (in_dim, out_dim) so a forward pass
is ``x @ W + b`` followed by the layer activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "identity"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class Network:
    """Layered affine+activation function approximator."""

    def __init__(self, specs: list[LayerSpec], weights: list[np.ndarray],
                 biases: list[np.ndarray]):
        for prev, cur in zip(specs, specs[1:]):
            if prev.out_dim != cur.in_dim:
                raise ValueError("adjacent layer dimensions are incompatible")
        self.specs = list(specs)
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialize(cls, specs: list[LayerSpec], rng: np.random.Generator) -> "Network":
        """Uniform fan-in initialization: U[-1/sqrt(in), 1/sqrt(in)]."""
        weights, biases = [], []
        for spec in specs:
            bound = 1.0 / np.sqrt(spec.in_dim)
            weights.append(rng.uniform(-bound, bound, (spec.in_dim, spec.out_dim)))
            biases.append(rng.uniform(-bound, bound, spec.out_dim))
        return cls(specs, weights, biases)

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def copy(self) -> "Network":
        return Network(self.specs, [w.copy() for w in self.weights],
                       [b.copy() for b in self.biases])

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.in_dim:
            raise ValueError(f"input width {a.shape[1]} != {self.in_dim}")
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            a = _activate(spec.activation, a @ w + b)
        return a[0] if single else a

    def _forward_cached(self, x: np.ndarray):
        """Forward pass keeping pre-activations and activations per layer."""
        acts = [x]
        zs = []
        a = x
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            z = a @ w + b
            a = _activate(spec.activation, z)
            zs.append(z)
            acts.append(a)
        return zs, acts

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Exact gradients of sum(output * upstream) w.r.t. parameters and input.

        Returns (grads, input_grad) where grads is a list of (dW, db) per
        layer.  Batched inputs accumulate parameter gradients over the
        batch.
        """
        x = np.asarray(x, dtype=float)
        upstream = np.asarray(upstream, dtype=float)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        gb = upstream[None, :] if single else upstream
        zs, acts = self._forward_cached(xb)
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.specs)
        g = gb
        for i in range(len(self.specs) - 1, -1, -1):
            g = g * _activation_grad(self.specs[i].activation, zs[i], acts[i + 1])
            grads[i] = (acts[i].T @ g, g.sum(axis=0))
            g = g @ self.weights[i].T
        return grads, (g[0] if single else g)

    # Named-array export for checkpointing; keys are "layers.<i>.w" / ".b".
    def export_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"layers.{i}.w"] = w.copy()
            out[f"layers.{i}.b"] = b.copy()
        return out

    def import_params(self, params: dict[str, np.ndarray]) -> None:
        for i in range(len(self.specs)):
            w = params[f"layers.{i}.w"]
            b = params[f"layers.{i}.b"]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError(f"parameter shape mismatch at layer {i}")
            self.weights[i] = np.asarray(w, dtype=float).copy()
            self.biases[i] = np.asarray(b, dtype=float).copy()


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators for one network."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = None
    v: list = None

    @classmethod
    def for_network(cls, net: Network, lr: float) -> "AdamState":
        m = [(np.zeros_like(w), np.zeros_like(b))
             for w, b in zip(net.weights, net.biases)]
        v = [(np.zeros_like(w), np.zeros_like(b))
             for w, b in zip(net.weights, net.biases)]
        return cls(lr=lr, m=m, v=v)


def adam_step(net: Network, grads, opt: AdamState) -> None:
    """One adaptive-moment descent step with bias correction, in place."""
    opt.step_count += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1 ** opt.step_count
    c2 = 1.0 - b2 ** opt.step_count
    for i, (dw, db) in enumerate(grads):
        mw, mb = opt.m[i]
        vw, vb = opt.v[i]
        mw *= b1; mw += (1.0 - b1) * dw
        mb *= b1; mb += (1.0 - b1) * db
        vw *= b2; vw += (1.0 - b2) * dw * dw
        vb *= b2; vb += (1.0 - b2) * db * db
        net.weights[i] -= opt.lr * (mw / c1) / (np.sqrt(vw / c2) + opt.eps)
        net.biases[i] -= opt.lr * (mb / c1) / (np.sqrt(vb / c2) + opt.eps)


def soft_update(target: Network, source: Network, tau: float) -> None:
    """Blend target parameters toward source: tau*source + (1-tau)*target."""
    if [s.in_dim for s in target.specs] != [s.in_dim for s in source.specs] or \
       target.out_dim != source.out_dim:
        raise ValueError("architecture mismatch between target and source")
    for tw, sw in zip(target.weights, source.weights):
        tw *= 1.0 - tau
        tw += tau * sw
    for tb, sb in zip(target.biases, source.biases):
        tb *= 1.0 - tau
        tb += tau * sb
