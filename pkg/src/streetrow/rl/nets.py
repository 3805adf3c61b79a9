"""Dense networks with hand-written backpropagation, plus the Adam optimizer."""
from __future__ import annotations

from typing import Sequence

import numpy as np

IDENTITY = "identity"
BOUNDED = "bounded"  # scaled tanh


class Mlp:
    """Affine layers with ReLU between them.

    ``weights[i]`` has shape ``(widths[i], widths[i + 1])`` so a batch of row
    vectors maps as ``x @ W + b``.
    """

    def __init__(
        self,
        layer_widths: Sequence[int],
        rng: np.random.Generator | None = None,
        output_activation: str = IDENTITY,
        output_scale: float = 1.0,
        final_init: float = 3e-3,
    ):
        widths = tuple(int(w) for w in layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"bad layer widths {widths}")
        if output_activation not in (IDENTITY, BOUNDED):
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.layer_widths = widths
        self.output_activation = output_activation
        self.output_scale = float(output_scale)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng if rng is not None else np.random.default_rng(0)
        last = len(widths) - 2
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            # fan-in uniform init for hidden layers, small final layer as in DDPG
            bound = final_init if i == last else 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != sum(p.size for p in self.params()):
            raise ValueError("flat parameter vector has the wrong length")
        k = 0
        for p in self.params():
            p[...] = flat[k:k + p.size].reshape(p.shape)
            k += p.size

    def copy(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.layer_widths = self.layer_widths
        twin.output_activation = self.output_activation
        twin.output_scale = self.output_scale
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[-1] != self.layer_widths[0]:
            raise ValueError(f"input width {h.shape[-1]} != {self.layer_widths[0]}")
        inputs, pre = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
        if self.output_activation == BOUNDED:
            h = self.output_scale * np.tanh(h)
        cache = [inputs, pre, single]
        return (h[0] if single else h), cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(output * upstream)`` w.r.t. parameters and input.

        Parameter gradients come back in ``params()`` order.
        """
        inputs, pre, single = cache
        g = np.asarray(upstream, dtype=float)
        if single:
            g = g[None, :]
        if self.output_activation == BOUNDED:
            g = g * self.output_scale * (1.0 - np.tanh(pre[-1]) ** 2)
        grads: list[np.ndarray] = [None] * (2 * self.n_layers)
        for i in range(self.n_layers - 1, -1, -1):
            if i < self.n_layers - 1:
                g = g * (pre[i] > 0)
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, (g[0] if single else g)


def mlp_forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, list]:
    return net.forward(x)


def mlp_gradients(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> list[np.ndarray]:
    _, cache = net.forward(x)
    return net.backward(cache, upstream)[0]


class Adam:
    def __init__(self, shapes: Sequence[tuple], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    @classmethod
    def for_net(cls, net: Mlp, lr: float) -> "Adam":
        return cls([p.shape for p in net.params()], lr)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Descend along ``grads``, updating ``params`` in place."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> list[np.ndarray]:
        return self.m + self.v

    def load_arrays(self, arrays: Sequence[np.ndarray], t: int) -> None:
        n = len(self.m)
        for dst, src in zip(self.m + self.v, arrays):
            dst[...] = src
        if len(arrays) != 2 * n:
            raise ValueError("optimizer state has the wrong number of arrays")
        self.t = int(t)
