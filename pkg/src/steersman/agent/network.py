"""Fully connected value network with per-action categorical heads.

Implemented directly on numpy arrays: forward, manual backprop, and an
adaptive-moment optimizer.  All parameters live in one flat vector (the
layer matrices are views into it) so optimizer updates, target syncs, and
checkpointing are single-array operations and training stays
bit-reproducible.
"""

from __future__ import annotations

import numpy as np


def _log_softmax(z):
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class ValueNetwork:
    """MLP mapping an observation to n_actions categorical distributions."""

    def __init__(self, input_size: int, hidden: tuple, n_actions: int,
                 n_atoms: int, rng: np.random.Generator | None = None,
                 dtype=np.float64):
        self.input_size = input_size
        self.hidden = tuple(hidden)
        self.n_actions = n_actions
        self.n_atoms = n_atoms
        self.dtype = np.dtype(dtype)
        dims = self.layer_dims
        total = sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))
        self.flat = np.zeros(total, dtype=self.dtype)
        self.weights = []
        self.biases = []
        pos = 0
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = self.flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = self.flat[pos:pos + fan_out]
            pos += fan_out
            if rng is not None:
                bound = 1.0 / np.sqrt(fan_in)
                w[:] = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(self.dtype)
                b[:] = rng.uniform(-bound, bound, size=fan_out).astype(self.dtype)
            self.weights.append(w)
            self.biases.append(b)

    @property
    def layer_dims(self) -> list:
        return [self.input_size, *self.hidden, self.n_actions * self.n_atoms]

    def logits(self, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        h = x if x.ndim == 2 else x[None, :]
        if h.dtype != self.dtype:
            h = h.astype(self.dtype)
        if cache is not None:
            cache.append(h)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                np.maximum(h, 0.0, out=h)
                if cache is not None:
                    cache.append(h)
        return h.reshape(-1, self.n_actions, self.n_atoms)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Probabilities of shape (batch, n_actions, n_atoms); (A, atoms) for
        a single observation."""
        z = self.logits(x)
        log_p = _log_softmax(z)
        p = np.exp(log_p)
        return p[0] if x.ndim == 1 else p

    def forward_training(self, x: np.ndarray):
        """(log-probabilities, activation cache) for a batch."""
        cache: list = []
        z = self.logits(x, cache)
        return _log_softmax(z), cache

    def backprop(self, cache: list, grad_logits: np.ndarray) -> np.ndarray:
        """Flat gradient vector of a scalar loss given d loss / d logits."""
        g = grad_logits.reshape(grad_logits.shape[0], -1)
        grad = np.empty_like(self.flat)
        pos = self.flat.size
        for k in range(len(self.weights) - 1, -1, -1):
            a_in = cache[k]
            w = self.weights[k]
            pos -= w.shape[1]
            grad[pos:pos + w.shape[1]] = g.sum(axis=0)
            pos -= w.size
            grad[pos:pos + w.size] = (a_in.T @ g).ravel()
            if k > 0:
                g = (g @ w.T) * (a_in > 0)
        return grad

    # flat parameter access (checkpointing, finite-difference checks)
    def get_flat(self) -> np.ndarray:
        return self.flat.copy()

    def set_flat(self, flat: np.ndarray) -> None:
        if flat.size != self.flat.size:
            raise ValueError(f"parameter vector size {flat.size}, expected {self.flat.size}")
        self.flat[:] = flat.astype(self.dtype, copy=False)

    def copy_from(self, other: "ValueNetwork") -> None:
        self.flat[:] = other.flat

    def clone(self) -> "ValueNetwork":
        twin = ValueNetwork(self.input_size, self.hidden, self.n_actions,
                            self.n_atoms, dtype=self.dtype)
        twin.flat[:] = self.flat
        return twin


class AdamOptimizer:
    """Adaptive-moment gradient descent over the flat parameter vector."""

    def __init__(self, net: ValueNetwork, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1.5e-4):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros_like(net.flat)
        self.v = np.zeros_like(net.flat)
        self._scratch = np.empty_like(net.flat)

    def step(self, net: ValueNetwork, grad: np.ndarray) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        m, v, s = self.m, self.v, self._scratch
        m *= self.beta1
        np.multiply(grad, 1.0 - self.beta1, out=s)
        m += s
        v *= self.beta2
        np.multiply(grad, grad, out=s)
        s *= 1.0 - self.beta2
        v += s
        np.divide(v, c2, out=s)
        np.sqrt(s, out=s)
        s += self.eps
        np.divide(m, s, out=s)
        s *= self.lr / c1
        net.flat -= s
