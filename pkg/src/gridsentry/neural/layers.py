"""Minimal dense/recurrent layer library with reverse-mode gradients.

Single-threaded per model instance: forward caches activations that the
matching backward consumes. All arrays are float64, batch-first.
"""

from __future__ import annotations

import numpy as np

# checked at layer boundaries; cheap at the scales this package runs at
CHECK_FINITE = True


class NumericalError(FloatingPointError):
    """A layer produced NaN/Inf."""


def _check(name: str, arr: np.ndarray) -> np.ndarray:
    if CHECK_FINITE and not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values out of {name}")
    return arr


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-stabilized softmax over the last axis."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Layer:
    """Base: parameters and gradients are aligned name -> array dicts."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for k in self.params:
            self.grads[k] = np.zeros_like(self.params[k])

    def parameters(self):
        """Flat (name, params-dict, grads-dict, key) view for optimizers."""
        return [(k, self.params, self.grads, k) for k in self.params]


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        bound = 1.0 / np.sqrt(in_dim)
        self.params["W"] = rng.uniform(-bound, bound, size=(in_dim, out_dim))
        self.params["b"] = np.zeros(out_dim)
        self.zero_grad()

    def forward(self, x):
        if x.shape[-1] != self.params["W"].shape[0]:
            raise ValueError(f"Dense expects width {self.params['W'].shape[0]}, "
                             f"got {x.shape[-1]}")
        self._x = x
        return _check("Dense", x @ self.params["W"] + self.params["b"])

    def backward(self, dy):
        x2 = self._x.reshape(-1, self._x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.grads["W"] += x2.T @ dy2
        self.grads["b"] += dy2.sum(axis=0)
        return dy @ self.params["W"].T


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class LeakyReLU(Layer):
    def __init__(self, alpha: float = 0.01):
        super().__init__()
        self.alpha = alpha

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, self.alpha * x)

    def backward(self, dy):
        return np.where(self._mask, dy, self.alpha * dy)


class Sigmoid(Layer):
    def forward(self, x):
        self._y = _sigmoid(x)
        return self._y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


class Softmax(Layer):
    """Standalone softmax; pair training with the fused cross-entropy loss
    instead of backpropagating through this layer."""

    def forward(self, x):
        self._y = softmax(x)
        return self._y

    def backward(self, dy):
        dot = np.sum(dy * self._y, axis=-1, keepdims=True)
        return self._y * (dy - dot)


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        super().__init__()
        self.layers = layers

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self):
        """Flat (name, params-dict, grads-dict, key) view, recursing into
        nested containers."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, params, grads, k in layer.parameters():
                out.append((f"layer{i}.{type(layer).__name__}.{name}",
                            params, grads, k))
        return out


class LSTM(Layer):
    """Full-sequence LSTM: (B, T, D) -> hidden states (B, T, H).

    Gate order i, f, g, o. Supports an explicit initial state so callers can
    carry state across consecutive chunks of one series (stateful contract).
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.in_dim = in_dim
        self.hidden = hidden
        bound = 1.0 / np.sqrt(in_dim + hidden)
        self.params["Wx"] = rng.uniform(-bound, bound, size=(in_dim, 4 * hidden))
        self.params["Wh"] = rng.uniform(-bound, bound, size=(hidden, 4 * hidden))
        self.params["b"] = np.zeros(4 * hidden)
        self.zero_grad()

    def forward(self, x, state: tuple[np.ndarray, np.ndarray] | None = None):
        B, T, D = x.shape
        if D != self.in_dim:
            raise ValueError(f"LSTM expects width {self.in_dim}, got {D}")
        H = self.hidden
        h = np.zeros((B, H)) if state is None else state[0].copy()
        c = np.zeros((B, H)) if state is None else state[1].copy()
        self._x = x
        self._cache = []
        self._h0c0 = (h.copy(), c.copy())
        hs = np.empty((B, T, H))
        Wx, Wh, b = self.params["Wx"], self.params["Wh"], self.params["b"]
        for t in range(T):
            z = x[:, t] @ Wx + h @ Wh + b
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t] = h
            self._cache.append((i, f, g, o, c_prev, tc, h))
        self.final_state = (h, c)
        return _check("LSTM", hs)

    def backward(self, dhs):
        B, T, H = dhs.shape
        x = self._x
        Wx, Wh = self.params["Wx"], self.params["Wh"]
        dx = np.empty_like(x)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            i, f, g, o, c_prev, tc, _h = self._cache[t]
            dh = dhs[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            h_prev = self._cache[t - 1][6] if t > 0 else self._h0c0[0]
            self.grads["Wx"] += x[:, t].T @ dz
            self.grads["Wh"] += h_prev.T @ dz
            self.grads["b"] += dz.sum(axis=0)
            dx[:, t] = dz @ Wx.T
            dh_next = dz @ Wh.T
            dc_next = dc * f
        return dx


def lstm_step(lstm: LSTM, x_t: np.ndarray, state: tuple[np.ndarray, np.ndarray]
              ) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """One recurrence step (inference); x_t is (B, D), state is (h, c)."""
    H = lstm.hidden
    h, c = state
    z = x_t @ lstm.params["Wx"] + h @ lstm.params["Wh"] + lstm.params["b"]
    i = _sigmoid(z[:, :H])
    f = _sigmoid(z[:, H:2 * H])
    g = np.tanh(z[:, 2 * H:3 * H])
    o = _sigmoid(z[:, 3 * H:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, (h_new, c_new)


class SequencePredictor(Layer):
    """LSTM followed by a dense readout applied at every time step."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int,
                 rng: np.random.Generator):
        super().__init__()
        self.lstm = LSTM(in_dim, hidden, rng)
        self.head = Dense(hidden, out_dim, rng)

    def forward(self, x, state=None):
        hs = self.lstm.forward(x, state=state)
        return self.head.forward(hs)

    def backward(self, dy):
        return self.lstm.backward(self.head.backward(dy))

    def zero_grad(self):
        self.lstm.zero_grad()
        self.head.zero_grad()

    def parameters(self):
        out = []
        for prefix, layer in (("lstm", self.lstm), ("head", self.head)):
            for k in layer.params:
                out.append((f"{prefix}.{k}", layer.params, layer.grads, k))
        return out

    @property
    def final_state(self):
        return self.lstm.final_state
