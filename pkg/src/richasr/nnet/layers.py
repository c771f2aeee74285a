"""Hand-rolled float64 layers: linear, LSTM, BiLSTM, embeddings, activations.

Every layer exposes a ``forward`` that returns its output plus an opaque
cache, and a ``backward`` that consumes the cache, accumulates parameter
gradients into the owning :class:`~richasr.nnet.params.ParamStore`, and
returns the gradient with respect to the layer inputs.  Nothing is stored
on the layer between calls, so independent sequences can be evaluated
concurrently as long as gradient accumulation is serialized.
"""

import math

import numpy as np

from ..errors import ContractViolation
from .params import ParamStore
from .rng import Rng


def logsumexp(values) -> float:
    """Overflow-safe log(sum(exp(v))); -inf iff every input is -inf."""
    vals = [float(v) for v in values]
    if not vals:
        raise ContractViolation("logsumexp of an empty sequence")
    m = max(vals)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in vals))


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.exp(log_softmax(x, axis=axis))


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    """log(1 / (1 + e^-x)), computed without overflow on either tail."""
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


class Linear:
    """y = x @ W (+ b) with parameters registered as ``<name>.W`` / ``<name>.b``."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 rng: Rng, bias: bool = True):
        self.store = store
        self.name = name
        self.d_in = d_in
        self.d_out = d_out
        self.W = store.glorot(f"{name}.W", (d_in, d_out), rng)
        self.b = store.zeros(f"{name}.b", (d_out,)) if bias else None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.d_in:
            raise ContractViolation(
                f"{self.name}: input width {x.shape[-1]} != {self.d_in}")
        out = x @ self.W.values
        if self.b is not None:
            out += self.b.values
        return out

    def backward(self, x: np.ndarray, d_out: np.ndarray) -> np.ndarray:
        if x.ndim == 1:
            self.W.grad += np.outer(x, d_out)
            if self.b is not None:
                self.b.grad += d_out
        else:
            self.W.grad += x.reshape(-1, self.d_in).T @ d_out.reshape(-1, self.d_out)
            if self.b is not None:
                self.b.grad += d_out.reshape(-1, self.d_out).sum(axis=0)
        return d_out @ self.W.values.T


class Embedding:
    """Token id -> row lookup into a (vocab, dim) table."""

    def __init__(self, store: ParamStore, name: str, vocab_size: int, dim: int, rng: Rng):
        self.store = store
        self.name = name
        self.dim = dim
        self.E = store.glorot(f"{name}.E", (vocab_size, dim), rng)

    def forward(self, ids) -> np.ndarray:
        return self.E.values[np.asarray(ids, dtype=np.intp)]

    def backward(self, ids, d_out: np.ndarray) -> None:
        np.add.at(self.E.grad, np.asarray(ids, dtype=np.intp), d_out)

    def grow(self, new_vocab_size: int, rng: Rng) -> None:
        """Append freshly initialized rows (vocabulary extension)."""
        old = self.E.values
        if new_vocab_size < old.shape[0]:
            raise ContractViolation("embedding tables never shrink")
        extra = new_vocab_size - old.shape[0]
        if extra == 0:
            return
        a = math.sqrt(6.0 / (new_vocab_size + self.dim))
        rows = rng.uniform(-a, a, (extra, self.dim))
        self.E.values = np.vstack([old, rows])
        self.E.grad = np.zeros_like(self.E.values)


class Lstm:
    """Single-direction LSTM; gates packed [input, forget, candidate, output].

    Parameters: ``<name>.W`` (d_in, 4H), ``<name>.U`` (H, 4H), ``<name>.b``
    (4H,).  The forget-gate bias block is initialized to +1.
    """

    def __init__(self, store: ParamStore, name: str, d_in: int, hidden: int, rng: Rng):
        self.store = store
        self.name = name
        self.d_in = d_in
        self.hidden = hidden
        self.W = store.glorot(f"{name}.W", (d_in, 4 * hidden), rng)
        self.U = store.glorot(f"{name}.U", (hidden, 4 * hidden), rng)
        self.b = store.zeros(f"{name}.b", (4 * hidden,))
        self.b.values[hidden:2 * hidden] = 1.0

    def step(self, x: np.ndarray, h: np.ndarray, c: np.ndarray):
        """One cell update; returns (h_next, c_next, cache)."""
        if x.shape[-1] != self.d_in or h.shape[-1] != self.hidden:
            raise ContractViolation(f"{self.name}: step dimension mismatch")
        H = self.hidden
        z = x @ self.W.values + h @ self.U.values + self.b.values
        i = sigmoid(z[:H])
        f = sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = sigmoid(z[3 * H:])
        c_next = f * c + i * g
        tc = np.tanh(c_next)
        h_next = o * tc
        return h_next, c_next, (x, h, c, i, f, g, o, tc)

    def step_backward(self, cache, d_h: np.ndarray, d_c: np.ndarray):
        """Returns (d_x, d_h_prev, d_c_prev); accumulates W/U/b grads."""
        x, h, c, i, f, g, o, tc = cache
        d_c_total = d_c + d_h * o * (1.0 - tc * tc)
        d_o = d_h * tc
        d_i = d_c_total * g
        d_f = d_c_total * c
        d_g = d_c_total * i
        dz = np.concatenate([
            d_i * i * (1.0 - i),
            d_f * f * (1.0 - f),
            d_g * (1.0 - g * g),
            d_o * o * (1.0 - o),
        ])
        self.W.grad += np.outer(x, dz)
        self.U.grad += np.outer(h, dz)
        self.b.grad += dz
        d_x = dz @ self.W.values.T
        d_h_prev = dz @ self.U.values.T
        d_c_prev = d_c_total * f
        return d_x, d_h_prev, d_c_prev

    def forward(self, xs: np.ndarray, reverse: bool = False):
        """Run over a (T, d_in) sequence from zero state.

        Output row t always corresponds to input frame t; with
        ``reverse=True`` the recursion runs from the last frame backwards.
        """
        T = xs.shape[0]
        hs = np.zeros((T, self.hidden))
        caches = [None] * T
        h = np.zeros(self.hidden)
        c = np.zeros(self.hidden)
        order = range(T - 1, -1, -1) if reverse else range(T)
        for t in order:
            h, c, caches[t] = self.step(xs[t], h, c)
            hs[t] = h
        return hs, caches

    def backward(self, d_hs: np.ndarray, caches, reverse: bool = False) -> np.ndarray:
        T = d_hs.shape[0]
        d_xs = np.zeros((T, self.d_in))
        d_h = np.zeros(self.hidden)
        d_c = np.zeros(self.hidden)
        order = range(T) if reverse else range(T - 1, -1, -1)
        for t in order:
            d_xs[t], d_h, d_c = self.step_backward(caches[t], d_h + d_hs[t], d_c)
        return d_xs


class BiLstm:
    """Forward and backward LSTMs; output frame t is [fwd_t, bwd_t]."""

    def __init__(self, store: ParamStore, name: str, d_in: int, hidden: int, rng: Rng):
        self.d_in = d_in
        self.hidden = hidden
        self.fwd = Lstm(store, f"{name}.fwd", d_in, hidden, rng)
        self.bwd = Lstm(store, f"{name}.bwd", d_in, hidden, rng)

    @property
    def d_out(self) -> int:
        return 2 * self.hidden

    def forward(self, xs: np.ndarray):
        if xs.ndim != 2 or xs.shape[0] < 1:
            raise ContractViolation("BiLSTM input must be a (T>=1, d) matrix")
        hs_f, cache_f = self.fwd.forward(xs)
        hs_b, cache_b = self.bwd.forward(xs, reverse=True)
        return np.concatenate([hs_f, hs_b], axis=1), (cache_f, cache_b)

    def backward(self, d_out: np.ndarray, cache) -> np.ndarray:
        cache_f, cache_b = cache
        H = self.hidden
        d_xs = self.fwd.backward(d_out[:, :H], cache_f)
        d_xs += self.bwd.backward(d_out[:, H:], cache_b, reverse=True)
        return d_xs
