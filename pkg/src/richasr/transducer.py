"""RNN transducer: encoder + prediction network + joint, loss, greedy decode.

The transducer emits one symbol per lattice step: a blank consumes the next
encoder frame, a label advances along the target.  The sequence probability
marginalizes every monotonic alignment through the T x (U+1) grid, with the
final blank at node (T-1, U) closing each alignment.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NonFiniteLossError
from .nnet import BiLstm, Embedding, Linear, Lstm, ParamStore, Rng, log_softmax

BLANK_SYMBOL = "<blank>"


@dataclass(frozen=True)
class Vocab:
    """Output symbol table: blank + character symbols + optional tag symbols."""

    symbols: tuple[str, ...]
    blank_id: int = 0
    tag_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ContractViolation("vocabulary symbols must be unique")
        if not 0 <= self.blank_id < len(self.symbols):
            raise ContractViolation("blank_id outside the symbol table")
        for t in self.tag_ids:
            if not 0 <= t < len(self.symbols) or t == self.blank_id:
                raise ContractViolation("tag ids must be valid non-blank symbols")

    @classmethod
    def from_symbols(cls, characters) -> "Vocab":
        return cls(symbols=(BLANK_SYMBOL, *characters), blank_id=0)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def id_of(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ContractViolation(f"unknown symbol {symbol!r}") from None

    def encode(self, tokens) -> list[int]:
        return [self.id_of(tok) for tok in tokens]

    def render(self, ids) -> str:
        """Space-joined surface form (blank never appears in decodes)."""
        return " ".join(self.symbols[i] for i in ids)

    def is_tag(self, token_id: int) -> bool:
        return token_id in self.tag_ids


@dataclass
class RnntLattice:
    """Per-utterance alignment grid and its forward/backward variables."""

    logits: np.ndarray        # (T, U+1, V)
    alpha: np.ndarray         # (T, U+1) log-prob of reaching each node
    beta: np.ndarray          # (T, U+1) log-prob of completing from each node
    total_logprob: float      # log P(target | features), alpha-derived
    logit_grads: np.ndarray   # d(-total_logprob) / d logits

    @property
    def beta_total(self) -> float:
        return float(self.beta[0, 0])


def _lse2(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def rnnt_lattice(logits: np.ndarray, targets, blank_id: int) -> RnntLattice:
    """Forward-backward pass over the alignment lattice.

    ``logits[t, u]`` scores the symbol emitted from node (t, u): the blank
    moves to (t+1, u), the label ``targets[u]`` moves to (t, u+1).  Returns
    the lattice with -log P gradients w.r.t. the raw logits, obtained from
    the node/edge occupancies  occ(t,u) = exp(alpha + beta - total).
    """
    T, Up1, V = logits.shape
    U = Up1 - 1
    if len(targets) != U:
        raise ContractViolation("logits grid does not match target length")
    if any(y == blank_id for y in targets):
        raise ContractViolation("targets must not contain the blank symbol")

    log_probs = log_softmax(logits, axis=-1)
    lpb = log_probs[:, :, blank_id].tolist()
    lpy = [[log_probs[t, u, targets[u]] for u in range(U)] for t in range(T)]

    alpha = [[0.0] * Up1 for _ in range(T)]
    for t in range(1, T):
        alpha[t][0] = alpha[t - 1][0] + lpb[t - 1][0]
    for u in range(1, Up1):
        alpha[0][u] = alpha[0][u - 1] + lpy[0][u - 1]
    for t in range(1, T):
        for u in range(1, Up1):
            alpha[t][u] = _lse2(alpha[t - 1][u] + lpb[t - 1][u],
                                alpha[t][u - 1] + lpy[t][u - 1])
    total = alpha[T - 1][U] + lpb[T - 1][U]

    beta = [[0.0] * Up1 for _ in range(T)]
    beta[T - 1][U] = lpb[T - 1][U]
    for t in range(T - 2, -1, -1):
        beta[t][U] = lpb[t][U] + beta[t + 1][U]
    for u in range(U - 1, -1, -1):
        beta[T - 1][u] = lpy[T - 1][u] + beta[T - 1][u + 1]
    for t in range(T - 2, -1, -1):
        for u in range(U - 1, -1, -1):
            beta[t][u] = _lse2(lpb[t][u] + beta[t + 1][u],
                               lpy[t][u] + beta[t][u + 1])

    alpha = np.array(alpha)
    beta = np.array(beta)
    if not math.isfinite(total):
        raise NonFiniteLossError(f"non-finite lattice log-probability ({total})")

    # Edge occupancies: gamma(t,u,k) = P(paths using edge (t,u,k)) / P(total).
    occ = np.exp(alpha + beta - total)
    beta_blank = np.full((T, Up1), -np.inf)
    beta_blank[:T - 1, :] = beta[1:, :]
    beta_blank[T - 1, U] = 0.0
    gamma_blank = np.exp(alpha + log_probs[:, :, blank_id] + beta_blank - total)
    grads = np.exp(log_probs) * occ[:, :, None]
    grads[:, :, blank_id] -= gamma_blank
    for u in range(U):
        gamma_label = np.exp(alpha[:, u] + log_probs[:, u, targets[u]]
                             + beta[:, u + 1] - total)
        grads[:, u, targets[u]] -= gamma_label

    return RnntLattice(logits=logits, alpha=alpha, beta=beta,
                       total_logprob=float(total), logit_grads=grads)


class RnntModel:
    """Bidirectional encoder, unidirectional prediction network, tanh joint."""

    def __init__(self, store: ParamStore, vocab: Vocab, feature_dim: int = 16,
                 encoder_layers: int = 2, encoder_hidden: int = 32,
                 predictor_hidden: int = 32, predictor_embed: int = 16,
                 joint_hidden: int = 32, rng: Rng | None = None):
        if rng is None:
            rng = Rng(0)
        self.store = store
        self.vocab = vocab
        self.feature_dim = feature_dim
        self.encoder_hidden = encoder_hidden
        self.predictor_hidden = predictor_hidden
        self.predictor_embed = predictor_embed
        self.joint_hidden = joint_hidden
        self.encode_calls = 0

        self.encoder = []
        d_in = feature_dim
        for i in range(encoder_layers):
            layer = BiLstm(store, f"encoder.l{i}", d_in, encoder_hidden, rng)
            self.encoder.append(layer)
            d_in = layer.d_out
        self.encoder_out_dim = d_in

        self.embed = Embedding(store, "predictor.embed", vocab.size,
                               predictor_embed, rng)
        self.predictor = Lstm(store, "predictor.lstm", predictor_embed,
                              predictor_hidden, rng)
        # joint.enc carries the combiner's single additive bias term
        self.joint_enc = Linear(store, "joint.enc", self.encoder_out_dim,
                                joint_hidden, rng)
        self.joint_pred = Linear(store, "joint.pred", predictor_hidden,
                                 joint_hidden, rng, bias=False)
        self.out = Linear(store, "joint.out", joint_hidden, vocab.size, rng)

    # ---- encoder ----

    def encode(self, frames: np.ndarray) -> np.ndarray:
        """Frame-level embeddings, reusable by the joint and the LID head."""
        enc, _ = self.encode_with_cache(frames)
        return enc

    def encode_with_cache(self, frames: np.ndarray):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.feature_dim:
            raise ContractViolation(
                f"feature width {frames.shape[-1]} does not match model "
                f"input width {self.feature_dim}")
        self.encode_calls += 1
        x = frames
        caches = []
        for layer in self.encoder:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def encoder_backward(self, d_enc: np.ndarray, caches) -> None:
        d = d_enc
        for layer, cache in zip(reversed(self.encoder), reversed(caches)):
            d = layer.backward(d, cache)

    # ---- prediction network ----

    def predictor_inputs(self, targets) -> np.ndarray:
        """Embedded label history; row 0 is the zero start-of-sequence input."""
        U = len(targets)
        xs = np.zeros((U + 1, self.predictor_embed))
        if U:
            xs[1:] = self.embed.forward(list(targets))
        return xs

    def predictor_states(self, targets):
        xs = self.predictor_inputs(targets)
        hs, caches = self.predictor.forward(xs)
        return hs, (caches, list(targets))

    def predictor_backward(self, d_pred: np.ndarray, cache) -> None:
        caches, targets = cache
        d_xs = self.predictor.backward(d_pred, caches)
        if targets:
            self.embed.backward(targets, d_xs[1:])

    # ---- joint ----

    def joint(self, enc: np.ndarray, pred: np.ndarray):
        ep = self.joint_enc.forward(enc)        # (T, J)
        pp = self.joint_pred.forward(pred)      # (U+1, J)
        h = np.tanh(ep[:, None, :] + pp[None, :, :])
        logits = h @ self.out.W.values + self.out.b.values
        return logits, (enc, pred, h)

    def joint_backward(self, d_logits: np.ndarray, cache):
        enc, pred, h = cache
        J, V = self.out.W.shape
        flat_h = h.reshape(-1, J)
        flat_dl = d_logits.reshape(-1, V)
        self.out.W.grad += flat_h.T @ flat_dl
        self.out.b.grad += flat_dl.sum(axis=0)
        dz = (d_logits @ self.out.W.values.T) * (1.0 - h * h)
        d_ep = dz.sum(axis=1)
        d_pp = dz.sum(axis=0)
        d_enc = self.joint_enc.backward(enc, d_ep)
        d_pred = self.joint_pred.backward(pred, d_pp)
        return d_enc, d_pred

    # ---- vocabulary growth (tag extension over a trained model) ----

    def extend_output_vocab(self, vocab: Vocab, rng: Rng) -> None:
        if vocab.symbols[:self.vocab.size] != self.vocab.symbols:
            raise ContractViolation("extended vocabulary must append symbols")
        self.embed.grow(vocab.size, rng)
        old_w, old_b = self.out.W.values, self.out.b.values
        extra = vocab.size - old_w.shape[1]
        if extra:
            a = math.sqrt(6.0 / (self.joint_hidden + vocab.size))
            cols = rng.uniform(-a, a, (self.joint_hidden, extra))
            self.out.W.values = np.hstack([old_w, cols])
            self.out.W.grad = np.zeros_like(self.out.W.values)
            self.out.b.values = np.concatenate([old_b, np.zeros(extra)])
            self.out.b.grad = np.zeros_like(self.out.b.values)
            self.out.d_out = vocab.size
        self.vocab = vocab


def rnnt_loss(model: RnntModel, frames: np.ndarray, targets):
    """-log P(targets | frames) and its gradient w.r.t. the joint logits."""
    enc, _ = model.encode_with_cache(frames)
    pred, _ = model.predictor_states(targets)
    logits, _ = model.joint(enc, pred)
    lat = rnnt_lattice(logits, list(targets), model.vocab.blank_id)
    return -lat.total_logprob, lat.logit_grads


def loss_and_param_grads(model: RnntModel, frames: np.ndarray, targets,
                         scale: float = 1.0) -> float:
    """Full backward pass; accumulates scaled gradients into the store."""
    enc, enc_cache = model.encode_with_cache(frames)
    pred, pred_cache = model.predictor_states(targets)
    logits, joint_cache = model.joint(enc, pred)
    lat = rnnt_lattice(logits, list(targets), model.vocab.blank_id)
    d_enc, d_pred = model.joint_backward(lat.logit_grads * scale, joint_cache)
    model.predictor_backward(d_pred, pred_cache)
    model.encoder_backward(d_enc, enc_cache)
    return -lat.total_logprob


def greedy_decode(model: RnntModel, enc: np.ndarray,
                  max_symbols_per_frame: int = 4) -> list[int]:
    """Frame-synchronous argmax decoding; ties resolve to the lowest id."""
    if max_symbols_per_frame < 1:
        raise ContractViolation("max_symbols_per_frame must be >= 1")
    blank = model.vocab.blank_id
    h = np.zeros(model.predictor_hidden)
    c = np.zeros(model.predictor_hidden)
    h, c, _ = model.predictor.step(np.zeros(model.predictor_embed), h, c)
    pred_proj = model.joint_pred.forward(h)
    enc_proj = model.joint_enc.forward(enc)
    out_w, out_b = model.out.W.values, model.out.b.values
    emitted: list[int] = []
    for t in range(enc.shape[0]):
        for _ in range(max_symbols_per_frame):
            logits = np.tanh(enc_proj[t] + pred_proj) @ out_w + out_b
            k = int(np.argmax(logits))
            if k == blank:
                break
            emitted.append(k)
            h, c, _ = model.predictor.step(model.embed.E.values[k], h, c)
            pred_proj = model.joint_pred.forward(h)
    return emitted


def train_step(model: RnntModel, batch, lr: float, freeze=None) -> float:
    """One SGD step on the batch-mean loss; returns the pre-update mean loss.

    ``batch`` is a list of (frames, target id list).  Gradients accumulate
    in utterance order; frozen entries (per the glob ``freeze`` patterns,
    when given) are left untouched bit-for-bit.
    """
    if lr <= 0:
        raise ContractViolation("learning rate must be positive")
    if not batch:
        raise ContractViolation("empty training batch")
    store = model.store
    store.zero_grads()
    scale = 1.0 / len(batch)
    total = 0.0
    for i, (frames, targets) in enumerate(batch):
        try:
            loss = loss_and_param_grads(model, frames, targets, scale=scale)
        except NonFiniteLossError as e:
            store.zero_grads()
            raise NonFiniteLossError(str(e), utterance_index=i) from None
        if not math.isfinite(loss):
            store.zero_grads()
            raise NonFiniteLossError(
                f"non-finite loss {loss}", utterance_index=i)
        total += loss
    if freeze is not None:
        store.set_frozen(freeze)
    store.sgd_step(lr)
    store.zero_grads()
    return total * scale
