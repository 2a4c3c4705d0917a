"""Micro encoder-decoder translation model.

One pre-norm transformer block on each side: the encoder self-attends over
the concatenated "context [SEP] current" source, the decoder runs causal
self-attention plus cross-attention over the encoder states, so every
context token can influence every output position.  Training minimizes a
weighted negative log-likelihood: per example the weighted token losses
are summed, then averaged over the examples in the batch.

All math is float64 on a small autodiff tape; training is deterministic
per (config, seed, dataset order).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    ConfigurationError,
    DomainError,
    InputError,
    LengthError,
    ShapeError,
    TrainingDivergedError,
)

__all__ = [
    "ModelConfig",
    "ModelState",
    "init",
    "forward_logprobs",
    "forward_logprobs_batch",
    "token_weight",
    "weighted_nll",
    "train",
    "decode",
    "greedy_decode_batch",
    "split_on_separator",
    "sequence_logprob",
    "save_checkpoint",
    "load_checkpoint",
]

_PAD_ID = 0
_BOS_ID = 1
_EOS_ID = 2
_MASK_BIAS = -1e9

# Independent rng streams derived from the config seed.
_STREAM_INIT = 0
_STREAM_ORDER = 1
_STREAM_TRANSFORM = 2


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_width: int = 32
    hidden_width: int = 64
    n_heads: int = 4
    max_len: int = 96
    learning_rate: float = 3e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 1
    lam: float = 0.0
    optimizer: str = "adam"
    adam_beta2: float = 0.98
    grad_clip: float = 1.0  # 0 disables clipping
    warmup_steps: int = 0
    dtype: str = "float64"  # float64 for gradient checks, float32 for speed

    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def validate(self) -> None:
        if self.vocab_size <= 0:
            raise ConfigurationError("vocab_size must be positive")
        if self.embed_width <= 0 or self.hidden_width <= 0 or self.n_heads <= 0:
            raise ConfigurationError("widths and head count must be positive")
        if self.embed_width % self.n_heads != 0:
            raise ConfigurationError("embed_width must be divisible by n_heads")
        if self.max_len <= 0:
            raise ConfigurationError("max_len must be positive")
        if self.lam < 0:
            raise ConfigurationError("lam must be >= 0")
        if self.epochs < 0 or self.batch_size <= 0:
            raise ConfigurationError("epochs must be >= 0 and batch_size positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigurationError(f"unknown dtype {self.dtype!r}")


@dataclass
class ModelState:
    """Learnable parameters plus training counters and optimizer moments."""

    params: dict[str, Tensor]
    config: ModelConfig
    step: int = 0
    epochs_done: int = 0
    opt_m: dict[str, np.ndarray] = field(default_factory=dict)
    opt_v: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "ModelState":
        return ModelState(
            params={k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.params.items()},
            config=self.config,
            step=self.step,
            epochs_done=self.epochs_done,
            opt_m={k: v.copy() for k, v in self.opt_m.items()},
            opt_v={k: v.copy() for k, v in self.opt_v.items()},
        )

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p.data)):
                raise TrainingDivergedError(f"non-finite values in parameter {name!r}")


def _linear_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    return rng.standard_normal(shape) / np.sqrt(fan_in)


def init(config: ModelConfig) -> ModelState:
    """Initialize parameters; deterministic per (config, seed)."""
    config.validate()
    rng = np.random.default_rng((config.seed, _STREAM_INIT))
    d, h, v, L = config.embed_width, config.hidden_width, config.vocab_size, config.max_len
    dtype = config.np_dtype()

    params: dict[str, np.ndarray] = {
        "src_emb": 0.1 * rng.standard_normal((v, d)),
        "tgt_emb": 0.1 * rng.standard_normal((v, d)),
        "src_pos": 0.1 * rng.standard_normal((L, d)),
        "tgt_pos": 0.1 * rng.standard_normal((L, d)),
    }

    def attn_block(prefix: str) -> None:
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{prefix}_{name}"] = _linear_init(rng, d, (d, d))

    def ff_block(prefix: str) -> None:
        params[f"{prefix}_w1"] = _linear_init(rng, d, (d, h))
        params[f"{prefix}_b1"] = np.zeros(h)
        params[f"{prefix}_w2"] = _linear_init(rng, h, (h, d))
        params[f"{prefix}_b2"] = np.zeros(d)

    def ln_block(prefix: str) -> None:
        params[f"{prefix}_g"] = np.ones(d)
        params[f"{prefix}_b"] = np.zeros(d)

    ln_block("enc_ln1")
    attn_block("enc_attn")
    ln_block("enc_ln2")
    ff_block("enc_ff")

    ln_block("dec_ln1")
    attn_block("dec_self")
    ln_block("dec_ln2")
    attn_block("dec_cross")
    ln_block("dec_ln3")
    ff_block("dec_ff")

    ln_block("out_ln")
    params["out_w"] = _linear_init(rng, d, (d, v))
    params["out_b"] = np.zeros(v)

    tensors = {k: Tensor(p.astype(dtype), requires_grad=True) for k, p in params.items()}
    return ModelState(params=tensors, config=config)


# --- forward pass ---------------------------------------------------------


def _multi_head_attention(
    params: dict[str, Tensor],
    prefix: str,
    q_in: Tensor,
    kv_in: Tensor,
    bias: np.ndarray,
    n_heads: int,
) -> Tensor:
    B, Tq, D = q_in.shape
    Tk = kv_in.shape[1]
    dk = D // n_heads

    def heads(x: Tensor, w: Tensor, T: int) -> Tensor:
        proj = ad.matmul(x, w)
        return ad.transpose(ad.reshape(proj, (B, T, n_heads, dk)), (0, 2, 1, 3))

    q = heads(q_in, params[f"{prefix}_wq"], Tq)
    k = heads(kv_in, params[f"{prefix}_wk"], Tk)
    v = heads(kv_in, params[f"{prefix}_wv"], Tk)

    scale = np.asarray(1.0 / np.sqrt(dk), dtype=q_in.data.dtype)
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), scale)
    attn = ad.softmax(ad.add(scores, bias))
    mixed = ad.matmul(attn, v)
    merged = ad.reshape(ad.transpose(mixed, (0, 2, 1, 3)), (B, Tq, D))
    return ad.matmul(merged, params[f"{prefix}_wo"])


def _feed_forward(params: dict[str, Tensor], prefix: str, x: Tensor) -> Tensor:
    hidden = ad.relu(ad.add(ad.matmul(x, params[f"{prefix}_w1"]), params[f"{prefix}_b1"]))
    return ad.add(ad.matmul(hidden, params[f"{prefix}_w2"]), params[f"{prefix}_b2"])


def _pad_bias(ids: np.ndarray, dtype) -> np.ndarray:
    """(B, 1, 1, T) additive bias masking [PAD] key positions."""
    return np.where(ids == _PAD_ID, _MASK_BIAS, 0.0)[:, None, None, :].astype(dtype)


def _causal_bias(T: int, dtype) -> np.ndarray:
    return np.triu(np.full((T, T), _MASK_BIAS, dtype=dtype), k=1)[None, None, :, :]


def _encode_source(params: dict[str, Tensor], src: np.ndarray, n_heads: int) -> tuple[Tensor, np.ndarray]:
    B, S = src.shape
    src_bias = _pad_bias(src, params["src_emb"].data.dtype)
    x = ad.add(ad.embedding(params["src_emb"], src), ad.embedding(params["src_pos"], np.arange(S)))
    normed = ad.layer_norm(x, params["enc_ln1_g"], params["enc_ln1_b"])
    x = ad.add(x, _multi_head_attention(params, "enc_attn", normed, normed, src_bias, n_heads))
    normed = ad.layer_norm(x, params["enc_ln2_g"], params["enc_ln2_b"])
    x = ad.add(x, _feed_forward(params, "enc_ff", normed))
    return x, src_bias


def _forward(params: dict[str, Tensor], src: np.ndarray, tgt_in: np.ndarray, n_heads: int) -> Tensor:
    """Log-probabilities (B, T, V) for predicting the token after each prefix."""
    enc_out, src_bias = _encode_source(params, src, n_heads)
    B, T = tgt_in.shape
    causal = _causal_bias(T, params["tgt_emb"].data.dtype)

    y = ad.add(ad.embedding(params["tgt_emb"], tgt_in), ad.embedding(params["tgt_pos"], np.arange(T)))
    normed = ad.layer_norm(y, params["dec_ln1_g"], params["dec_ln1_b"])
    y = ad.add(y, _multi_head_attention(params, "dec_self", normed, normed, causal, n_heads))
    normed = ad.layer_norm(y, params["dec_ln2_g"], params["dec_ln2_b"])
    y = ad.add(y, _multi_head_attention(params, "dec_cross", normed, enc_out, src_bias, n_heads))
    normed = ad.layer_norm(y, params["dec_ln3_g"], params["dec_ln3_b"])
    y = ad.add(y, _feed_forward(params, "dec_ff", normed))

    final = ad.layer_norm(y, params["out_ln_g"], params["out_ln_b"])
    logits = ad.add(ad.matmul(final, params["out_w"]), params["out_b"])
    return ad.log_softmax(logits)


def _check_lengths(config: ModelConfig, src_ids, tgt_ids=None) -> None:
    if len(src_ids) > config.max_len:
        raise LengthError(f"source length {len(src_ids)} exceeds max_len {config.max_len}")
    if tgt_ids is not None and len(tgt_ids) > config.max_len:
        raise LengthError(f"target length {len(tgt_ids)} exceeds max_len {config.max_len}")


def forward_logprobs(state: ModelState, src_ids, tgt_ids) -> np.ndarray:
    """Teacher-forced log-probability matrix, one row per predicted position.

    Row ``j`` is the normalized distribution over candidates for
    ``tgt_ids[j + 1]`` given ``tgt_ids[0..j]`` and the full source.
    """
    src = np.asarray(src_ids, dtype=np.int64)
    tgt = np.asarray(tgt_ids, dtype=np.int64)
    _check_lengths(state.config, src, tgt)
    if len(tgt) < 2:
        raise ShapeError("target must hold at least [BOS] plus one token")
    logp = _forward(state.params, src[None, :], tgt[None, :-1], state.config.n_heads)
    return logp.data[0]


def forward_logprobs_batch(
    state: ModelState, batch_src: list[np.ndarray], batch_tgt: list[np.ndarray]
) -> list[np.ndarray]:
    """Teacher-forced rows for many examples at once (padded internally)."""
    src, tgt_in, targets, _ = _pad_batch(state.config, batch_src, batch_tgt, None)
    logp = _forward(state.params, src, tgt_in, state.config.n_heads)
    return [logp.data[i, : len(batch_tgt[i]) - 1] for i in range(len(batch_src))]


def token_weight(is_dependent: bool, lam: float) -> float:
    """Loss weight of one target token: 1 + lam if context-dependent, else 1."""
    if lam < 0:
        raise DomainError("lam must be >= 0")
    return 1.0 + lam if is_dependent else 1.0


def weighted_nll(logprobs: np.ndarray, tgt_ids, weights) -> float:
    """Weighted negative log-likelihood summed over predicted positions."""
    logprobs = np.asarray(logprobs)
    tgt = np.asarray(tgt_ids, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != logprobs.shape[0]:
        raise ShapeError(
            f"{len(weights)} weights for {logprobs.shape[0]} predicted positions"
        )
    if len(tgt) != logprobs.shape[0] + 1:
        raise ShapeError(
            f"target length {len(tgt)} does not match {logprobs.shape[0]} rows"
        )
    gold = logprobs[np.arange(len(weights)), tgt[1:]]
    return float(-(weights * gold).sum())


# --- training -------------------------------------------------------------


def _pad_batch(config: ModelConfig, batch_src, batch_tgt, batch_weights):
    B = len(batch_src)
    S = max(len(s) for s in batch_src)
    T = max(len(t) for t in batch_tgt)
    if S > config.max_len or T > config.max_len:
        raise LengthError(f"batch sequence length exceeds max_len {config.max_len}")
    src = np.full((B, S), _PAD_ID, dtype=np.int64)
    tgt_in = np.full((B, T - 1), _PAD_ID, dtype=np.int64)
    targets = np.full((B, T - 1), _PAD_ID, dtype=np.int64)
    weights = np.zeros((B, T - 1), dtype=np.float64)
    for i, (s, t) in enumerate(zip(batch_src, batch_tgt)):
        src[i, : len(s)] = s
        tgt_in[i, : len(t) - 1] = t[:-1]
        targets[i, : len(t) - 1] = t[1:]
        if batch_weights is not None:
            weights[i, : len(t) - 1] = batch_weights[i]
    return src, tgt_in, targets, weights


def _batch_loss(state: ModelState, batch) -> Tensor:
    src, tgt_in, targets, weights = _pad_batch(
        state.config,
        [e.src_ids for e in batch],
        [e.tgt_ids for e in batch],
        [e.weights for e in batch],
    )
    logp = _forward(state.params, src, tgt_in, state.config.n_heads)
    return ad.picked_nll(logp, targets, weights)


def _apply_update(state: ModelState, config: ModelConfig) -> None:
    state.step += 1
    lr = config.learning_rate
    if config.warmup_steps and state.step <= config.warmup_steps:
        lr *= state.step / config.warmup_steps
    if config.grad_clip:
        sq = 0.0
        for p in state.params.values():
            if p.grad is not None:
                sq += float((p.grad**2).sum())
        norm = np.sqrt(sq)
        if norm > config.grad_clip:
            scale = config.grad_clip / norm
            for p in state.params.values():
                if p.grad is not None:
                    p.grad *= scale
    if config.optimizer == "sgd":
        for name in sorted(state.params):
            p = state.params[name]
            if p.grad is not None:
                p.data -= lr * p.grad
                p.grad = None
        return
    beta1, beta2, eps = 0.9, config.adam_beta2, 1e-8
    t = state.step
    for name in sorted(state.params):
        p = state.params[name]
        if p.grad is None:
            continue
        if name not in state.opt_m:
            state.opt_m[name] = np.zeros_like(p.data)
            state.opt_v[name] = np.zeros_like(p.data)
        m = state.opt_m[name]
        v = state.opt_v[name]
        m *= beta1
        m += (1 - beta1) * p.grad
        v *= beta2
        v += (1 - beta2) * p.grad**2
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad = None


def train(state: ModelState, dataset, config: ModelConfig, per_example_transform=None) -> ModelState:
    """Mini-batch gradient descent on the weighted NLL; returns a new state.

    ``per_example_transform(encoded, rng) -> encoded`` is re-applied to the
    pristine dataset each epoch with fresh randomness.  Epoch seeds derive
    from the running epoch counter, so continuing a trained state replays
    exactly the epochs a longer run would have used.
    """
    config.validate()
    if not dataset:
        raise InputError("training dataset is empty")
    state = state.copy()
    for _ in range(config.epochs):
        epoch = state.epochs_done
        order_rng = np.random.default_rng((config.seed, _STREAM_ORDER, epoch))
        transform_rng = np.random.default_rng((config.seed, _STREAM_TRANSFORM, epoch))
        order = order_rng.permutation(len(dataset))
        for start in range(0, len(dataset), config.batch_size):
            batch = [dataset[i] for i in order[start : start + config.batch_size]]
            if per_example_transform is not None:
                batch = [per_example_transform(e, transform_rng) for e in batch]
            loss = _batch_loss(state, batch)
            if not np.isfinite(loss.data):
                raise TrainingDivergedError(
                    f"non-finite loss at step {state.step} (epoch {epoch})"
                )
            ad.backward(loss)
            _apply_update(state, config)
        state.epochs_done += 1
        state.check_finite()
    return state


# --- decoding -------------------------------------------------------------


def _strip_decoded(tokens: list[int]) -> list[int]:
    if tokens and tokens[-1] == _EOS_ID:
        tokens = tokens[:-1]
    return tokens


def greedy_decode_batch(state: ModelState, batch_src, max_chunk: int = 256) -> list[list[int]]:
    """Greedy decoding over many sources; equivalent to decode(beam_width=1)."""
    results: list[list[int]] = []
    for start in range(0, len(batch_src), max_chunk):
        chunk = [np.asarray(s, dtype=np.int64) for s in batch_src[start : start + max_chunk]]
        results.extend(_greedy_chunk(state, chunk))
    return results


def _greedy_chunk(state: ModelState, chunk: list[np.ndarray]) -> list[list[int]]:
    config = state.config
    for s in chunk:
        _check_lengths(config, s)
    B = len(chunk)
    S = max(len(s) for s in chunk)
    src = np.full((B, S), _PAD_ID, dtype=np.int64)
    for i, s in enumerate(chunk):
        src[i, : len(s)] = s
    tgt = np.full((B, 1), _BOS_ID, dtype=np.int64)
    finished = np.zeros(B, dtype=bool)
    while tgt.shape[1] < config.max_len and not finished.all():
        logp = _forward(state.params, src, tgt, config.n_heads)
        next_ids = logp.data[:, -1, :].argmax(axis=-1)
        next_ids = np.where(finished, _PAD_ID, next_ids)
        tgt = np.concatenate([tgt, next_ids[:, None]], axis=1)
        finished |= next_ids == _EOS_ID
    out = []
    for i in range(B):
        tokens = []
        for t in tgt[i, 1:]:
            tokens.append(int(t))
            if t == _EOS_ID:
                break
        out.append(_strip_decoded(tokens))
    return out


def _sequence_score(state: ModelState, src: np.ndarray, generated: list[int]) -> float:
    """Model log-probability of the generated tokens (EOS appended)."""
    tgt = np.array([_BOS_ID] + generated + [_EOS_ID], dtype=np.int64)
    logp = forward_logprobs(state, src, tgt)
    return float(logp[np.arange(len(tgt) - 1), tgt[1:]].sum())


def decode(state: ModelState, src_ids, beam_width: int) -> list[int]:
    """Translate one source; beam_width=1 is greedy.

    Returns generated ids without [BOS] and without the terminal [EOS].
    The returned hypothesis never scores below the greedy one.
    """
    if beam_width < 1:
        raise DomainError("beam_width must be >= 1")
    src = np.asarray(src_ids, dtype=np.int64)
    _check_lengths(state.config, src)
    greedy = _greedy_chunk(state, [src])[0]
    if beam_width == 1:
        return greedy

    config = state.config
    # Hypotheses: (tokens after BOS, summed logprob, finished).
    beams: list[tuple[list[int], float, bool]] = [([], 0.0, False)]
    for _ in range(config.max_len - 1):
        candidates: list[tuple[list[int], float, bool]] = []
        any_open = False
        for tokens, score, finished in beams:
            if finished:
                candidates.append((tokens, score, True))
                continue
            any_open = True
            tgt = np.array([_BOS_ID] + tokens, dtype=np.int64)
            logp = _forward(state.params, src[None, :], tgt[None, :], config.n_heads)
            row = logp.data[0, -1, :]
            top = np.argsort(-row, kind="stable")[:beam_width]
            for token_id in top:
                token_id = int(token_id)
                candidates.append(
                    (tokens + [token_id], score + float(row[token_id]), token_id == _EOS_ID)
                )
        if not any_open:
            break
        candidates.sort(key=lambda c: (-c[1], c[0]))
        beams = candidates[:beam_width]

    finished = [c for c in beams if c[2]] or beams
    best_tokens, best_score, _ = max(finished, key=lambda c: c[1])
    best = _strip_decoded(list(best_tokens))
    if _sequence_score(state, src, greedy) > best_score:
        return greedy
    return best


def split_on_separator(token_seq, separator):
    """Subsequence after the final separator; whole sequence if none."""
    tokens = list(token_seq)
    for i in range(len(tokens) - 1, -1, -1):
        if tokens[i] == separator:
            return tokens[i + 1 :]
    return tokens


def sequence_logprob(state: ModelState, src_ids, tgt_ids, from_index: int = 1) -> float:
    """Sum of gold-token log-probabilities for positions >= from_index."""
    tgt = np.asarray(tgt_ids, dtype=np.int64)
    if not 1 <= from_index < len(tgt):
        raise InputError(f"from_index {from_index} outside 1..{len(tgt) - 1}")
    logp = forward_logprobs(state, src_ids, tgt)
    rows = np.arange(from_index - 1, len(tgt) - 1)
    return float(logp[rows, tgt[from_index:]].sum())


# --- checkpoints ----------------------------------------------------------


def save_checkpoint(state: ModelState, path: str | Path) -> None:
    """Self-describing npz: config snapshot, counters, parameter arrays."""
    meta = {
        "config": dataclasses.asdict(state.config),
        "step": state.step,
        "epochs_done": state.epochs_done,
    }
    arrays = {f"param/{k}": v.data for k, v in state.params.items()}
    arrays |= {f"opt_m/{k}": v for k, v in state.opt_m.items()}
    arrays |= {f"opt_v/{k}": v for k, v in state.opt_v.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path: str | Path) -> ModelState:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        params = {}
        opt_m = {}
        opt_v = {}
        for key in data.files:
            if key.startswith("param/"):
                params[key[6:]] = Tensor(data[key], requires_grad=True)
            elif key.startswith("opt_m/"):
                opt_m[key[6:]] = np.array(data[key])
            elif key.startswith("opt_v/"):
                opt_v[key[6:]] = np.array(data[key])
    config = ModelConfig(**meta["config"])
    return ModelState(
        params=params,
        config=config,
        step=meta["step"],
        epochs_done=meta["epochs_done"],
        opt_m=opt_m,
        opt_v=opt_v,
    )
