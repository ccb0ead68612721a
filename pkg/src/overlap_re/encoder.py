"""Compact post-norm transformer encoder.

Input ids are ``[N]`` or batched ``[B, N]``; the first position is expected to
hold the sequence-start token, whose final state is the sequence summary.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .numerics import (
    Tensor,
    add,
    dropout,
    embedding,
    gelu,
    getitem,
    layer_norm,
    matmul,
    reshape,
    scale,
    softmax,
    transpose,
)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    ffn: int = 256
    max_len: int = 128
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden % self.heads:
            raise ValueError(f"hidden size {self.hidden} is not divisible by {self.heads} heads")
        if self.vocab_size < 1 or self.max_len < 1 or self.layers < 0:
            raise ValueError(f"invalid encoder config {self}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EncodedSequence:
    token_reps: Tensor
    seq_rep: Tensor
    attention_mask: np.ndarray


def init_params(cfg: EncoderConfig, rng: np.random.Generator, prefix: str = "encoder") -> dict[str, Tensor]:
    d, f = cfg.hidden, cfg.ffn

    def uniform(*shape):
        return rng.uniform(-0.05, 0.05, size=shape)

    def proj(fan_in, fan_out):
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))

    raw = {
        "tok_emb": uniform(cfg.vocab_size, d),
        "pos_emb": uniform(cfg.max_len, d),
    }
    for layer in range(cfg.layers):
        p = f"layer{layer}."
        for name in ("q", "k", "v", "o"):
            raw[p + f"w_{name}"] = proj(d, d)
            # a key bias shifts every score of a query equally, so it is left out
            if name != "k":
                raw[p + f"b_{name}"] = np.zeros(d)
        raw[p + "ln1.gain"] = np.ones(d)
        raw[p + "ln1.bias"] = np.zeros(d)
        raw[p + "w_ff1"] = proj(d, f)
        raw[p + "b_ff1"] = np.zeros(f)
        raw[p + "w_ff2"] = proj(f, d)
        raw[p + "b_ff2"] = np.zeros(d)
        raw[p + "ln2.gain"] = np.ones(d)
        raw[p + "ln2.bias"] = np.zeros(d)
    return {f"{prefix}.{k}": Tensor(v, requires_grad=True, name=f"{prefix}.{k}") for k, v in raw.items()}


class Encoder:
    def __init__(self, cfg: EncoderConfig, params: dict[str, Tensor], prefix: str = "encoder"):
        self.cfg = cfg
        self.prefix = prefix
        self.params = params
        # called as hook(layer_index, attention_probs) during encode
        self.attention_hook: Callable[[int, np.ndarray], None] | None = None

    @classmethod
    def create(cls, cfg: EncoderConfig, rng: np.random.Generator, prefix: str = "encoder") -> Encoder:
        return cls(cfg, init_params(cfg, rng, prefix), prefix)

    def _p(self, name: str) -> Tensor:
        return self.params[f"{self.prefix}.{name}"]

    def _check_ids(self, ids: np.ndarray) -> None:
        n = ids.shape[-1]
        if n > self.cfg.max_len:
            raise ValueError(f"sequence length {n} exceeds max_len {self.cfg.max_len}")
        if n == 0:
            raise ValueError("empty sequence")
        if ids.min() < 0 or ids.max() >= self.cfg.vocab_size:
            raise ValueError(f"token id out of range for vocabulary of {self.cfg.vocab_size}")

    def embed(self, token_ids, positions=None) -> Tensor:
        """Token embedding plus learned position embedding."""
        ids = np.asarray(token_ids, dtype=np.int64)
        self._check_ids(ids)
        if positions is None:
            positions = np.broadcast_to(np.arange(ids.shape[-1]), ids.shape)
        positions = np.asarray(positions, dtype=np.int64)
        if positions.max() >= self.cfg.max_len:
            raise ValueError(f"position {positions.max()} exceeds max_len {self.cfg.max_len}")
        return add(embedding(self._p("tok_emb"), ids), embedding(self._p("pos_emb"), positions))

    def encode(self, token_ids, mask=None, rng: np.random.Generator | None = None) -> EncodedSequence:
        """Run the attention stack.  Passing ``rng`` switches dropout on."""
        ids = np.asarray(token_ids, dtype=np.int64)
        single = ids.ndim == 1
        if single:
            ids = ids[None, :]
            mask = None if mask is None else np.asarray(mask, dtype=bool)[None, :]
        self._check_ids(ids)
        mask = np.ones(ids.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != ids.shape:
            raise ValueError(f"mask shape {mask.shape} differs from ids shape {ids.shape}")
        if not mask.any(axis=-1).all():
            raise ValueError("every position of a sequence is masked")

        cfg = self.cfg
        rate = cfg.dropout
        b, n = ids.shape
        h, dh = cfg.heads, cfg.hidden // cfg.heads
        key_mask = mask[:, None, None, :]

        x = dropout(self.embed(ids), rate, rng)
        for layer in range(cfg.layers):
            p = f"layer{layer}."

            def heads_of(t):
                return transpose(reshape(t, (b, n, h, dh)), (0, 2, 1, 3))

            q = heads_of(add(matmul(x, self._p(p + "w_q")), self._p(p + "b_q")))
            k = heads_of(matmul(x, self._p(p + "w_k")))
            v = heads_of(add(matmul(x, self._p(p + "w_v")), self._p(p + "b_v")))
            scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
            probs = softmax(scores, axis=-1, mask=key_mask)
            if self.attention_hook is not None:
                self.attention_hook(layer, probs.data)
            ctx = reshape(transpose(matmul(probs, v), (0, 2, 1, 3)), (b, n, cfg.hidden))
            attn = add(matmul(ctx, self._p(p + "w_o")), self._p(p + "b_o"))
            x = layer_norm(add(x, dropout(attn, rate, rng)), self._p(p + "ln1.gain"), self._p(p + "ln1.bias"))
            ff = gelu(add(matmul(x, self._p(p + "w_ff1")), self._p(p + "b_ff1")))
            ff = add(matmul(ff, self._p(p + "w_ff2")), self._p(p + "b_ff2"))
            x = layer_norm(add(x, dropout(ff, rate, rng)), self._p(p + "ln2.gain"), self._p(p + "ln2.bias"))

        seq = getitem(x, (slice(None), 0))
        if single:
            return EncodedSequence(reshape(x, (n, cfg.hidden)), reshape(seq, (cfg.hidden,)), mask[0])
        return EncodedSequence(x, seq, mask)
