"""Gradient audit: every differentiable op, then the whole model loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncoderConfig
from .fusion import ModelConfig, RelationModel, collate, featurize, fusion_attention
from .corpus import CPI, Instance
from .gaussian import GaussianConfig, pool, pooling_weights
from .kb import KnowledgeSequence
from .numerics import (
    Tensor,
    add,
    concat,
    cross_entropy,
    embedding,
    exp,
    gelu,
    getitem,
    grad_check,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    reshape,
    softmax,
    softmax_cross_entropy,
    split,
    sub,
    tanh,
    tensor_sum,
    transpose,
)
from .tokenizer import RESERVED, Vocab

OP_TOLERANCE = 1e-5
MODEL_TOLERANCE = 1e-4


@dataclass
class AuditResult:
    op_errors: dict[str, float]
    model_error: float

    @property
    def max_op_error(self) -> float:
        return max(self.op_errors.values())

    @property
    def passed(self) -> bool:
        return self.max_op_error <= OP_TOLERANCE and self.model_error <= MODEL_TOLERANCE

    def render(self) -> str:
        lines = [f"{name:<24} {err:.3e}" for name, err in self.op_errors.items()]
        lines.append(f"{'max op error':<24} {self.max_op_error:.3e} (tolerance {OP_TOLERANCE:g})")
        lines.append(f"{'full model loss':<24} {self.model_error:.3e} (tolerance {MODEL_TOLERANCE:g})")
        lines.append(f"max relative error: {max(self.max_op_error, self.model_error):.3e}")
        return "\n".join(lines) + "\n"


def _weighted(out: Tensor, w: np.ndarray) -> Tensor:
    # a fixed random projection keeps every output coordinate in play
    return tensor_sum(mul(out, Tensor(w)))


def op_cases(rng: np.random.Generator) -> dict[str, tuple]:
    """name -> (scalar function, input tensors) on random shapes up to 8x8."""
    def t(*shape, low=-1.0, high=1.0):
        return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)

    def w(*shape):
        return rng.normal(size=shape)

    m, n, k = (int(v) for v in rng.integers(2, 9, size=3))
    gold = rng.integers(0, n, size=m)
    mask = rng.random((m, n)) < 0.7
    mask[:, 0] = True
    idx = rng.integers(0, m, size=5)
    wa, wb, wc = w(m, n), w(m, k), w(m, 2 * n)
    w5, wm, wn, wk, we = w(5, n), w(m), w(n), w(k), w(2, 2, n)
    return {
        "add": (lambda a, b: _weighted(add(a, b), wa), [t(m, n), t(n)]),
        "sub": (lambda a, b: _weighted(sub(a, b), wa), [t(m, n), t(m, n)]),
        "mul": (lambda a, b: _weighted(mul(a, b), wa), [t(m, n), t(m, 1)]),
        "exp": (lambda a: _weighted(exp(a), wa), [t(m, n)]),
        "log": (lambda a: _weighted(log(a), wa), [t(m, n, low=0.5, high=2.0)]),
        "tanh": (lambda a: _weighted(tanh(a), wa), [t(m, n)]),
        "gelu": (lambda a: _weighted(gelu(a), wa), [t(m, n, low=-3, high=3)]),
        "matmul": (lambda a, b: _weighted(matmul(a, b), wb), [t(m, n), t(n, k)]),
        "transpose": (lambda a: _weighted(transpose(a), wa.T), [t(m, n)]),
        "reshape": (lambda a: _weighted(reshape(a, (n, m)), wa.reshape(n, m)), [t(m, n)]),
        "getitem": (lambda a: _weighted(getitem(a, idx), w5), [t(m, n)]),
        "sum": (lambda a: _weighted(tensor_sum(a, axis=1), wm), [t(m, n)]),
        "mean": (lambda a: _weighted(mean(a, axis=0), wn), [t(m, n)]),
        "concat": (lambda a, b: _weighted(concat([a, b], axis=-1), wc), [t(m, n), t(m, n)]),
        "split": (lambda a: _weighted(split(a, [n, n], axis=-1)[1], wa), [t(m, 2 * n)]),
        "embedding": (lambda a: _weighted(embedding(a, np.array([[0, 2], [1, 1]])), we), [t(3, n)]),
        "softmax": (lambda a: _weighted(softmax(a, axis=-1), wa), [t(m, n, low=-3, high=3)]),
        "softmax_masked": (lambda a: _weighted(softmax(a, axis=-1, mask=mask), wa), [t(m, n)]),
        "log_softmax": (lambda a: _weighted(log_softmax(a, axis=-1), wa), [t(m, n)]),
        "layer_norm": (
            lambda a, g, b: _weighted(layer_norm(a, g, b), wa),
            [t(m, n, low=-2, high=2), t(n, low=0.5, high=1.5), t(n)],
        ),
        "cross_entropy": (
            lambda a, b: cross_entropy(softmax(matmul(a, b), axis=-1), np.arange(4) % 4),
            [t(4, 4), t(4, 4)],
        ),
        "softmax_cross_entropy": (lambda a: softmax_cross_entropy(a, gold), [t(m, n, low=-3, high=3)]),
        "fusion_attention": (
            lambda q, u: _weighted(fusion_attention(q, u, mask[0]), wk),
            [t(k), t(n, k)],
        ),
        "gaussian_pool": (
            lambda u: _weighted(
                pool(pooling_weights(np.arange(n) - n // 2, GaussianConfig()), u), wk
            ),
            [t(n, k)],
        ),
    }


def toy_model(seed: int = 0, layers: int = 2, hidden: int = 32):
    """A small model and a batch holding one 3-token instance."""
    words = ["binds", "binding", "study", "receptor"]
    vocab = Vocab(list(RESERVED) + words)
    inst = Instance("toy", ["@CHEMICAL$", "binds", "@GENE$"], (0, 0), (2, 2), "CPR:4", "normal", "toy")
    know = KnowledgeSequence(["CPR:4"], ["@CHEMICAL$", "binds", "@GENE$"])
    example = featurize(inst, "receptor binding study", know.tokens, vocab, CPI)
    cfg = ModelConfig(
        EncoderConfig(len(vocab), layers=layers, hidden=hidden, heads=4, ffn=2 * hidden, max_len=16, dropout=0.0)
    )
    model = RelationModel(cfg, seed=seed)
    # move away from the initial point, where embeddings are tiny, biases zero
    # and many gradients sit at rounding-noise level
    rng = np.random.default_rng([seed, 99])
    for name, t in model.params.items():
        if name.endswith("_emb"):
            t.data[...] = rng.normal(0.0, 1.0, size=t.shape)
        else:
            t.data += rng.normal(0.0, 0.1, size=t.shape)
    return model, collate([example], vocab.pad_id)


def model_error(seed: int = 0, max_coords: int | None = 24) -> float:
    model, batch = toy_model(seed)
    params = list(model.params.values())

    def loss(*_):
        return softmax_cross_entropy(model.logits(batch), batch.labels)

    return grad_check(loss, params, h=1e-5, max_coords=max_coords, seed=seed)


def run_audit(seed: int = 0, max_coords: int | None = 24) -> AuditResult:
    rng = np.random.default_rng(seed)
    errors = {name: grad_check(f, inputs) for name, (f, inputs) in op_cases(rng).items()}
    return AuditResult(errors, model_error(seed, max_coords))
