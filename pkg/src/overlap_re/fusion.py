"""Title/knowledge fusion attention, representation fusion and the classifier.

The fused vector is ``[r_title; r_ins; r_tar1; r_tar2; r_know]``; ablating a
component drops its slots and narrows the classifier input accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import CPI, Instance, TaskSpec
from .encoder import Encoder, EncoderConfig, init_params
from .gaussian import GaussianConfig, pool, pooling_weights, span_distances
from .numerics import Tensor, add, concat, matmul, no_grad, reshape, softmax, transpose
from .tokenizer import SEQ_END, SEQ_START, Vocab, subword_instance, tokenize, tokenize_words

COMPONENTS = ("gaussian", "title", "knowledge")
SLOTS = ("title", "ins", "tar1", "tar2", "know")
_SLOT_OWNER = {"title": "title", "tar1": "gaussian", "tar2": "gaussian", "know": "knowledge"}


def fusion_attention(query_rep, token_reps, mask=None, return_weights: bool = False):
    """Unscaled dot-product attention of one query over the token representations.

    ``query_rep`` is ``[d]`` (or ``[B, d]``) and ``token_reps`` ``[N, d]``
    (or ``[B, N, d]``).  Positions where ``mask`` is False get weight 0.
    """
    q = query_rep if isinstance(query_rep, Tensor) else Tensor(query_rep)
    u = token_reps if isinstance(token_reps, Tensor) else Tensor(token_reps)
    if q.shape[-1] != u.shape[-1] or q.shape[:-1] != u.shape[:-2]:
        raise ValueError(f"fusion_attention: query {q.shape} does not fit token reps {u.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise ValueError("fusion_attention: every position is masked")
    n, d = u.shape[-2], u.shape[-1]
    scores = reshape(matmul(u, reshape(q, q.shape + (1,))), u.shape[:-1])
    alpha = softmax(scores, axis=-1, mask=mask)
    out = reshape(matmul(reshape(alpha, alpha.shape[:-1] + (1, n)), u), q.shape[:-1] + (d,))
    return (out, alpha) if return_weights else out


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig
    gaussian: GaussianConfig = GaussianConfig()
    num_labels: int = len(CPI.labels)
    ablate: tuple[str, ...] = ()
    share_encoder: bool = True

    def __post_init__(self):
        unknown = set(self.ablate) - set(COMPONENTS)
        if unknown:
            raise ValueError(f"unknown ablation component(s) {sorted(unknown)}; choose from {COMPONENTS}")
        object.__setattr__(self, "ablate", tuple(c for c in COMPONENTS if c in self.ablate))

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(s for s in SLOTS if _SLOT_OWNER.get(s) not in self.ablate)

    @property
    def fused_width(self) -> int:
        return len(self.slots) * self.encoder.hidden

    def uses(self, component: str) -> bool:
        return component not in self.ablate

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder.to_dict(),
            "gaussian": {
                "mu": self.gaussian.mu, "sigma": self.gaussian.sigma,
                "window": self.gaussian.window, "renormalize": self.gaussian.renormalize,
            },
            "num_labels": self.num_labels,
            "ablate": list(self.ablate),
            "share_encoder": self.share_encoder,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        return cls(
            encoder=EncoderConfig(**d["encoder"]),
            gaussian=GaussianConfig(**d["gaussian"]),
            num_labels=d["num_labels"],
            ablate=tuple(d["ablate"]),
            share_encoder=d["share_encoder"],
        )


def ablate(config: ModelConfig, components) -> ModelConfig:
    """Variant of ``config`` with the given components removed."""
    return replace(config, ablate=tuple(set(config.ablate) | set(components)))


@dataclass
class Example:
    """One featurized instance: id sequences framed by start/end tokens."""

    instance_id: str
    kind: str
    label: int
    ins_ids: list[int]
    span1: tuple[int, int]
    span2: tuple[int, int]
    title_ids: list[int]
    know_ids: list[int]


def featurize(
    instance: Instance,
    title: str,
    knowledge_tokens: list[str],
    vocab: Vocab,
    task: TaskSpec = CPI,
    max_len: int | None = None,
) -> Example:
    if not instance.tokens:
        raise ValueError(f"instance {instance.instance_id} has no tokens")
    sub = subword_instance(instance, vocab)

    def frame(pieces):
        return vocab.encode([SEQ_START, *pieces, SEQ_END])

    ins_ids = frame(sub.tokens)
    title_ids = frame(tokenize(title, vocab))
    know_ids = frame(tokenize_words(knowledge_tokens, vocab)[0])
    if max_len is not None:
        for what, ids in (("instance", ins_ids), ("title", title_ids), ("knowledge", know_ids)):
            if len(ids) > max_len:
                raise ValueError(
                    f"{what} sequence of instance {instance.instance_id} has {len(ids)} "
                    f"tokens, more than max_len {max_len}"
                )
    shift = lambda s: (s[0] + 1, s[1] + 1)
    return Example(
        instance_id=instance.instance_id,
        kind=instance.kind,
        label=task.label_index(instance.label),
        ins_ids=ins_ids,
        span1=shift(sub.target1_span),
        span2=shift(sub.target2_span),
        title_ids=title_ids,
        know_ids=know_ids,
    )


@dataclass
class Batch:
    ins_ids: np.ndarray
    ins_mask: np.ndarray
    token_mask: np.ndarray
    distances1: np.ndarray
    distances2: np.ndarray
    title_ids: np.ndarray
    title_mask: np.ndarray
    know_ids: np.ndarray
    know_mask: np.ndarray
    labels: np.ndarray
    examples: list[Example] = field(repr=False, default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)


def _pad(seqs: list[list[int]], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    n = max(len(s) for s in seqs)
    ids = np.full((len(seqs), n), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), n), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


def collate(examples: list[Example], pad_id: int) -> Batch:
    ins_ids, ins_mask = _pad([e.ins_ids for e in examples], pad_id)
    title_ids, title_mask = _pad([e.title_ids for e in examples], pad_id)
    know_ids, know_mask = _pad([e.know_ids for e in examples], pad_id)
    token_mask = np.zeros_like(ins_mask)
    d1 = np.zeros(ins_ids.shape, dtype=np.int64)
    d2 = np.zeros(ins_ids.shape, dtype=np.int64)
    for i, e in enumerate(examples):
        m = len(e.ins_ids) - 2
        token_mask[i, 1 : m + 1] = True
        # distances over the instance tokens only; framing and padding get weight 0 later
        d1[i, 1 : m + 1] = span_distances(m, (e.span1[0] - 1, e.span1[1] - 1))
        d2[i, 1 : m + 1] = span_distances(m, (e.span2[0] - 1, e.span2[1] - 1))
    return Batch(
        ins_ids, ins_mask, token_mask, d1, d2, title_ids, title_mask, know_ids, know_mask,
        np.array([e.label for e in examples], dtype=np.int64), examples,
    )


@dataclass
class FusedRepresentations:
    parts: dict[str, Tensor]
    h: Tensor

    def __getattr__(self, name):
        key = name[2:] if name.startswith("r_") else name
        parts = self.__dict__.get("parts", {})
        if key in parts:
            return parts[key]
        raise AttributeError(name)


class RelationModel:
    """Shared encoder, Gaussian pooling, fusion attention and a softmax head."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        enc_cfg = config.encoder
        tensors = init_params(enc_cfg, rng, "encoder")
        self.encoder = Encoder(enc_cfg, tensors, "encoder")
        self.title_encoder = self.know_encoder = self.encoder
        if not config.share_encoder:
            if config.uses("title"):
                extra = init_params(enc_cfg, rng, "title_encoder")
                tensors.update(extra)
                self.title_encoder = Encoder(enc_cfg, extra, "title_encoder")
            if config.uses("knowledge"):
                extra = init_params(enc_cfg, rng, "know_encoder")
                tensors.update(extra)
                self.know_encoder = Encoder(enc_cfg, extra, "know_encoder")
        width = config.fused_width
        tensors["classifier.weight"] = Tensor(
            rng.normal(0.0, 1.0 / np.sqrt(width), size=(config.num_labels, width)),
            requires_grad=True, name="classifier.weight",
        )
        tensors["classifier.bias"] = Tensor(np.zeros(config.num_labels), requires_grad=True, name="classifier.bias")
        self.params = tensors
        if params is not None:
            self.load_state(params)

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load_state(self, params: dict[str, np.ndarray]) -> None:
        if set(params) != set(self.params):
            missing = sorted(set(self.params) - set(params))
            extra = sorted(set(params) - set(self.params))
            raise ValueError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for k, t in self.params.items():
            if params[k].shape != t.shape:
                raise ValueError(f"parameter {k}: shape {params[k].shape} != {t.shape}")
            t.data[...] = params[k]

    def represent(self, batch: Batch, rng: np.random.Generator | None = None) -> FusedRepresentations:
        cfg = self.config
        ins = self.encoder.encode(batch.ins_ids, batch.ins_mask, rng)
        u = ins.token_reps
        parts: dict[str, Tensor] = {"ins": ins.seq_rep}
        if cfg.uses("title"):
            q_t = self.title_encoder.encode(batch.title_ids, batch.title_mask, rng).seq_rep
            parts["title"] = fusion_attention(q_t, u, batch.token_mask)
        if cfg.uses("gaussian"):
            parts["tar1"] = pool(pooling_weights(batch.distances1, cfg.gaussian, batch.token_mask), u)
            parts["tar2"] = pool(pooling_weights(batch.distances2, cfg.gaussian, batch.token_mask), u)
        if cfg.uses("knowledge"):
            q_k = self.know_encoder.encode(batch.know_ids, batch.know_mask, rng).seq_rep
            parts["know"] = fusion_attention(q_k, u, batch.token_mask)
        ordered = {s: parts[s] for s in cfg.slots}
        h = concat(list(ordered.values()), axis=-1)
        return FusedRepresentations(ordered, h)

    def logits(self, batch: Batch, rng: np.random.Generator | None = None) -> Tensor:
        h = self.represent(batch, rng).h
        w, b = self.params["classifier.weight"], self.params["classifier.bias"]
        return add(matmul(h, transpose(w)), b)

    def predict_proba(self, examples: list[Example], pad_id: int, batch_size: int = 64) -> np.ndarray:
        out = []
        with no_grad():
            for start in range(0, len(examples), batch_size):
                batch = collate(examples[start : start + batch_size], pad_id)
                out.append(softmax(self.logits(batch), axis=-1).data)
        if not out:
            return np.zeros((0, self.config.num_labels))
        return np.concatenate(out, axis=0)


def forward(example: Example, model: RelationModel, pad_id: int = 0) -> np.ndarray:
    """Label probabilities for a single example."""
    return model.predict_proba([example], pad_id)[0]


class SequenceClassifier:
    """Encoder plus a linear head on the sequence representation, built directly."""

    def __init__(self, encoder_config: EncoderConfig, num_labels: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.params = init_params(encoder_config, rng, "encoder")
        self.encoder = Encoder(encoder_config, self.params, "encoder")
        d = encoder_config.hidden
        self.params["head.weight"] = Tensor(rng.normal(0.0, 1.0 / np.sqrt(d), size=(num_labels, d)), requires_grad=True)
        self.params["head.bias"] = Tensor(np.zeros(num_labels), requires_grad=True)

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def logits(self, ids, mask=None) -> Tensor:
        seq = self.encoder.encode(ids, mask).seq_rep
        return add(matmul(seq, transpose(self.params["head.weight"])), self.params["head.bias"])
