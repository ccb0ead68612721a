"""Training configuration and the mini-batch training loop."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .corpus import TASKS
from .encoder import EncoderConfig
from .evaluation import micro_prf
from .fusion import COMPONENTS, Example, ModelConfig, RelationModel, collate
from .gaussian import GaussianConfig
from .numerics import AdamState, adam_step, softmax_cross_entropy

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    seed: int = 7
    task: str = "cpi"
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    ffn: int = 256
    max_len: int = 128
    dropout: float = 0.1
    mu: float = 0.0
    sigma: float = 3.0
    window: int = 1
    renormalize: bool = False
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 30
    patience: int = 5
    ablation: tuple[str, ...] = ()
    share_encoder: bool = True
    vocab_max_size: int = 2000
    vocab_min_freq: int = 2

    # config-file keys for the grouped fields
    KEYS = {
        "encoder.layers": "layers", "encoder.hidden": "hidden", "encoder.heads": "heads",
        "encoder.ffn": "ffn", "encoder.max_len": "max_len", "encoder.dropout": "dropout",
        "gaussian.mu": "mu", "gaussian.sigma": "sigma", "gaussian.window": "window",
        "gaussian.renormalize": "renormalize",
        "optimizer.lr": "lr", "optimizer.beta1": "beta1", "optimizer.beta2": "beta2",
        "optimizer.eps": "eps",
        "vocab.max_size": "vocab_max_size", "vocab.min_freq": "vocab_min_freq",
    }

    def __post_init__(self):
        if isinstance(self.ablation, str):
            self.ablation = tuple(a.strip() for a in self.ablation.split(",") if a.strip())
        unknown = set(self.ablation) - set(COMPONENTS)
        if unknown:
            raise ValueError(f"unknown ablation component(s) {sorted(unknown)}; choose from {COMPONENTS}")
        self.ablation = tuple(c for c in COMPONENTS if c in self.ablation)
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {sorted(TASKS)}, got {self.task!r}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValueError("batch_size, patience must be >= 1 and max_epochs >= 0")
        if self.lr < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.lr}")

    @classmethod
    def from_file(cls, path, **overrides) -> TrainConfig:
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, raw = (part.strip() for part in line.split("=", 1))
                name = cls.KEYS.get(key, key)
                if name not in {f.name for f in fields(cls)}:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                values[name] = _parse_value(raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablation"] = list(self.ablation)
        return d

    @property
    def task_spec(self):
        return TASKS[self.task]

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            encoder=EncoderConfig(
                vocab_size=vocab_size, layers=self.layers, hidden=self.hidden, heads=self.heads,
                ffn=self.ffn, max_len=self.max_len, dropout=self.dropout,
            ),
            gaussian=GaussianConfig(self.mu, self.sigma, self.window, self.renormalize),
            num_labels=len(self.task_spec.labels),
            ablate=self.ablation,
            share_encoder=self.share_encoder,
        )


def _parse_value(raw: str):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_P: float
    dev_R: float
    dev_F: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainResult:
    model: RelationModel
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_f: float = 0.0


def batch_loss(model: RelationModel, examples: list[Example], pad_id: int, rng=None):
    batch = collate(examples, pad_id)
    return softmax_cross_entropy(model.logits(batch, rng), batch.labels)


def dataset_loss(model: RelationModel, examples: list[Example], pad_id: int, batch_size: int = 64) -> float:
    """Mean cross-entropy over ``examples`` in evaluation mode."""
    total = 0.0
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        total += batch_loss(model, chunk, pad_id).item() * len(chunk)
    return total / len(examples)


def evaluate_f(model: RelationModel, examples: list[Example], pad_id: int, positive: list[int]):
    probs = model.predict_proba(examples, pad_id)
    preds = probs.argmax(axis=1).tolist()
    return micro_prf(preds, [e.label for e in examples], positive)


def train(
    train_set: list[Example],
    dev_set: list[Example],
    config: TrainConfig,
    vocab_size: int,
    pad_id: int,
) -> TrainResult:
    """Adam on cross-entropy, seeded shuffling, early stopping on dev micro-F.

    The returned model holds the parameters of the best dev epoch (the last
    epoch when there is no dev set).  A learning rate of 0 freezes the model.
    """
    if not train_set:
        raise ValueError("empty training set")
    task = config.task_spec
    positive = [task.label_index(lab) for lab in task.positive_labels]
    model = RelationModel(config.model_config(vocab_size), seed=config.seed)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    opt = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)

    result = TrainResult(model)
    best_state = model.state()
    best_f = -1.0
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), config.batch_size):
            chunk = [train_set[i] for i in order[start : start + config.batch_size]]
            loss = batch_loss(model, chunk, pad_id, dropout_rng)
            for t in model.params.values():
                t.zero_grad()
            loss.backward()
            losses.append(loss.item() * len(chunk))
            if config.lr > 0:
                grads = {k: t.grad for k, t in model.params.items() if t.grad is not None}
                adam_step({k: t.data for k, t in model.params.items()}, grads, opt)
        train_loss = sum(losses) / len(train_set)
        if dev_set:
            p, r, f = evaluate_f(model, dev_set, pad_id, positive)
        else:
            p = r = f = 0.0
        record = EpochRecord(epoch, train_loss, p, r, f)
        result.log.append(record)
        log.info("epoch %d loss %.4f dev P %.4f R %.4f F %.4f", epoch, train_loss, p, r, f)
        if not dev_set or f > best_f:
            best_f, best_state, stale = f, model.state(), 0
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                log.info("early stop after epoch %d (best %d)", epoch, result.best_epoch)
                break
    model.load_state(best_state)
    result.best_dev_f = max(best_f, 0.0)
    return result
