"""Chemical-protein relation extraction with Gaussian positional pooling and fusion attention."""

from .corpus import (
    CPI,
    DDI,
    AnnotatedDocument,
    EntityMention,
    GoldRelation,
    Instance,
    corpus_stats,
    generate_instances,
    parse_corpus,
)
from .evaluation import EvalReport, micro_prf, stratified_eval
from .fusion import ModelConfig, RelationModel, fusion_attention
from .gaussian import GaussianConfig, gaussian_cdf, target_aware_pool, window_prob
from .kb import KnowledgeSequence, build_knowledge_sequence, load_kb, shortest_dependency_path
from .tokenizer import Vocab, build_vocab, tokenize

__version__ = "0.1.0"

__all__ = [
    "CPI",
    "DDI",
    "AnnotatedDocument",
    "EntityMention",
    "EvalReport",
    "GaussianConfig",
    "GoldRelation",
    "Instance",
    "KnowledgeSequence",
    "ModelConfig",
    "RelationModel",
    "Vocab",
    "build_knowledge_sequence",
    "build_vocab",
    "corpus_stats",
    "fusion_attention",
    "gaussian_cdf",
    "generate_instances",
    "load_kb",
    "micro_prf",
    "parse_corpus",
    "shortest_dependency_path",
    "stratified_eval",
    "target_aware_pool",
    "tokenize",
    "window_prob",
]
