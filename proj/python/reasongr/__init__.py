"""Python bindings for the reasongr generative-retrieval core."""

import json

from . import _core
from ._core import (
    COT_INSTRUCTIONS,
    TASK_TEMPLATES,
    Bm25Index,
    ConfigError,
    DimensionError,
    IoError,
    ParseError,
    ReasonGRError,
    SchemaError,
    TrainingError,
    UniquenessError,
    cross_entropy,
    penalty_factor,
    quantize_roundtrip,
)

__all__ = [
    "COT_INSTRUCTIONS",
    "TASK_TEMPLATES",
    "Bm25Index",
    "ConfigError",
    "DimensionError",
    "IoError",
    "ParseError",
    "ReasonGRError",
    "SchemaError",
    "TrainingError",
    "UniquenessError",
    "build_registry",
    "compose_prompt",
    "cross_entropy",
    "evaluate",
    "flatten_table",
    "normalize_corpus",
    "penalty_factor",
    "quantize_roundtrip",
    "query",
    "score",
    "synthetic_corpus",
    "train",
]


def _dump(docs):
    return docs if isinstance(docs, str) else json.dumps(docs)


def synthetic_corpus(documents=50, companies=0, seed=7):
    """FinQA-shaped synthetic documents as a list of dicts."""
    return json.loads(_core.synthetic_corpus(documents, companies, seed))


def normalize_corpus(docs):
    """Validates a corpus and returns it in canonical form."""
    return json.loads(_core.normalize_corpus(_dump(docs)))


def flatten_table(docs, index):
    """Header-attached segments of document `index`'s table."""
    return _core.flatten_table(_dump(docs), index)


def build_registry(docs, keywords_per_docid=3):
    """Ordered (raw_id, docid surface) pairs."""
    return [tuple(pair) for pair in json.loads(_core.build_registry(_dump(docs), keywords_per_docid))]


def score(pred, gold):
    """EM, PM, SM and S for two docid component lists (or hyphenated surfaces)."""
    if isinstance(pred, str):
        pred = pred.split("-")
    if isinstance(gold, str):
        gold = gold.split("-")
    em, pm, sm, s = _core.score(list(pred), list(gold))
    return {"em": em, "pm": pm, "sm": sm, "s": s}


def compose_prompt(query, mode="plain", seed=0, examples=()):
    """Returns (prompt text, template id, cot id or None)."""
    return _core.compose_prompt(query, mode, seed, list(examples))


def _config_text(config):
    if isinstance(config, str):
        return config
    lines = []
    for key, value in config.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def train(docs, checkpoint_path, config=None):
    """Trains adapters, saves the best checkpoint and returns the epoch log."""
    return json.loads(_core.train(_dump(docs), _config_text(config or {}), str(checkpoint_path)))


def evaluate(checkpoint_path, split="test", mode="plain", beam=1):
    """Aggregate metrics and per-query records for one split."""
    return json.loads(_core.evaluate(str(checkpoint_path), split, mode, beam))


def query(checkpoint_path, text, mode="plain", beam=1):
    """Returns (reasoning trace, docid surface) for a free-form query."""
    return _core.query(str(checkpoint_path), text, mode, beam)
