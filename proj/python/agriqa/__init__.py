"""Python access to the agricultural QA agent core."""

import json

from . import _core
from ._core import (
    AgriQAError,
    KnowledgeGraph,
    VectorIndex,
    analyze,
    bleu,
    chunk_document,
    composite,
    gleu,
    manual_total,
    metric_tokens,
    predict_promoter_enrichment,
    rouge,
    score_pair,
)

__all__ = [
    "AgriQAError",
    "KnowledgeGraph",
    "System",
    "VectorIndex",
    "analyze",
    "bleu",
    "chunk_document",
    "composite",
    "error_code",
    "gleu",
    "manual_total",
    "metric_tokens",
    "predict_promoter_enrichment",
    "rouge",
    "score_pair",
]


def error_code(exc):
    """Stable snake_case code carried by an AgriQAError."""
    return exc.args[0] if exc.args else None


class System:
    """All modules wired together. Pass a config dict or rely on the data dir."""

    def __init__(self, config=None, data_dir=None):
        if config is None:
            config = json.loads(_core.System.default_config_json(data_dir or _core.System.default_data_dir()))
        self._impl = _core.System(json.dumps(config))

    def ask(self, question, session_id=""):
        return json.loads(self._impl.ask_json(question, session_id))

    def evaluate(self):
        return json.loads(self._impl.eval_json())

    def ingest_text(self, doc_id, text, source=""):
        return self._impl.ingest_text(doc_id, text, source)

    @property
    def tool_names(self):
        return list(self._impl.tool_names)
