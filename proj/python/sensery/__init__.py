"""Sense-phrase tagging toolkit (Python bindings to the C++ core)."""

import json as _json

from ._core import (
    DivergenceError,
    Error,
    IoError,
    ParseError,
    Tagger,
    UndefinedAgreementError,
    ValidationError,
    bio_decode,
    bio_encode,
    cosine,
    fleiss_kappa,
    is_bio_valid,
    majority_yes,
    parse_alpha_grid,
    repair_bio,
    tokenize,
    train,
    write_synthetic_world,
)
from . import _core


def evaluate(tagger, conll):
    """Span precision/recall/F1 of `tagger` on a CoNLL file, as a dict."""
    return _json.loads(_core.evaluate(tagger, str(conll)))


def run_pipeline(config, run_dir):
    """Run the full pipeline from a config file; returns the report as a dict."""
    return _json.loads(_core.run_pipeline(str(config), str(run_dir)))


__all__ = [name for name in dir() if not name.startswith("_")]
