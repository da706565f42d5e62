"""Leakage-safe populism scoring of political speeches (C++ core)."""

import json as _json
import os as _os

from . import _core
from ._core import PopfracError, auroc, classify, normalize_text, split_sentences

DEFAULT_SPARSITY_COUNTS = list(_core.DEFAULT_SPARSITY_COUNTS)
MODEL_CACHE_ENV = _core.MODEL_CACHE_ENV

__all__ = [
    "PopfracError",
    "auroc",
    "classification_metrics",
    "classify",
    "evaluate",
    "fit_model",
    "fit_stump",
    "normalize_text",
    "render_report",
    "run_pipeline",
    "sparsity",
    "split_sentences",
    "synth",
]


def _config(config):
    return "" if config is None else _json.dumps(config)


def classification_metrics(tp, fp, fn, tn):
    return _json.loads(_core.classification_metrics(tp, fp, fn, tn))


def fit_stump(fractions, labels, runs=100, seed=0, deterministic=False):
    return _json.loads(_core.fit_stump(list(fractions), list(labels), runs, seed, deterministic))


def synth(out, preset="desk", seed=0, noise=0.0):
    """Writes a synthetic corpus into `out`; returns the corpus name."""
    return _core.synth(preset, seed, _os.fspath(out), noise)


def run_pipeline(corpus, training, corpus_name="", backend="lexical_baseline", config=None,
                 unit_kind="term", seed=0, match_threshold=0.8, workers=1):
    """Per-unit leave-out training and scoring. The result carries a
    `leakage_violations` count from the post-hoc audit."""
    return _json.loads(_core.run_pipeline(_os.fspath(corpus), _os.fspath(training), corpus_name, backend,
                                          _config(config), unit_kind, seed, match_threshold, workers))


def evaluate(predictions, mode="bootstrap", runs=100, seed=0):
    return _json.loads(_core.evaluate(_json.dumps(predictions), mode, runs, seed))


def fit_model(training, model_dir, backend="lexical_baseline", config=None, seed=0):
    _core.fit_model(_os.fspath(training), _os.fspath(model_dir), backend, _config(config), seed)


def sparsity(training, counts=None, backend="lexical_baseline", config=None, seed=0, workers=1):
    counts = DEFAULT_SPARSITY_COUNTS if counts is None else list(counts)
    return _json.loads(_core.sparsity(_os.fspath(training), counts, backend, _config(config), seed, workers))


def render_report(artifacts):
    """Returns [(file name, content)], report.md first."""
    return _core.render_report([_json.dumps(a) for a in artifacts])
