"""Versioned JSON files for models and preprocessed corpora.

Floats are written with ``repr`` precision, so ``load(save(x))`` restores
every table and weight bit for bit and re-saving yields identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .corpus import Lexicon, RawSentence, Sentence
from .errors import ModelFormatError
from .model import DmvParams, ValenceConfig
from .neural import NeuralConfig, NeuralModel

MODEL_FORMAT = "lndmv-model"
MODEL_VERSION = 1
CORPUS_FORMAT = "lndmv-corpus"
CORPUS_VERSION = 1


def _arr(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(d):
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


@dataclass
class ModelBundle:
    lexicon: Lexicon
    params: DmvParams
    neural: Optional[NeuralModel] = None
    meta: Optional[dict] = None

    @property
    def vcfg(self):
        return self.params.vcfg


def _neural_to_dict(model: NeuralModel):
    names = sorted(model.weights)
    return {
        "config": model.cfg.to_dict(),
        "valence": {"Vc": model.vcfg.Vc, "Vd": model.vcfg.Vd},
        "token_tag": model.token_tag.tolist(),
        "n_tags": model.T,
        "weights": {k: _arr(model.weights[k]) for k in names},
        "velocity": {k: _arr(model.velocity[k]) for k in names},
        "rng": model.rng.bit_generator.state,
    }


def _neural_from_dict(d):
    cfg_fields = {f.name for f in fields(NeuralConfig)}
    cfg = NeuralConfig(**{k: v for k, v in d["config"].items() if k in cfg_fields})
    model = NeuralModel.__new__(NeuralModel)
    model.cfg = cfg
    model.vcfg = ValenceConfig(**d["valence"])
    model.token_tag = np.array(d["token_tag"], dtype=np.int64)
    model.m = len(model.token_tag)
    model.T = int(d["n_tags"])
    model.weights = {k: _unarr(v) for k, v in d["weights"].items()}
    model.velocity = {k: _unarr(v) for k, v in d["velocity"].items()}
    model.rng = np.random.default_rng()
    model.rng.bit_generator.state = d["rng"]
    return model


def model_to_dict(bundle: ModelBundle):
    p = bundle.params
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "lexicon": bundle.lexicon.to_dict(),
        "valence": {"Vc": p.vcfg.Vc, "Vd": p.vcfg.Vd},
        "params": {"root": _arr(p.root), "child": _arr(p.child), "decision": _arr(p.decision)},
        "neural": _neural_to_dict(bundle.neural) if bundle.neural is not None else None,
        "meta": bundle.meta or {},
    }


def save_model(path, lexicon: Lexicon, params: DmvParams, neural: Optional[NeuralModel] = None,
               meta: Optional[dict] = None):
    text = json.dumps(model_to_dict(ModelBundle(lexicon, params, neural, meta)), indent=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def _check_header(doc, fmt, version, path):
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise ModelFormatError(f"{path}: not a {fmt} file")
    if doc.get("version") != version:
        raise ModelFormatError(
            f"{path}: file version {doc.get('version')!r} is not supported (expected {version})")


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: truncated or corrupt file ({exc})") from None


def load_model(path) -> ModelBundle:
    doc = _read_json(path)
    _check_header(doc, MODEL_FORMAT, MODEL_VERSION, path)
    try:
        lex = Lexicon.from_dict(doc["lexicon"])
        tables = doc["params"]
        params = DmvParams(_unarr(tables["root"]), _unarr(tables["child"]), _unarr(tables["decision"]))
        vc = ValenceConfig(**doc["valence"])
        if params.vcfg != vc or params.m != lex.m:
            raise ModelFormatError(f"{path}: table shapes disagree with lexicon/valence header")
        neural = _neural_from_dict(doc["neural"]) if doc.get("neural") else None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"{path}: malformed model file ({exc!r})") from None
    return ModelBundle(lex, params, neural, doc.get("meta") or {})


@dataclass
class CorpusFile:
    lexicon: Lexicon
    sentences: list
    raw: list
    settings: dict


def save_corpus(path, lexicon: Lexicon, sentences, raw, settings: Optional[dict] = None):
    """Lexicon plus encoded sentences; forms/tags are kept for re-encoding."""
    doc = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        "settings": settings or {},
        "lexicon": lexicon.to_dict(),
        "sentences": [
            {"tokens": s.token_ids.tolist(), "tags": s.tag_ids.tolist(),
             "heads": list(s.gold_heads) if s.gold_heads is not None else None,
             "forms": list(r.forms), "pos": list(r.pos)}
            for s, r in zip(sentences, raw)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_corpus(path) -> CorpusFile:
    doc = _read_json(path)
    _check_header(doc, CORPUS_FORMAT, CORPUS_VERSION, path)
    lex = Lexicon.from_dict(doc["lexicon"])
    sents, raw = [], []
    for d in doc["sentences"]:
        heads = tuple(d["heads"]) if d["heads"] is not None else None
        sents.append(Sentence(np.array(d["tokens"], dtype=np.int64),
                              np.array(d["tags"], dtype=np.int64), heads))
        raw.append(RawSentence(d["forms"], d["pos"], list(heads) if heads else None))
    return CorpusFile(lex, sents, raw, doc.get("settings", {}))
