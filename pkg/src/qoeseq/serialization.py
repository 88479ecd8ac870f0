"""Versioned JSON containers for every fitted artifact.

Each document carries ``version`` and a ``model_type`` discriminator. Floats
are written with Python's shortest round-trip repr, so load(dump(x)) is
value-exact. Loaders rebuild objects through their constructors, which
re-check every invariant.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .baselines import GaussianNB, TokenClassifier
from .errors import FileMissing, InvalidModel, QoeSeqError, SchemaMismatch
from .hmm import HmmParams
from .ingest import GeneratorSpec, StandardizationParams
from .vq import BinningScheme, Codebook

FORMAT_VERSION = 1


def _std(doc: dict | None) -> StandardizationParams | None:
    return None if doc is None else StandardizationParams.from_dict(doc)


def to_document(obj: Any, **extra) -> dict:
    if isinstance(obj, Codebook):
        doc = {"model_type": "codebook", "K": obj.K, "D": obj.D,
               "centroids": obj.centroids.tolist(), "inertia": obj.inertia, "seed": obj.seed,
               "standardizer": obj.standardizer.to_dict() if obj.standardizer else None}
    elif isinstance(obj, BinningScheme):
        doc = {"model_type": "binning", "B": obj.bins, "D": obj.D,
               "edges": [e.tolist() for e in obj.edges],
               "standardizer": obj.standardizer.to_dict() if obj.standardizer else None}
    elif isinstance(obj, HmmParams):
        doc = {"model_type": "hmm", **obj.to_dict(), "codebook_ref": obj.codebook_ref}
    elif isinstance(obj, TokenClassifier):
        doc = {"model_type": "token_classifier", **obj.to_dict()}
    elif isinstance(obj, GaussianNB):
        doc = {"model_type": "gaussian_nb", **obj.to_dict()}
    elif isinstance(obj, StandardizationParams):
        doc = {"model_type": "standardizer", **obj.to_dict()}
    elif isinstance(obj, GeneratorSpec):
        doc = {"model_type": "generator_spec", **obj.to_dict()}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    doc.update(extra)
    return {"version": FORMAT_VERSION, **doc}


def from_document(doc: dict, expected_type: str | None = None) -> Any:
    if not isinstance(doc, dict):
        raise SchemaMismatch("artifact document must be a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaMismatch(f"unsupported artifact version {doc.get('version')!r}, expected {FORMAT_VERSION}")
    kind = doc.get("model_type")
    if expected_type is not None and kind != expected_type:
        raise SchemaMismatch(f"expected a {expected_type!r} artifact, found {kind!r}")
    body = {k: v for k, v in doc.items() if k not in ("version", "model_type")}
    try:
        if kind == "codebook":
            cb = Codebook(body["centroids"], float(body["inertia"]), seed=body.get("seed"),
                          standardizer=_std(body.get("standardizer")))
            if (cb.K, cb.D) != (body["K"], body["D"]):
                raise InvalidModel("declared K/D disagree with centroids")
            if np.unique(cb.centroids, axis=0).shape[0] != cb.K:
                raise InvalidModel("codebook centroids must be pairwise distinct")
            return cb
        if kind == "binning":
            scheme = BinningScheme(body["edges"], int(body["B"]), _std(body.get("standardizer")))
            if scheme.D != body["D"]:
                raise InvalidModel("declared D disagrees with edges")
            return scheme
        if kind == "hmm":
            model = HmmParams.from_dict(body)
            model.codebook_ref = body.get("codebook_ref")
            return model
        if kind == "token_classifier":
            return TokenClassifier.from_dict(body)
        if kind == "gaussian_nb":
            return GaussianNB.from_dict(body)
        if kind == "standardizer":
            return StandardizationParams.from_dict(body)
        if kind == "generator_spec":
            spec = GeneratorSpec.from_dict(body)
            spec.validate()
            return spec
    except QoeSeqError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidModel(f"malformed {kind} document: {exc!r}") from None
    raise SchemaMismatch(f"unknown model_type {kind!r}")


def dumps(obj: Any, **extra) -> str:
    return json.dumps(to_document(obj, **extra), indent=2) + "\n"


def save(obj: Any, path: str | Path, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj, **extra), encoding="utf-8")
    return path


def read_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileMissing(str(path))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not valid JSON ({exc})") from None


def load(path: str | Path, expected_type: str | None = None) -> Any:
    return from_document(read_json(path), expected_type)


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def document_ref(obj: Any) -> str:
    """Content hash identifying a discretizer, stored in HMM documents."""
    return "sha256:" + hashlib.sha256(dumps(obj).encode()).hexdigest()
