"""Versioned binary model artifacts.

Layout (little-endian)::

    magic       8 bytes   b"CKDMODEL"
    version     uint16
    family      uint8 length + ASCII tag
    payload     uint64 length + UTF-8 JSON
    checksum    32 bytes  SHA-256 of the payload

The JSON payload stores every float through ``repr``, which round-trips
exactly, so a loaded model predicts bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import DecisionTree, Forest, LinearModel, MlpModel
from .boost import BoostParams, ObliviousEnsemble, ObliviousTree
from .errors import CkdError

MAGIC = b"CKDMODEL"
FORMAT_VERSION = 1


class ModelFormatError(CkdError):
    """Not a model artifact (bad magic or corrupted payload)."""


class TruncatedModelError(ModelFormatError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class UnknownFamilyError(ModelFormatError):
    pass


@dataclass
class ModelArtifact:
    family: str
    model: object
    feature_names: list

    def predict_proba(self, X):
        return self.model.predict_proba(X)


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def _ints(a):
    return [int(v) for v in np.asarray(a).ravel()]


def _encode_logreg(m: LinearModel):
    return {"weights": _floats(m.weights), "bias": float(m.bias), "l2": float(m.l2)}


def _decode_logreg(d):
    return LinearModel(np.asarray(d["weights"], dtype=float), float(d["bias"]), float(d["l2"]))


def _encode_mlp(m: MlpModel):
    return {
        "shape": list(m.W1.shape),
        "W1": _floats(m.W1),
        "b1": _floats(m.b1),
        "w2": _floats(m.w2),
        "b2": float(m.b2),
    }


def _decode_mlp(d):
    return MlpModel(
        np.asarray(d["W1"], dtype=float).reshape(d["shape"]),
        np.asarray(d["b1"], dtype=float),
        np.asarray(d["w2"], dtype=float),
        float(d["b2"]),
    )


def _encode_forest(m: Forest):
    return {
        "n_features": m.n_features,
        "seed": m.seed,
        "max_features": m.max_features,
        "trees": [
            {
                "feature": _ints(t.feature),
                "threshold": _floats(t.threshold),
                "left": _ints(t.left),
                "right": _ints(t.right),
                "value": _floats(t.value),
            }
            for t in m.trees
        ],
    }


def _decode_forest(d):
    trees = [
        DecisionTree(
            np.asarray(t["feature"], dtype=np.int64),
            np.asarray(t["threshold"], dtype=float),
            np.asarray(t["left"], dtype=np.int64),
            np.asarray(t["right"], dtype=np.int64),
            np.asarray(t["value"], dtype=float),
        )
        for t in d["trees"]
    ]
    return Forest(trees, int(d["n_features"]), int(d["seed"]), d["max_features"])


def _encode_boost(m: ObliviousEnsemble):
    p = m.params
    return {
        "params": {
            "iterations": p.iterations,
            "depth": p.depth,
            "learning_rate": p.learning_rate,
            "l2_leaf_reg": p.l2_leaf_reg,
            "border_count": p.border_count,
            "seed": p.seed,
        },
        "borders": [_floats(b) for b in m.borders],
        "base_score": float(m.base_score),
        "trees": [
            {"features": _ints(t.features), "border_index": _ints(t.border_index), "leaf_values": _floats(t.leaf_values)}
            for t in m.trees
        ],
    }


def _decode_boost(d):
    trees = [
        ObliviousTree(
            np.asarray(t["features"], dtype=np.int64),
            np.asarray(t["border_index"], dtype=np.int64),
            np.asarray(t["leaf_values"], dtype=float),
        )
        for t in d["trees"]
    ]
    borders = [np.asarray(b, dtype=float) for b in d["borders"]]
    return ObliviousEnsemble(BoostParams(**d["params"]), borders, float(d["base_score"]), trees)


FAMILIES = {
    "logreg": (LinearModel, _encode_logreg, _decode_logreg),
    "mlp": (MlpModel, _encode_mlp, _decode_mlp),
    "forest": (Forest, _encode_forest, _decode_forest),
    "oblivious_boost": (ObliviousEnsemble, _encode_boost, _decode_boost),
}


def family_of(model):
    for tag, (cls, _, _) in FAMILIES.items():
        if isinstance(model, cls):
            return tag
    raise UnknownFamilyError(f"no artifact family for {type(model).__name__}")


def dumps_model(model, feature_names) -> bytes:
    family = family_of(model)
    body = {"feature_names": list(feature_names), "model": FAMILIES[family][1](model)}
    payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    tag = family.encode("ascii")
    return b"".join(
        [
            MAGIC,
            struct.pack("<H", FORMAT_VERSION),
            struct.pack("<B", len(tag)),
            tag,
            struct.pack("<Q", len(payload)),
            payload,
            hashlib.sha256(payload).digest(),
        ]
    )


def loads_model(blob: bytes) -> ModelArtifact:
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("bad magic bytes: not a model artifact")
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise TruncatedModelError(f"artifact truncated at byte {len(blob)} (needed {pos + n})")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    (version,) = struct.unpack("<H", take(2))
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"artifact format version {version}, this reader supports {FORMAT_VERSION}")
    (tag_len,) = struct.unpack("<B", take(1))
    family = take(tag_len).decode("ascii", errors="replace")
    (size,) = struct.unpack("<Q", take(8))
    payload = take(size)
    digest = take(32)
    if hashlib.sha256(payload).digest() != digest:
        raise ModelFormatError("payload checksum mismatch")
    if family not in FAMILIES:
        raise UnknownFamilyError(f"unknown model family tag {family!r}")
    body = json.loads(payload)
    return ModelArtifact(family, FAMILIES[family][2](body["model"]), list(body["feature_names"]))


def save_model(path, model, feature_names):
    blob = dumps_model(model, feature_names)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_model(path) -> ModelArtifact:
    return loads_model(Path(path).read_bytes())
