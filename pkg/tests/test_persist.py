import struct

import numpy as np
import pytest

from ckdpipe.baselines import train_forest, train_logreg, train_mlp
from ckdpipe.boost import BoostParams, fit_boost
from ckdpipe.errors import DimensionError
from ckdpipe.persist import (
    FORMAT_VERSION,
    MAGIC,
    ModelFormatError,
    ModelVersionError,
    TruncatedModelError,
    UnknownFamilyError,
    dumps_model,
    family_of,
    load_model,
    loads_model,
    save_model,
)


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 14))
    y = (X[:, 0] + X[:, 3] - X[:, 7] > 0).astype(float)
    return X, y


@pytest.fixture(scope="module")
def models(data):
    X, y = data
    return {
        "logreg": train_logreg(X, y, epochs=50),
        "mlp": train_mlp(X, y, hidden=8, epochs=5, seed=1),
        "forest": train_forest(X, y, n_trees=5, max_depth=4, seed=2),
        "oblivious_boost": fit_boost(X, y, BoostParams(iterations=10, depth=3, learning_rate=0.1)),
    }


NAMES = [f"f{i}" for i in range(14)]


@pytest.mark.parametrize("family", ["logreg", "mlp", "forest", "oblivious_boost"])
def test_round_trip_bit_identical(models, data, family, tmp_path):
    model = models[family]
    assert family_of(model) == family
    digest = save_model(tmp_path / "m.bin", model, NAMES)
    assert len(digest) == 64
    art = load_model(tmp_path / "m.bin")
    assert art.family == family and art.feature_names == NAMES
    a = model.predict_proba(data[0])
    b = art.predict_proba(data[0])
    assert a.tobytes() == b.tobytes()
    assert dumps_model(art.model, NAMES) == dumps_model(model, NAMES)


def test_wrong_width_names_both_counts(models):
    art = loads_model(dumps_model(models["oblivious_boost"], NAMES))
    with pytest.raises(DimensionError, match="14.*13"):
        art.predict_proba(np.zeros((2, 13)))
    art = loads_model(dumps_model(models["logreg"], NAMES))
    with pytest.raises(DimensionError, match="14.*13"):
        art.predict_proba(np.zeros((2, 13)))


def test_bad_magic(models):
    blob = dumps_model(models["logreg"], NAMES)
    with pytest.raises(ModelFormatError, match="magic"):
        loads_model(b"NOTMODEL" + blob[8:])
    with pytest.raises(ModelFormatError):
        loads_model(b"")


@pytest.mark.parametrize("cut", [10, 12, 30, -1])
def test_truncated(models, cut):
    blob = dumps_model(models["logreg"], NAMES)
    with pytest.raises(TruncatedModelError):
        loads_model(blob[:cut])


def test_version_mismatch(models):
    blob = dumps_model(models["logreg"], NAMES)
    bumped = MAGIC + struct.pack("<H", FORMAT_VERSION + 1) + blob[10:]
    with pytest.raises(ModelVersionError, match=str(FORMAT_VERSION + 1)):
        loads_model(bumped)


def test_unknown_family(models):
    blob = dumps_model(models["logreg"], NAMES)
    tag_len = blob[10]
    forged = blob[:11] + b"x" * tag_len + blob[11 + tag_len:]
    with pytest.raises(UnknownFamilyError):
        loads_model(forged)
    with pytest.raises(UnknownFamilyError):
        family_of(object())


def test_corrupted_payload(models):
    blob = bytearray(dumps_model(models["forest"], NAMES))
    blob[-40] ^= 0x01
    with pytest.raises(ModelFormatError, match="checksum"):
        loads_model(bytes(blob))


def test_error_hierarchy():
    for cls in (TruncatedModelError, ModelVersionError, UnknownFamilyError):
        assert issubclass(cls, ModelFormatError)
