import json
import math

import numpy as np
import pytest

from qdimred.data import scale_fit_transform
from qdimred.models.autoencoders import build_autoencoder
from qdimred.models.pqae import PqaeModel, pqae_forward
from qdimred.models.vqc import VqcModel, vqc_forward
from qdimred.nn import make_optimizer, optimizer_step
from qdimred.qsim import AnsatzSpec, FeatureMapSpec
from qdimred.serialize import (
    CheckpointError,
    dumps,
    load_checkpoint,
    model_from_dict,
    model_to_dict,
    optimizer_from_dict,
    optimizer_to_dict,
    save_checkpoint,
)


def test_floats_exact(rng):
    vals = rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, size=50)
    back = json.loads(dumps({"v": vals}))
    assert np.array_equal(np.array(back["v"]), vals)


def test_non_finite_and_types():
    doc = json.loads(dumps({"a": float("nan"), "b": np.int64(3), "c": [True, None], "d": {}}))
    assert doc == {"a": None, "b": 3, "c": [True, None], "d": {}}
    with pytest.raises(TypeError):
        dumps({"x": object()})


@pytest.mark.parametrize("kind,kw", [
    ("linear", dict(latent=2, post_width=3)),
    ("qae", dict(m=2)),
    ("qae", dict(n=3, selection=[1, 4], mode="row_average")),
    ("bloch_qae", {}),
    ("poly", dict(poly_width=2)),
])
def test_autoencoder_round_trip(tmp_path, rng, kind, kw):
    n_features = 6
    ae = build_autoencoder(kind, n_features, rng, **kw)
    X = rng.normal(size=(4, n_features))
    _, _, scaler = scale_fit_transform("zscore", X)
    save_checkpoint(tmp_path / "m.json", ae, scaler=scaler)
    back, sc, opt = load_checkpoint(tmp_path / "m.json")
    assert opt is None
    assert np.array_equal(back.reconstruct(X), ae.reconstruct(X))
    assert np.array_equal(sc.transform(X), scaler.transform(X))
    assert back.bottleneck.to_dict() == ae.bottleneck.to_dict()


def test_pqae_round_trip(tmp_path, rng):
    model = PqaeModel.init(5, FeatureMapSpec(2, reps=1, entanglement="linear"), 3, rng, batch_size=8, center=False)
    save_checkpoint(tmp_path / "p.json", model)
    back, _, _ = load_checkpoint(tmp_path / "p.json")
    X = rng.normal(size=(8, 5))
    assert back.feature_map == model.feature_map and back.center is False
    assert np.array_equal(pqae_forward(back, X)[0], pqae_forward(model, X)[0])


def test_vqc_round_trip(rng):
    model = VqcModel.init(FeatureMapSpec(3), AnsatzSpec(3, reps=2), 3, rng)
    back, _, _ = model_from_dict(json.loads(dumps(model_to_dict(model))))
    X = rng.normal(size=(5, 3))
    assert np.array_equal(vqc_forward(back, X), vqc_forward(model, X))


def test_optimizer_round_trip(rng):
    w = [rng.normal(size=(3, 2)), rng.normal(size=2)]
    opt = make_optimizer("adam", 0.01)
    for _ in range(3):
        optimizer_step(opt, w, [p * 0.5 for p in w])
    back = optimizer_from_dict(json.loads(dumps(optimizer_to_dict(opt))))
    w1 = [p.copy() for p in w]
    optimizer_step(opt, w, [np.ones_like(p) for p in w])
    optimizer_step(back, w1, [np.ones_like(p) for p in w1])
    assert all(np.array_equal(a, b) for a, b in zip(w, w1))
    assert back.step_count == opt.step_count


def test_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    bad.write_text(json.dumps({"format": "other/9"}))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    with pytest.raises(TypeError):
        model_to_dict(math)
