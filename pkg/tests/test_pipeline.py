import numpy as np
import pytest

from pcanet_cd.classifier import predict_many
from pcanet_cd.errors import ImbalanceError, ParameterError
from pcanet_cd.modelfile import dumps
from pcanet_cd.pipeline import RunConfig, detect, purpose_rng, train_model
from pcanet_cd.raster import ReferenceMap
from pcanet_cd.synthgen import SceneSpec, generate_scene


def test_config_defaults_and_validation():
    cfg = RunConfig()
    assert (cfg.patch, cfg.filter_size, cfg.filters1, cfg.filters2, cfg.block) == (7, 5, 8, 8, 7)
    assert (cfg.radius, cfg.strategy, cfg.rate, cfg.lam, cfg.epochs) == (2, "obuc", 0.05, 1e-4, 20)
    for bad in [dict(patch=6), dict(filter_size=9), dict(block=3), dict(rate=0), dict(strategy="x"), dict(lam=0)]:
        with pytest.raises(ParameterError):
            RunConfig(**bad)


def test_purpose_streams_differ():
    a = purpose_rng(0, "sampling").random(4)
    b = purpose_rng(0, "filters").random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, purpose_rng(0, "sampling").random(4))


def test_training_is_deterministic(small_trained):
    pair, ref, cfg, tr = small_trained
    again = train_model(pair, ref, cfg)
    assert dumps(again.model) == dumps(tr.model)
    assert again.training_set == tr.training_set


def test_feature_length_default(small_trained):
    assert small_trained[3].model.feature_length == 4096


def test_detect_replays_training_predictions(small_trained):
    pair, _, _, tr = small_trained
    pred = detect(tr.model, pair)
    c = tr.training_set.coords
    expected = predict_many(tr.model.classifier, tr.features)
    assert np.array_equal(pred.labels[c[:, 0], c[:, 1]], expected)


def test_detect_independent_of_workers(small_trained):
    pair, _, _, tr = small_trained
    one = detect(tr.model, pair, workers=1)
    assert detect(tr.model, pair, workers=3) == one
    assert detect(tr.model, pair, workers=1) == one


def test_model_applies_to_other_sizes(small_trained):
    tr = small_trained[3]
    other, _ = generate_scene(SceneSpec(width=23, height=17, n_blobs=1, radius_min=3, radius_max=5, seed=9))
    assert detect(tr.model, other).shape == (17, 23)


def test_obuc_on_unchanged_reference(small_scene):
    pair, ref = small_scene
    empty = ReferenceMap(np.zeros(ref.shape, dtype=np.uint8))
    with pytest.raises(ImbalanceError):
        train_model(pair, empty, RunConfig(rate=0.1))


def test_pseudo_needs_no_reference(small_scene):
    pair, _ = small_scene
    tr = train_model(pair, None, RunConfig(strategy="pseudo", rate=0.1, seed=1))
    assert tr.partition is None and tr.training_set.strategy == "pseudo"
    with pytest.raises(ParameterError):
        train_model(pair, None, RunConfig(strategy="buc"))


def test_training_set_obuc_balanced(small_trained):
    ts = small_trained[3].training_set
    assert ts.n_changed == ts.n_unchanged > 0
    assert np.array_equal(ts.labels, small_trained[1].labels[ts.coords[:, 0], ts.coords[:, 1]])
