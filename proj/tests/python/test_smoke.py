import json

import numpy as np
import pytest

import uniconn


@pytest.fixture(scope="module")
def cohort():
    return uniconn.synthesize_cohort(n_per_group=6, seed=7)


def test_cohort_shapes(cohort):
    assert len(cohort) == 12
    s = cohort.subjects[0]
    assert s.sc.shape == (16, 16)
    assert s.fts.shape == (16, 24)
    assert s.fv.shape == (8,)
    assert np.array_equal(s.sc, s.sc.T)
    assert len(cohort.planted_edges) == 20


def test_dataset_round_trip(cohort, tmp_path):
    manifest = uniconn.save_dataset(cohort, tmp_path / "cohort")
    back = uniconn.load_dataset(manifest)
    for a, b in zip(cohort.subjects, back.subjects):
        assert np.array_equal(a.fts, b.fts)
        assert a.label == b.label


def test_missing_manifest_raises(tmp_path):
    with pytest.raises(uniconn.MissingFileError):
        uniconn.load_dataset(tmp_path / "nope.json")
    assert issubclass(uniconn.MissingFileError, uniconn.IoError)


def test_prior_and_sampling(cohort):
    prior = uniconn.fit_prior(cohort, m=6, q=8)
    assert len(prior.prototypes) == 6
    basis = prior.pca_basis
    assert np.allclose(basis.T @ basis, np.eye(8), atol=1e-8)
    z = prior.sample(16, seed=3)
    assert z.shape == (16, 8)
    assert np.array_equal(z, prior.sample(16, seed=3))
    assert prior.density(z[0]) > 0


def test_dpp_identity_tie_break():
    assert uniconn.dpp_select(np.eye(5), [0], 3) == [0, 1, 2]


def test_knn_incidence_and_adjacency():
    rep = np.array([[0.0], [1.0], [10.0]])
    h = uniconn.knn_incidence(rep, 1)
    assert h[:, 2].tolist() == [0.0, 1.0, 1.0]
    a = uniconn.normalized_adjacency(np.zeros((3, 3)))
    assert np.allclose(a, np.eye(3))


def test_statistics():
    assert uniconn.roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    r = uniconn.welch_t_test([0.1, 0.2, 0.3], [0.8, 0.9, 1.0])
    assert r.t == pytest.approx(-8.573, abs=1e-3)
    assert r.p < 0.01


def test_config_json_errors():
    cfg = uniconn.TrainConfig.from_json('{"epochs": 3}')
    assert cfg.epochs == 3
    assert json.loads(cfg.to_json())["epochs"] == 3
    with pytest.raises(uniconn.ConfigError):
        uniconn.TrainConfig.from_json('{"epochz": 3}')


def test_train_forward_save_load(cohort, tmp_path):
    cfg = uniconn.TrainConfig.from_json('{"epochs": 2, "k": 3, "prior_mode": "normal"}')
    model = uniconn.train(cfg, cohort)
    out = model.forward(cohort.subjects[0])
    assert out.uc.shape == (16, 16)
    assert 0.0 <= out.score <= 1.0
    model.save(tmp_path / "ckpt")
    again = uniconn.load_model(tmp_path / "ckpt")
    assert np.array_equal(again.forward(cohort.subjects[0]).uc, out.uc)
    m = model.evaluate(cohort)
    assert 0.0 <= m.acc <= 1.0


def test_cross_validate_scores(cohort):
    cfg = uniconn.TrainConfig.from_json('{"epochs": 2, "k": 3, "folds": 2, "batch_size": 4, "prior_mode": "none"}')
    scores = uniconn.cross_validate(cfg, cohort)
    assert len(scores) == len(cohort)
    assert all(0.0 <= s <= 1.0 for s in scores)
