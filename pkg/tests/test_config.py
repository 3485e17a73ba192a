import pytest

from streetclust.config import PipelineConfig


def test_defaults_match_published_recipe():
    config = PipelineConfig()
    assert config.train.learning_rate == pytest.approx(2e-4)
    assert config.train.weight_decay == 0.0
    assert config.train.batch_size == 128
    assert config.train.epochs == 40
    assert config.train.k_neighbors == 1
    assert config.loss.instance_temperature == 0.5
    assert config.loss.cluster_temperature == 1.0
    assert config.loss.cluster_weight == 2.0
    assert config.loss.entropy_weight == 0.2
    assert config.model.n_clusters == 5
    assert config.model.embedding_dim == 128
    assert config.eval.moran_threshold == 100.0
    assert config.map.cell_size == 100.0


def test_from_file_and_sections(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text(
        "seed: 7\n"
        "train:\n  epochs: 3\n  batch_size: 16\n"
        "model:\n  n_clusters: 4\n"
        "data:\n  augmentation:\n    flip_prob: 0.9\n",
        encoding="utf-8",
    )
    config = PipelineConfig.from_file(f)
    assert config.seed == 7
    assert config.train.epochs == 3
    assert config.model.n_clusters == 4
    assert config.data.augmentation.flip_prob == 0.9
    # untouched defaults survive
    assert config.loss.cluster_weight == 2.0


def test_unknown_keys_rejected(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("train:\n  learning_rat: 0.1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="unknown config key.*learning_rat"):
        PipelineConfig.from_file(f)
    f.write_text("trian: {}\n", encoding="utf-8")
    with pytest.raises(ValueError, match="trian"):
        PipelineConfig.from_file(f)


def test_overrides_win():
    config = PipelineConfig().apply_overrides(["train.epochs=2", "seed=9", "loss.entropy_weight=0.5"])
    assert config.train.epochs == 2
    assert config.seed == 9
    assert config.loss.entropy_weight == 0.5
    with pytest.raises(ValueError, match="unknown config key"):
        PipelineConfig().apply_overrides(["train.nope=1"])
    with pytest.raises(ValueError, match="form"):
        PipelineConfig().apply_overrides(["loss.cluster_weight"])


def test_config_hash_tracks_content():
    a = PipelineConfig()
    b = PipelineConfig().apply_overrides(["train.epochs=2"])
    assert a.config_hash() == PipelineConfig().config_hash()
    assert a.config_hash() != b.config_hash()


def test_exported_subconfigs():
    config = PipelineConfig().apply_overrides(
        ["model.n_clusters=7", "train.k_neighbors=3", "seed=5", "data.distractor_prob=0.1"]
    )
    tc = config.train_config()
    assert tc.n_clusters == 7
    assert tc.k_neighbors == 3
    assert tc.seed == 5
    spec = config.city_spec()
    assert spec.distractor_prob == 0.1
    assert spec.seed == 5
