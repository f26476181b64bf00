"""Run configuration: defaults, JSON round trips, hashing, validation."""

import json

import pytest

from ris_lab.config import (RunConfig, SystemConfig, config_from_dict,
                            config_hash, config_to_dict, load_config,
                            save_config)
from ris_lab.scenes import SceneGenConfig


def test_default_system_dimensions():
    sysc = SystemConfig()
    assert sysc.users == 4
    assert sysc.elements == 8
    assert sysc.antennas == 8
    assert sysc.surfaces == 6
    assert sysc.p_max == 1.0
    assert sysc.link_budget_db == 20.0
    assert sysc.noise_power == 1.0


def test_default_run_counts():
    cfg = RunConfig()
    assert cfg.train_samples == 10000
    assert cfg.test_samples == 200
    assert cfg.scene.n_ris == cfg.system.surfaces
    assert cfg.scene.n_users == cfg.system.users


def test_dict_round_trip_identity():
    cfg = RunConfig(system=SystemConfig(users=2, elements=3, antennas=5,
                                        surfaces=4),
                    scene=SceneGenConfig(n_ris=4, n_users=2),
                    train_samples=12, test_samples=7, seed=99)
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg
    assert isinstance(again.scene.obstacle_size, tuple)
    assert isinstance(again.train.hidden, tuple)


def test_file_round_trip_identity(tmp_path):
    cfg = RunConfig(seed=3, train_samples=42)
    path = tmp_path / "run.json"
    save_config(path, cfg)
    assert load_config(path) == cfg
    # the stored document is plain JSON with section objects
    doc = json.loads(path.read_text())
    assert set(doc) >= {"system", "scene", "train", "ao", "seed"}


def test_hash_stable_across_round_trip(tmp_path):
    cfg = RunConfig(seed=11)
    path = tmp_path / "run.json"
    save_config(path, cfg)
    assert config_hash(load_config(path)) == config_hash(cfg)
    assert len(config_hash(cfg)) == 64


def test_hash_sensitive_to_every_knob():
    base = config_hash(RunConfig())
    assert config_hash(RunConfig(seed=1)) != base
    assert config_hash(RunConfig(system=SystemConfig(p_max=2.0))) != base
    assert config_hash(RunConfig(test_samples=201)) != base


def test_system_validation():
    with pytest.raises(ValueError):
        SystemConfig(users=0)
    with pytest.raises(ValueError):
        SystemConfig(p_max=0.0)
    with pytest.raises(ValueError):
        SystemConfig(noise_power=-1.0)
    with pytest.raises(ValueError):
        SystemConfig(eta=-0.5)


def test_cross_section_validation():
    with pytest.raises(ValueError, match="n_ris"):
        RunConfig(scene=SceneGenConfig(n_ris=3, n_users=4))
    with pytest.raises(ValueError, match="n_users"):
        RunConfig(scene=SceneGenConfig(n_ris=6, n_users=5))
    with pytest.raises(ValueError, match="kappa"):
        RunConfig(scene=SceneGenConfig(n_ris=6, n_users=4, kappa=0.25))
    with pytest.raises(ValueError):
        RunConfig(train_samples=0)


def test_unknown_keys_rejected():
    doc = config_to_dict(RunConfig())
    doc["banana"] = 1
    with pytest.raises(TypeError):
        config_from_dict(doc)
