from pathlib import Path

import pytest

from app.core.error_handler import ConfigError, MissingInputError
from config.pipeline import PipelineConfig, load_pipeline_config, parse_overrides

EXPERIMENT_FILE = Path(__file__).resolve().parent.parent / "config" / "experiment.env"


def test_defaults():
    config = load_pipeline_config()
    assert config.domains == ["home", "factory"]
    assert config.scene_seeds() == list(range(7, 17))
    assert config.holdout_seed() == 16
    assert config.planner_max_depth == 4


def test_overrides_are_case_insensitive():
    config = load_pipeline_config(overrides={"Epochs": "3", "DOMAINS": "home"})
    assert config.epochs == 3
    assert config.domains == ["home"]


def test_unknown_key_is_reported():
    with pytest.raises(ConfigError) as info:
        load_pipeline_config(overrides={"BOGUS": "1"})
    assert info.value.key == "BOGUS"


def test_invalid_value_names_the_key():
    with pytest.raises(ConfigError) as info:
        load_pipeline_config(overrides={"EPOCHS": "0"})
    assert info.value.key == "EPOCHS"
    with pytest.raises(ConfigError):
        load_pipeline_config(overrides={"ABLATION": "transformer"})


def test_config_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("# small run\nSCENE_COUNT=3\nHOLDOUT_SCENE_INDEX=0\nABLATION=+NT\n", encoding="utf-8")
    config = load_pipeline_config(str(path), {"SCENE_COUNT": "4"})
    assert config.scene_count == 4
    assert config.holdout_seed() == 7
    assert config.ablation == "nt"


def test_missing_config_file(tmp_path):
    with pytest.raises(MissingInputError):
        load_pipeline_config(str(tmp_path / "absent.env"))


def test_holdout_index_must_be_in_range():
    with pytest.raises(ConfigError):
        load_pipeline_config(overrides={"SCENE_COUNT": "3", "HOLDOUT_SCENE_INDEX": "3"})


def test_parse_overrides():
    assert parse_overrides(["EPOCHS=5", "LEARNING_RATE = 0.01"]) == {"EPOCHS": "5", "LEARNING_RATE": "0.01"}
    with pytest.raises(ConfigError):
        parse_overrides(["EPOCHS"])


def test_shipped_experiment_file_matches_defaults():
    assert load_pipeline_config(str(EXPERIMENT_FILE)) == PipelineConfig()
