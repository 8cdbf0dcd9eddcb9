import json

from app.core.error_handler import EXIT_OK, EXIT_USAGE
from app.main import run
from config.settings import settings

SMALL_RUN = [
    "--set", "DOMAINS=home",
    "--set", "SCENE_COUNT=2",
    "--set", "TEACHER_SEEDS=1",
    "--set", "AUG_CROSS_SCENE_MAX=1",
    "--set", "EMBEDDING_DIM=8",
    "--set", "HIDDEN_DIM=8",
    "--set", "METRIC_DIM=4",
    "--set", "HEAD_DIM=8",
    "--set", "PROPAGATION_STEPS=1",
    "--set", "METRIC_LAYERS=1",
    "--set", "EPOCHS=1",
    "--set", "PATIENCE=1",
    "--set", "PLANNER_PAIRS=1",
    "--set", "PLANNER_BUDGET=500",
]


def cli(command, out, *extra):
    return run([command, "--out", str(out), *SMALL_RUN, *extra])


def test_gen_demos_needs_scenes(tmp_path, capsys):
    assert cli("gen-demos", tmp_path) == EXIT_USAGE
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error_type"] == "missing_input"
    assert "home_0007.json" in error["path"]


def test_unknown_setting_is_a_usage_error(tmp_path, capsys):
    assert run(["gen-scenes", "--out", str(tmp_path), "--set", "BOGUS=1"]) == EXIT_USAGE
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["key"] == "BOGUS"


def test_report_needs_results(tmp_path):
    assert cli("report", tmp_path) == EXIT_USAGE


def test_scene_generation_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli("gen-scenes", out, "--domain", "home", "--count", "2") == EXIT_OK
    for name in ("home_0007.json", "home_0008.json"):
        first = (a / settings.SCENES_DIRNAME / name).read_bytes()
        assert first == (b / settings.SCENES_DIRNAME / name).read_bytes()
    assert "gen-scenes" in json.loads((a / settings.PERFORMANCE_FILENAME).read_text(encoding="utf-8"))


def test_small_pipeline_end_to_end(tmp_path):
    steps = ["gen-scenes", "gen-demos", "augment", "train", "gentest", "eval", "plan", "report"]
    for step in steps:
        assert cli(step, tmp_path) == EXIT_OK, step

    for name in (
        settings.CORPUS_FILENAME,
        settings.AUGMENTED_CORPUS_FILENAME,
        settings.AUGMENT_REPORT_FILENAME,
        settings.HISTORY_FILENAME,
        settings.RESULTS_FILENAME,
        settings.GENTEST_FILENAME,
        settings.REPORT_FILENAME,
        settings.PERFORMANCE_FILENAME,
    ):
        assert (tmp_path / name).is_file(), name
    assert (tmp_path / settings.CHECKPOINT_DIRNAME / "w_home.npz").is_file()
    assert (tmp_path / settings.PLANS_DIRNAME / "home.jsonl").is_file()
    results = (tmp_path / settings.RESULTS_FILENAME).read_text(encoding="utf-8").splitlines()
    assert results[1].startswith("+W,")
