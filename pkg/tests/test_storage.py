import pytest

from app.core.error_handler import MissingInputError, SchemaValidationError
from app.core.validation import validate_outputs
from app.schemas.corpus_schemas import DemoPlan
from app.schemas.result_schemas import RESULT_COLUMNS, ResultRow
from app.services.storage_service import RunStorage


@pytest.fixture
def storage(tmp_path):
    return RunStorage(tmp_path)


def test_scene_files_round_trip(storage, home_scene):
    path = storage.save_scene(home_scene)
    assert path.name == "home_0007.json"
    assert storage.load_scene("home", 7).to_dict() == home_scene.to_dict()
    with pytest.raises(MissingInputError):
        storage.load_scene("home", 8)


def test_corpus_round_trip(storage, home_corpus):
    storage.save_corpus(home_corpus)
    assert storage.load_corpus() == home_corpus


def test_bad_jsonl_line_is_reported(storage):
    storage.write_text("corpus.jsonl", '{"domain": "home"}\n')
    with pytest.raises(SchemaValidationError) as info:
        storage.load_corpus("corpus.jsonl")
    assert info.value.path.endswith("corpus.jsonl:1")


def test_missing_file(storage):
    with pytest.raises(MissingInputError):
        storage.read_jsonl("nothing.jsonl")


def test_csv_columns_are_checked(storage):
    good = storage.write_csv("results.csv", RESULT_COLUMNS, [ResultRow(model="GGCN", test_home=50.0).to_row()])
    assert validate_outputs([(good, ResultRow, "csv")], RESULT_COLUMNS) == [str(good)]
    bad = storage.write_csv("bad.csv", RESULT_COLUMNS[:3], [{"model": "GGCN"}])
    with pytest.raises(SchemaValidationError):
        validate_outputs([(bad, ResultRow, "csv")], RESULT_COLUMNS)


def test_jsonl_validation_counts_records(storage, home_corpus):
    path = storage.save_corpus(home_corpus[:3], "subset.jsonl")
    assert validate_outputs([(path, DemoPlan, "jsonl")]) == [str(path)]
