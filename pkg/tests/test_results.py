import json
import math

import numpy as np
import pytest

from mtsbattle.results import Document, Matrix, ResultManifest, Table, file_checksum, write_results


def test_table_csv(tmp_path):
    table = Table("gains", ["trial", "gain_db", "ok"], [[0, 1.5, True], [1, np.float64(0.1), np.bool_(False)]])
    (path,) = table.write(tmp_path, "csv")

    assert path.name == "gains.csv"
    assert path.read_text().splitlines() == ["trial,gain_db,ok", "0,1.5,1", "1,0.1,0"]


def test_table_json_records(tmp_path):
    table = Table.from_records("rows", ["a", "b"], [{"a": 1, "b": math.nan}, {"a": 2, "b": 0.25, "extra": 9}])
    (path,) = table.write(tmp_path, "json")

    assert json.loads(path.read_text()) == [{"a": 1, "b": "nan"}, {"a": 2, "b": 0.25}]


def test_matrix_writes_grid_and_sidecar(tmp_path):
    matrix = Matrix("speed", np.array([[1.0, 2.0], [3.0, 4.0]]), ("pause A", [1, 5]), ("pause B", [1, 5]), {"seed": 7})
    grid, header = matrix.write(tmp_path, "csv")

    assert grid.read_text().splitlines() == ["1.0,2.0", "3.0,4.0"]
    sidecar = json.loads(header.read_text())
    assert sidecar["shape"] == [2, 2]
    assert sidecar["rows"] == {"label": "pause A", "values": [1, 5]}
    assert sidecar["seed"] == 7


def test_matrix_json_carries_values(tmp_path):
    matrix = Matrix("m", [[0.5]], ("r", ["x"]), ("c", ["y"]))
    (path,) = matrix.write(tmp_path, "json")
    assert json.loads(path.read_text())["values"] == [[0.5]]


def test_matrix_shape_must_match_axes():
    with pytest.raises(ValueError, match="does not match"):
        Matrix("bad", np.zeros((2, 3)), ("r", [0, 1]), ("c", [0, 1]))


def test_document_is_json(tmp_path):
    (path,) = Document("summary", {"wins": {"A": np.int64(3)}, "gain": math.inf}).write(tmp_path, "csv")
    assert json.loads(path.read_text()) == {"gain": "inf", "wins": {"A": 3}}


def test_write_results_creates_directory(tmp_path):
    out = tmp_path / "nested" / "run"
    files = write_results([Table("t", ["x"], [[1]]), Document("summary", {})], out)
    assert [p.name for p in files] == ["t.csv", "summary.json"]
    assert all(p.exists() for p in files)


def test_write_results_rejects_duplicate_names(tmp_path):
    with pytest.raises(ValueError, match="written twice"):
        write_results([Table("summary", ["x"]), Document("summary", {})], tmp_path, "json")


def test_identical_items_give_identical_bytes(tmp_path):
    items = [Table("t", ["v"], [[0.1 + 0.2]]), Document("d", {"v": 1 / 3})]
    first = write_results(items, tmp_path / "a")
    second = write_results(items, tmp_path / "b")
    assert [file_checksum(p) for p in first] == [file_checksum(p) for p in second]


def test_manifest_round_trip(tmp_path):
    files = write_results([Table("t", ["x"], [[1]]), Document("summary", {"k": 1})], tmp_path)
    manifest = ResultManifest.build("abc", "battle", 7, files, 1.23456)
    manifest.write(tmp_path)

    loaded = ResultManifest.read(tmp_path)
    assert loaded.checksums == {p.name: file_checksum(p) for p in files}
    assert list(loaded.checksums) == ["summary.json", "t.csv"]
    assert (loaded.kind, loaded.seed, loaded.config_hash) == ("battle", 7, "abc")
    assert loaded.duration_s == pytest.approx(1.235)
