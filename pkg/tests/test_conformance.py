"""Conformance vectors: the shipped suite, the runner, and generator determinism."""

import json
from pathlib import Path

import pytest

from mandate.conformance import (
    LEVEL_DIRS,
    FixtureError,
    iter_vector_files,
    run_vector,
    run_vectors,
)
from mandate.model import DenyCode
from mandate.vectorgen import generate_vectors, write_vectors

VECTOR_ROOT = Path(__file__).resolve().parent.parent / "vectors"


def test_shipped_suite_passes_completely():
    report = run_vectors(VECTOR_ROOT)
    assert report.ok, report.to_dict()["failures"]
    assert report.total == report.passed == 59


def test_every_level_directory_contributes_vectors():
    files = iter_vector_files(VECTOR_ROOT)
    present = {path.parent.name for path in files}
    assert present == set(LEVEL_DIRS)


def test_suite_exercises_every_denial_code():
    codes = set()
    for path in iter_vector_files(VECTOR_ROOT):
        expected = json.loads(path.read_text())["expected"]
        if expected.get("code"):
            codes.add(expected["code"])
    assert codes == {code.value for code in DenyCode}


def test_vector_ids_are_unique():
    ids = [json.loads(p.read_text())["vector_id"] for p in iter_vector_files(VECTOR_ROOT)]
    assert len(ids) == len(set(ids))


def test_runner_reports_mismatch_instead_of_raising():
    path = iter_vector_files(VECTOR_ROOT)[0]
    vector = json.loads(path.read_text())
    vector["expected"] = {"outcome": "DENY", "code": "permission_denied"}
    expected, actual = run_vector(vector)
    assert expected != actual


def test_runner_rejects_non_vectors():
    with pytest.raises(FixtureError):
        run_vector({"kind": "credential"})
    with pytest.raises(FixtureError):
        run_vector({"kind": "test_vector", "vector_id": "v", "fixtures": {}})


def test_runner_includes_root_level_files(tmp_path):
    source = iter_vector_files(VECTOR_ROOT)[0]
    (tmp_path / "adhoc.json").write_text(source.read_text())
    report = run_vectors(tmp_path)
    assert report.total == 1 and report.ok


def test_generator_is_deterministic(tmp_path):
    write_vectors(tmp_path)
    regenerated = {p.relative_to(tmp_path): p.read_bytes() for p in tmp_path.rglob("*.json")}
    shipped = {
        p.relative_to(VECTOR_ROOT): p.read_bytes() for p in VECTOR_ROOT.rglob("*.json")
    }
    assert regenerated == shipped


def test_generated_ids_name_their_level():
    for level, vector in generate_vectors():
        prefix, _, name = vector["vector_id"].partition("/")
        assert name and level.startswith(prefix)
