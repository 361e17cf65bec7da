"""Unit tests for result file utilities."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pytest

from calderon_lab.core.conductivity import bump_conductivity
from calderon_lab.core.measurement import synth_electrode_from_matrix
from calderon_lab.models.measurement import DatasetRecord, ElectrodeData, ElectrodeLayout
from calderon_lab.models.spectral import OperatorMatrix
from calderon_lab.utils.file_ops import (
    FileIntegrityError,
    FileOperationError,
    calculate_file_hash,
    content_digest,
    ensure_directory,
    read_csv_result,
    read_dataset,
    read_field_binary,
    read_json_result,
    write_csv_result,
    write_dataset,
    write_field_binary,
    write_field_csv,
    write_json_result,
)


class TestDigests:
    """Test content and file digests."""

    def test_git_blob_digest(self) -> None:
        # `git hash-object` of an empty file
        assert content_digest(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"

    def test_file_hash(self, temp_dir: Path) -> None:
        path = temp_dir / "a.bin"
        path.write_bytes(b"calderon")
        assert calculate_file_hash(path) == hashlib.sha256(b"calderon").hexdigest()
        with pytest.raises(FileOperationError):
            calculate_file_hash(temp_dir / "missing.bin")

    def test_ensure_directory(self, temp_dir: Path) -> None:
        target = temp_dir / "a" / "b"
        assert ensure_directory(target) == target
        assert target.is_dir()


class TestJsonResult:
    """Test JSON result files."""

    def test_round_trip(self, temp_dir: Path) -> None:
        path = write_json_result(
            temp_dir / "out" / "fit.json", {"slope": 0.98, "passed": True}, config_hash="abc"
        )
        document = read_json_result(path)
        assert document["config_hash"] == "abc"
        assert document["data"] == {"slope": 0.98, "passed": True}
        assert not path.with_suffix(".json.tmp").exists()

    def test_byte_identical_rewrite(self, temp_dir: Path) -> None:
        data = {"b": [1.0, 2.5], "a": {"x": 1}}
        first = write_json_result(temp_dir / "one.json", data, config_hash="h").read_bytes()
        second = write_json_result(temp_dir / "two.json", data, config_hash="h").read_bytes()
        assert first == second

    def test_tampering_detected(self, temp_dir: Path) -> None:
        path = write_json_result(temp_dir / "fit.json", {"slope": 0.98}, config_hash="abc")
        path.write_text(path.read_text().replace("0.98", "0.99"))
        with pytest.raises(FileIntegrityError):
            read_json_result(path)

    def test_nan_rejected(self, temp_dir: Path) -> None:
        with pytest.raises(ValueError):
            write_json_result(temp_dir / "bad.json", {"x": float("nan")}, config_hash="h")


class TestCsvResult:
    """Test CSV result files."""

    def test_round_trip(self, temp_dir: Path) -> None:
        path = write_csv_result(
            temp_dir / "recover.csv",
            ["eps", "seed", "passed", "note"],
            [[0.1, 0, True, None], [0.01, 1, False, "x"]],
            config_hash="abc",
        )
        meta, rows = read_csv_result(path)
        assert meta["config_hash"] == "abc"
        assert rows == [
            {"eps": "0.1", "seed": "0", "passed": "1", "note": ""},
            {"eps": "0.01", "seed": "1", "passed": "0", "note": "x"},
        ]

    def test_floats_round_trip_exactly(self, temp_dir: Path) -> None:
        value = 0.1 + 0.2
        path = write_csv_result(temp_dir / "f.csv", ["v"], [[value]], config_hash="h")
        _, rows = read_csv_result(path)
        assert float(rows[0]["v"]) == value

    def test_tampering_detected(self, temp_dir: Path) -> None:
        path = write_csv_result(temp_dir / "t.csv", ["v"], [[1]], config_hash="h")
        path.write_text(path.read_text() + "2\n")
        with pytest.raises(FileIntegrityError):
            read_csv_result(path)

    def test_missing_metadata(self, temp_dir: Path) -> None:
        path = temp_dir / "plain.csv"
        path.write_text("v\n1\n")
        with pytest.raises(FileIntegrityError, match="metadata"):
            read_csv_result(path)


class TestDatasets:
    """Test dataset and field files."""

    def test_electrode_dataset(self, temp_dir: Path) -> None:
        data = synth_electrode_from_matrix(
            OperatorMatrix.zeros(8, 8), 0.3, ElectrodeLayout(P=4), seed=2
        )
        path = write_dataset(temp_dir / "data.json", DatasetRecord.from_electrode(data))
        back = read_dataset(path).to_data()
        assert isinstance(back, ElectrodeData)
        np.testing.assert_array_equal(back.Y, data.Y)
        assert back.layout.P == 4

    def test_missing_dataset(self, temp_dir: Path) -> None:
        with pytest.raises(FileOperationError):
            read_dataset(temp_dir / "none.json")

    def test_field_binary(self, temp_dir: Path) -> None:
        values = bump_conductivity(0.4, 0.5, 17).values
        path = write_field_binary(temp_dir / "gamma.bin", values, masked=False)
        back, masked = read_field_binary(path)
        np.testing.assert_array_equal(back, values)
        assert masked is False
        assert path.stat().st_size == 9 + 8 * 17 * 17

    def test_field_binary_checks(self, temp_dir: Path) -> None:
        with pytest.raises(FileOperationError):
            write_field_binary(temp_dir / "bad.bin", np.zeros((3, 4)))
        junk = temp_dir / "junk.bin"
        junk.write_bytes(b"XXXX" + b"\0" * 20)
        with pytest.raises(FileIntegrityError):
            read_field_binary(junk)

    def test_field_csv(self, temp_dir: Path) -> None:
        field = bump_conductivity(0.4, 0.5, 9)
        lines = write_field_csv(temp_dir / "gamma.csv", field).read_text().splitlines()
        assert lines[0] == "x,y,value"
        assert "0.0,0.0,1.4" in lines
