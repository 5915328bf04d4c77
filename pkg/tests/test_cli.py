"""
End-to-end tests for the qcrb command line.
"""
import json
import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import config
from app import build_parser, main
from commands.verify import parse_dims
from services.errors import ImaginaryResidueError

SPECS_DIR = project_root / "data" / "specs"


def write_spec(tmp_path, doc, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


class TestCompute:
    """qcrb compute."""

    def test_qubit_smoke_json(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["compute", "--spec", str(SPECS_DIR / "qubit_smoke.json"), "--out", str(out)])
        assert code == config.EXIT_OK
        data = json.loads(out.read_text(encoding="utf-8"))
        assert data["records"][0]["bound"]["cumulative_rhs"] == 0.25

    def test_csv_output(self, tmp_path):
        out = tmp_path / "report.csv"
        code = main(["compute", "--spec", str(SPECS_DIR / "qubit_smoke.json"), "--out", str(out), "--format", "csv"])
        assert code == config.EXIT_OK
        lines = out.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0].startswith("time_index,time,order")
        assert len(lines) == 1 + 3 * 2

    def test_orders_override(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["compute", "--spec", str(SPECS_DIR / "qubit_smoke.json"), "--out", str(out), "--orders", "1"])
        assert code == config.EXIT_OK
        data = json.loads(out.read_text(encoding="utf-8"))
        assert data["records"][0]["bound"]["orders"] == [1]

    def test_stdout(self, capsys):
        code = main(["compute", "--spec", str(SPECS_DIR / "qubit_smoke.json")])
        assert code == config.EXIT_OK
        assert json.loads(capsys.readouterr().out)["schema_version"] == config.SCHEMA_VERSION

    def test_schema_error_exit_code(self, tmp_path):
        spec = write_spec(tmp_path, {"dimension": 2, "hamiltonian": {"kind": "gue", "seed": 1},
                                     "state": {"kind": "ginibre", "seed": 2}, "orders": [2]})
        assert main(["compute", "--spec", spec]) == config.EXIT_SCHEMA_ERROR

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["compute", "--spec", str(tmp_path / "absent.json")]) == config.EXIT_SCHEMA_ERROR

    def test_numerical_abort_exit_code(self, tmp_path):
        spec = write_spec(tmp_path, {"dimension": 2, "hamiltonian": {"kind": "explicit", "matrix": [[1, 0], [0, -1]]},
                                     "state": {"kind": "diagonal", "weights": [0.75, 0.25]}})
        assert main(["compute", "--spec", spec]) == config.EXIT_NUMERICAL_ABORT

    def test_non_utf8_spec_exit_code(self, tmp_path):
        """Undecodable bytes are a schema error, not a crash."""
        path = tmp_path / "latin.json"
        path.write_bytes(b'{"dimension": 2, "label": "\xff"}')
        assert main(["compute", "--spec", str(path)]) == config.EXIT_SCHEMA_ERROR

    def test_imaginary_residue_exit_code(self, monkeypatch):
        """A complex residue in a real-valued quantity aborts with the numerical exit code."""
        def raise_residue(*args, **kwargs):
            raise ImaginaryResidueError("gradient norm: imaginary part 1.0e-03")

        monkeypatch.setattr("commands.compute.run_compute", raise_residue)
        assert main(["compute", "--spec", str(SPECS_DIR / "qubit_smoke.json")]) == config.EXIT_NUMERICAL_ABORT


class TestVerify:
    """qcrb verify."""

    def test_small_suite(self, tmp_path):
        out = tmp_path / "suite.json"
        code = main(["verify", "--seed", "5", "--dims", "2,3", "--samples", "2", "--out", str(out)])
        assert code == config.EXIT_OK
        assert json.loads(out.read_text(encoding="utf-8"))["passed"] is True

    def test_zero_tolerance_is_failure(self, tmp_path):
        out = tmp_path / "suite.json"
        code = main(["verify", "--dims", "3", "--samples", "1", "--tolerance", "0", "--out", str(out)])
        assert code == config.EXIT_SUITE_FAILURE

    def test_parse_dims(self):
        assert parse_dims("2..5") == [2, 3, 4, 5]
        assert parse_dims("2,4") == [2, 4]


class TestSample:
    """qcrb sample."""

    def test_writes_matrix_document(self, tmp_path):
        out = tmp_path / "gue.json"
        code = main(["sample", "--dim", "3", "--ensemble", "gue", "--seed", "9", "--out", str(out)])
        assert code == config.EXIT_OK
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["dimension"] == 3
        assert len(doc["matrix"]) == 3

    def test_sample_matrix_is_valid_spec_input(self, tmp_path):
        """The matrix field pastes straight into an explicit spec."""
        out = tmp_path / "state.json"
        main(["sample", "--dim", "3", "--ensemble", "ginibre", "--seed", "2", "--out", str(out)])
        matrix = json.loads(out.read_text(encoding="utf-8"))["matrix"]
        spec = write_spec(tmp_path, {"dimension": 3, "hamiltonian": {"kind": "gue", "seed": 1},
                                     "state": {"kind": "explicit", "matrix": matrix}, "orders": [1]})
        assert main(["compute", "--spec", spec, "--out", str(tmp_path / "r.json")]) == config.EXIT_OK

    def test_invalid_dimension(self, tmp_path):
        code = main(["sample", "--dim", "1", "--ensemble", "gue", "--seed", "0", "--out", str(tmp_path / "x.json")])
        assert code == config.EXIT_SCHEMA_ERROR


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["--version"])
        assert excinfo.value.code == 0
        assert config.VERSION in capsys.readouterr().out

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


if __name__ == '__main__':
    pytest.main([__file__, "-v"])
