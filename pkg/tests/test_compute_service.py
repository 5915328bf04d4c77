"""
Integration tests for the compute pipeline.
"""
import json
import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import config
from services.compute_service import build_problem, run_compute, spec_fingerprint
from services.errors import ZeroFisherInformation
from services.spec_service import parse_spec

SPECS_DIR = project_root / "data" / "specs"


def load_spec(name):
    return parse_spec((SPECS_DIR / name).read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def qubit_report():
    return run_compute(load_spec("qubit_smoke.json"))


@pytest.fixture(scope="module")
def oscillator_report():
    return run_compute(load_spec("oscillator_thermal.json"))


class TestQubitSmoke:
    """σx/2 in diag(0.75, 0.25) over three times."""

    def test_one_record_per_time(self, qubit_report):
        assert [r.time for r in qubit_report.records] == [0.0, 0.5, 1.0]
        assert [r.index for r in qubit_report.records] == [0, 1, 2]

    def test_bound_is_quarter_everywhere(self, qubit_report):
        """Order 3 is degenerate at every time and the bound stays ¼."""
        for record in qubit_report.records:
            assert record.bound.degenerate_orders == [3]
            assert record.bound.cumulative_rhs == pytest.approx(0.25, abs=1e-15)

    def test_moments_match_closed_form(self, qubit_report):
        """μ₂ ≈ 0.0669873 and the invariants are tiny."""
        assert qubit_report.records[0].moments.mu[2] == pytest.approx(0.0669873, abs=1e-7)
        assert qubit_report.invariants["moment_drift"] <= 1e-12
        assert qubit_report.invariants["closed_form_defect"] <= 1e-10

    def test_no_estimator_fields(self, qubit_report):
        """Without an estimator there are no diagnostics."""
        record = qubit_report.records[0]
        assert record.diagnostics is None
        assert record.order1_product is None
        assert "kappa_drift" not in qubit_report.invariants

    def test_header(self, qubit_report):
        """Versions and fingerprint."""
        assert qubit_report.schema_version == config.SCHEMA_VERSION
        assert qubit_report.version == config.VERSION
        assert qubit_report.spec_fingerprint == spec_fingerprint(load_spec("qubit_smoke.json"))
        assert len(qubit_report.spec_fingerprint) == 64


class TestOscillator:
    """Thermal state of the truncated oscillator with the conjugate estimator."""

    def test_order1_product(self, oscillator_report):
        """ΔT²·μ₂ ≥ ¼ up to truncation error."""
        for record in oscillator_report.records:
            assert record.order1_product >= 0.25 - 1e-3

    def test_diagnostics_present(self, oscillator_report):
        """The state stays away from the boundary, so no warning note."""
        record = oscillator_report.records[0]
        assert record.diagnostics.boundary_safe is True
        assert record.diagnostics.projection == pytest.approx(1.0, abs=1e-6)
        assert not any("boundary" in note for note in oscillator_report.notes)

    def test_even_term_reported(self, oscillator_report):
        """include_even_order_2 adds a separate non-negative term."""
        for record in oscillator_report.records:
            assert record.bound.even_term is not None
            assert record.bound.even_term >= 0.0

    def test_kappa_drift_small(self, oscillator_report):
        assert oscillator_report.invariants["kappa_drift"] <= 1e-4

    def test_cumulative_monotone(self, oscillator_report):
        bound = oscillator_report.records[0].bound
        values = [bound.cumulative_by_order[n] for n in bound.orders]
        assert values[0] == 0.25
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestRandomMixed:
    """Seeded GUE generator and Ginibre state."""

    def test_deterministic(self):
        """Two runs of the same spec agree exactly."""
        spec = load_spec("random_mixed.json")
        first = run_compute(spec)
        second = run_compute(spec)
        assert first.records[-1].bound.cumulative_rhs == second.records[-1].bound.cumulative_rhs
        assert first.provenance == second.provenance

    def test_moment_drift(self):
        """μ₂ₙ is conserved along the evolution."""
        report = run_compute(load_spec("random_mixed.json"))
        assert report.invariants["moment_drift"] <= 1e-8
        assert report.provenance["hamiltonian_seed"] == 11
        assert report.provenance["state_seed"] == 12


class TestFailures:
    """Typed errors from the pipeline."""

    def test_commuting_generator(self):
        """Diagonal H and diagonal state give zero Fisher information at the first time."""
        doc = {
            "dimension": 2,
            "hamiltonian": {"kind": "explicit", "matrix": [[1, 0], [0, -1]]},
            "state": {"kind": "diagonal", "weights": [0.75, 0.25]},
            "times": [0.0, 1.0],
        }
        with pytest.raises(ZeroFisherInformation) as excinfo:
            run_compute(parse_spec(json.dumps(doc)))
        assert excinfo.value.time_index == 0

    def test_pure_state_note(self):
        """Pure states are flagged in the notes."""
        doc = {
            "dimension": 3,
            "hamiltonian": {"kind": "gue", "seed": 4},
            "state": {"kind": "pure_haar", "seed": 5},
            "orders": [1],
        }
        report = run_compute(parse_spec(json.dumps(doc)))
        assert any("pure state" in note for note in report.notes)


class TestBuildProblem:
    """Operators from sources."""

    def test_oscillator_pair_shared(self):
        """The conjugate estimator reuses the oscillator generator."""
        problem = build_problem(load_spec("oscillator_thermal.json"))
        assert problem.pair is not None
        assert problem.pair.h is problem.h
        assert problem.pair.boundary_band == config.BOUNDARY_BAND

    def test_explicit_estimator_has_no_band(self):
        doc = {
            "dimension": 2,
            "hamiltonian": {"kind": "explicit", "matrix": [[0, 0.5], [0.5, 0]]},
            "state": {"kind": "diagonal", "weights": [0.75, 0.25]},
            "estimator": {"kind": "explicit", "matrix": [[0, [0, -0.5]], [[0, 0.5], 0]]},
        }
        problem = build_problem(parse_spec(json.dumps(doc)))
        assert problem.pair.boundary_band == 0


if __name__ == '__main__':
    pytest.main([__file__, "-v"])
