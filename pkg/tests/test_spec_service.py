"""
Unit tests for problem spec parsing, validation and serialization.
"""
import json
import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import config
from services.errors import DimensionMismatch, SchemaError
from services.spec_service import parse_orders_arg, parse_spec, serialize_spec

SPECS_DIR = project_root / "data" / "specs"


def qubit_doc(**overrides):
    doc = {
        "dimension": 2,
        "hamiltonian": {"kind": "explicit", "matrix": [[0, 0.5], [0.5, 0]]},
        "state": {"kind": "diagonal", "weights": [0.75, 0.25]},
    }
    doc.update(overrides)
    return doc


def parse(doc):
    return parse_spec(json.dumps(doc))


class TestParseSpec:
    """Accepted documents and defaults."""

    def test_minimal_qubit(self):
        """Defaults fill in times, orders and tolerances."""
        spec = parse(qubit_doc())
        assert spec.dimension == 2
        assert spec.times == (0.0,)
        assert spec.orders == config.DEFAULT_ORDERS
        assert spec.estimator is None
        assert spec.tolerances.degeneracy == config.DEGENERACY_THRESHOLD
        assert spec.n_max == 3

    def test_complex_entries(self):
        """[re, im] pairs become complex numbers."""
        doc = qubit_doc(hamiltonian={"kind": "explicit", "matrix": [[0, [0, -0.5]], [[0, 0.5], 0]]})
        spec = parse(doc)
        assert spec.hamiltonian.matrix[0][1] == -0.5j

    def test_orders_sorted_and_deduplicated(self):
        """[5, 1, 3, 1] becomes (1, 3, 5)."""
        assert parse(qubit_doc(orders=[5, 1, 3, 1])).orders == (1, 3, 5)

    def test_even_order_with_flag(self):
        """Order 2 is allowed once the flag and an estimator are present."""
        doc = qubit_doc(
            orders=[1, 2, 3],
            include_even_order_2=True,
            estimator={"kind": "explicit", "matrix": [[1, 0], [0, -1]]},
        )
        spec = parse(doc)
        assert spec.orders == (1, 2, 3)
        assert spec.odd_orders == (1, 3)

    @pytest.mark.parametrize("name", ["qubit_smoke.json", "oscillator_thermal.json", "random_mixed.json"])
    def test_bundled_specs_parse(self, name):
        """Every shipped example is valid."""
        parse_spec((SPECS_DIR / name).read_text(encoding="utf-8"))


class TestValidation:
    """Rejected documents carry a JSON path."""

    def test_even_order_without_flag(self):
        """orders [2] needs include_even_order_2."""
        with pytest.raises(SchemaError) as excinfo:
            parse(qubit_doc(orders=[2]))
        assert excinfo.value.path == "$.orders[0]"

    def test_even_order_four_always_rejected(self):
        """Only order 2 has an even term."""
        doc = qubit_doc(
            orders=[4],
            include_even_order_2=True,
            estimator={"kind": "explicit", "matrix": [[1, 0], [0, -1]]},
        )
        with pytest.raises(SchemaError):
            parse(doc)

    def test_unknown_field(self):
        """Unknown top-level fields are rejected."""
        with pytest.raises(SchemaError) as excinfo:
            parse(qubit_doc(colour="blue"))
        assert excinfo.value.path == "$.colour"

    def test_missing_required_field(self):
        """state is required."""
        doc = qubit_doc()
        del doc["state"]
        with pytest.raises(SchemaError) as excinfo:
            parse(doc)
        assert excinfo.value.path == "$.state"

    def test_weights_not_normalized(self):
        """[0.6, 0.6] sums to 1.2."""
        with pytest.raises(SchemaError) as excinfo:
            parse(qubit_doc(state={"kind": "diagonal", "weights": [0.6, 0.6]}))
        assert excinfo.value.path == "$.state.weights"

    def test_negative_weight(self):
        """Weights must be non-negative."""
        with pytest.raises(SchemaError):
            parse(qubit_doc(state={"kind": "diagonal", "weights": [1.1, -0.1]}))

    def test_wrong_matrix_dimension(self):
        """A 3x3 matrix in a dimension-2 spec."""
        with pytest.raises(DimensionMismatch):
            parse(qubit_doc(hamiltonian={"kind": "explicit", "matrix": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}))

    def test_wrong_weight_count(self):
        """Three weights for two levels."""
        with pytest.raises(DimensionMismatch):
            parse(qubit_doc(state={"kind": "diagonal", "weights": [0.5, 0.25, 0.25]}))

    def test_non_hermitian_hamiltonian(self):
        """Explicit generators must be Hermitian."""
        with pytest.raises(SchemaError) as excinfo:
            parse(qubit_doc(hamiltonian={"kind": "explicit", "matrix": [[0, 1], [0, 0]]}))
        assert excinfo.value.path == "$.hamiltonian.matrix"

    def test_conjugate_needs_oscillator(self):
        """The conjugate estimator only exists for the oscillator."""
        with pytest.raises(SchemaError) as excinfo:
            parse(qubit_doc(estimator={"kind": "conjugate"}))
        assert excinfo.value.path == "$.estimator.kind"

    def test_oscillator_minimum_dimension(self):
        """The oscillator needs at least 8 levels."""
        doc = qubit_doc(hamiltonian={"kind": "oscillator"})
        with pytest.raises(SchemaError):
            parse(doc)

    def test_even_flag_needs_estimator(self):
        """include_even_order_2 without an estimator."""
        with pytest.raises(SchemaError) as excinfo:
            parse(qubit_doc(include_even_order_2=True))
        assert excinfo.value.path == "$.include_even_order_2"

    def test_unsupported_schema_version(self):
        """Only version 1 is understood."""
        with pytest.raises(SchemaError):
            parse(qubit_doc(schema_version=2))

    def test_non_finite_time(self):
        """Times must be finite numbers."""
        with pytest.raises(SchemaError):
            parse_spec('{"dimension": 2, "hamiltonian": {"kind": "gue", "seed": 1},'
                       ' "state": {"kind": "ginibre", "seed": 2}, "times": [0.0, Infinity]}')

    def test_invalid_json(self):
        """Malformed text is a schema error at the root."""
        with pytest.raises(SchemaError) as excinfo:
            parse_spec("{not json")
        assert excinfo.value.path == "$"


class TestSerialization:
    """Canonical JSON."""

    @pytest.mark.parametrize("name", ["qubit_smoke.json", "oscillator_thermal.json", "random_mixed.json"])
    def test_round_trip(self, name):
        """parse(serialize(s)) == s."""
        spec = parse_spec((SPECS_DIR / name).read_text(encoding="utf-8"))
        assert parse_spec(serialize_spec(spec)) == spec

    def test_round_trip_complex_matrix(self):
        """Complex explicit matrices survive serialization."""
        doc = qubit_doc(hamiltonian={"kind": "explicit", "matrix": [[0.1, [0, -0.5]], [[0, 0.5], -0.1]]})
        spec = parse(doc)
        assert parse_spec(serialize_spec(spec)) == spec

    def test_serialization_is_stable(self):
        """Equal specs serialize to identical text."""
        assert serialize_spec(parse(qubit_doc(orders=[3, 1]))) == serialize_spec(parse(qubit_doc(orders=[1, 3])))


class TestOrdersArgument:
    """--orders override."""

    def test_comma_list(self):
        assert parse_orders_arg("5,1,3") == (1, 3, 5)

    def test_garbage(self):
        with pytest.raises(SchemaError):
            parse_orders_arg("1,three")

    def test_even_rejected(self):
        with pytest.raises(SchemaError):
            parse_orders_arg("1,2")


if __name__ == '__main__':
    pytest.main([__file__, "-v"])
