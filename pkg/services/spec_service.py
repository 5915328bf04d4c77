"""Problem specification parsing and serialization.

A spec is a JSON document:

    {
      "schema_version": 1,
      "dimension": 2,
      "hamiltonian": {"kind": "explicit", "matrix": [[0, 0.5], [0.5, 0]]},
      "state": {"kind": "diagonal", "weights": [0.75, 0.25]},
      "estimator": null,
      "times": [0.0],
      "orders": [1, 3],
      "include_even_order_2": false,
      "tolerances": {"degeneracy": 1e-10, "report_precision": 12}
    }

Matrix entries are numbers or ``[re, im]`` pairs.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

import config
from services.errors import DimensionMismatch, QcrbError, SchemaError
from services.matcore import HermitianOperator
from services.states import make_density

logger = logging.getLogger(__name__)

MatrixRows = Tuple[Tuple[complex, ...], ...]

HAMILTONIAN_KINDS = ("explicit", "gue", "oscillator")
STATE_KINDS = ("explicit", "ginibre", "diagonal", "pure_haar")
ESTIMATOR_KINDS = ("explicit", "conjugate")


@dataclass(frozen=True)
class HamiltonianSource:
    kind: str
    seed: Optional[int] = None
    matrix: Optional[MatrixRows] = None


@dataclass(frozen=True)
class StateSource:
    kind: str
    seed: Optional[int] = None
    matrix: Optional[MatrixRows] = None
    weights: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class EstimatorSource:
    kind: str
    matrix: Optional[MatrixRows] = None


@dataclass(frozen=True)
class Tolerances:
    degeneracy: float = config.DEGENERACY_THRESHOLD
    report_precision: int = config.DEFAULT_REPORT_PRECISION


@dataclass(frozen=True)
class ProblemSpec:
    dimension: int
    hamiltonian: HamiltonianSource
    state: StateSource
    estimator: Optional[EstimatorSource] = None
    times: Tuple[float, ...] = (0.0,)
    orders: Tuple[int, ...] = config.DEFAULT_ORDERS
    include_even_order_2: bool = False
    tolerances: Tolerances = field(default_factory=Tolerances)
    schema_version: int = config.SCHEMA_VERSION

    @property
    def odd_orders(self) -> Tuple[int, ...]:
        return tuple(n for n in self.orders if n % 2 == 1)

    @property
    def n_max(self) -> int:
        """Highest odd order requested (at least 1)."""
        return max(self.odd_orders, default=1)


def matrix_to_array(rows: MatrixRows) -> np.ndarray:
    return np.array(rows, dtype=complex)


def _check_keys(obj: Dict[str, Any], path: str, required: Tuple[str, ...], optional: Tuple[str, ...] = ()) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"{path}.{key}", "unknown field")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "missing required field")


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _parse_int(value: Any, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, "expected an integer")
    if value < minimum:
        raise SchemaError(path, f"must be >= {minimum}")
    return value


def _parse_entry(value: Any, path: str) -> complex:
    if _is_number(value):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value):
        return complex(value[0], value[1])
    raise SchemaError(path, "matrix entry must be a finite number or [re, im]")


def _parse_matrix(value: Any, path: str, dimension: int) -> MatrixRows:
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise SchemaError(path, "matrix must be a list of rows")
    if len(value) != dimension or any(len(row) != dimension for row in value):
        shape = (len(value), max((len(row) for row in value), default=0))
        raise DimensionMismatch(f"{path}: expected {dimension}x{dimension} matrix, got {shape}")
    return tuple(
        tuple(_parse_entry(entry, f"{path}[{i}][{j}]") for j, entry in enumerate(row))
        for i, row in enumerate(value)
    )


def _check_hermitian(rows: MatrixRows, path: str) -> None:
    try:
        HermitianOperator.from_matrix(matrix_to_array(rows))
    except QcrbError as e:
        raise SchemaError(path, str(e)) from e


def _parse_hamiltonian(obj: Any, dimension: int) -> HamiltonianSource:
    path = "$.hamiltonian"
    if not isinstance(obj, dict) or obj.get("kind") not in HAMILTONIAN_KINDS:
        raise SchemaError(f"{path}.kind", f"expected one of {HAMILTONIAN_KINDS}")
    kind = obj["kind"]
    if kind == "explicit":
        _check_keys(obj, path, ("kind", "matrix"))
        rows = _parse_matrix(obj["matrix"], f"{path}.matrix", dimension)
        _check_hermitian(rows, f"{path}.matrix")
        return HamiltonianSource(kind=kind, matrix=rows)
    if kind == "gue":
        _check_keys(obj, path, ("kind", "seed"))
        return HamiltonianSource(kind=kind, seed=_parse_int(obj["seed"], f"{path}.seed"))
    _check_keys(obj, path, ("kind",))
    if dimension < config.MIN_CONJUGATE_DIM:
        raise SchemaError(f"{path}.kind", f"oscillator needs dimension >= {config.MIN_CONJUGATE_DIM}")
    return HamiltonianSource(kind=kind)


def _parse_state(obj: Any, dimension: int) -> StateSource:
    path = "$.state"
    if not isinstance(obj, dict) or obj.get("kind") not in STATE_KINDS:
        raise SchemaError(f"{path}.kind", f"expected one of {STATE_KINDS}")
    kind = obj["kind"]
    if kind == "explicit":
        _check_keys(obj, path, ("kind", "matrix"))
        rows = _parse_matrix(obj["matrix"], f"{path}.matrix", dimension)
        try:
            make_density(matrix_to_array(rows))
        except QcrbError as e:
            raise SchemaError(f"{path}.matrix", str(e)) from e
        return StateSource(kind=kind, matrix=rows)
    if kind == "diagonal":
        _check_keys(obj, path, ("kind", "weights"))
        weights = obj["weights"]
        if not isinstance(weights, list) or not all(_is_number(w) for w in weights):
            raise SchemaError(f"{path}.weights", "expected a list of numbers")
        if len(weights) != dimension:
            raise DimensionMismatch(f"{path}.weights: expected {dimension} weights, got {len(weights)}")
        if any(w < 0 for w in weights):
            raise SchemaError(f"{path}.weights", "weights must be non-negative")
        total = float(sum(weights))
        if abs(total - 1.0) > config.TRACE_RENORM_TOL:
            raise SchemaError(f"{path}.weights", f"weights sum to {total:.12g}, not 1")
        # renormalized by make_density when the state is built
        return StateSource(kind=kind, weights=tuple(float(w) for w in weights))
    _check_keys(obj, path, ("kind", "seed"))
    return StateSource(kind=kind, seed=_parse_int(obj["seed"], f"{path}.seed"))


def _parse_estimator(obj: Any, dimension: int, hamiltonian: HamiltonianSource) -> Optional[EstimatorSource]:
    path = "$.estimator"
    if obj is None:
        return None
    if not isinstance(obj, dict) or obj.get("kind") not in ESTIMATOR_KINDS:
        raise SchemaError(f"{path}.kind", f"expected one of {ESTIMATOR_KINDS} or null")
    if obj["kind"] == "explicit":
        _check_keys(obj, path, ("kind", "matrix"))
        rows = _parse_matrix(obj["matrix"], f"{path}.matrix", dimension)
        _check_hermitian(rows, f"{path}.matrix")
        return EstimatorSource(kind="explicit", matrix=rows)
    _check_keys(obj, path, ("kind",))
    if hamiltonian.kind != "oscillator":
        raise SchemaError(f"{path}.kind", "conjugate estimator requires the oscillator hamiltonian")
    return EstimatorSource(kind="conjugate")


def _parse_orders(value: Any, include_even: bool, path: str = "$.orders") -> Tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list of orders")
    orders = []
    for i, n in enumerate(value):
        n = _parse_int(n, f"{path}[{i}]", minimum=1)
        if n % 2 == 0 and not (include_even and n == 2):
            raise SchemaError(f"{path}[{i}]", f"even order {n} is not allowed")
        orders.append(n)
    return tuple(sorted(set(orders)))


def parse_orders_arg(text: str, include_even: bool = False) -> Tuple[int, ...]:
    """Parse a CLI override such as ``1,3,5``."""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise SchemaError("--orders", f"not a comma-separated integer list: {text!r}") from e
    return _parse_orders(values, include_even, path="--orders")


def _parse_times(value: Any) -> Tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError("$.times", "expected a non-empty list of times")
    for i, t in enumerate(value):
        if not _is_number(t):
            raise SchemaError(f"$.times[{i}]", "time must be a finite number")
    return tuple(float(t) for t in value)


def _parse_tolerances(obj: Any) -> Tolerances:
    if obj is None:
        return Tolerances()
    _check_keys(obj, "$.tolerances", (), ("degeneracy", "report_precision"))
    degeneracy = obj.get("degeneracy", config.DEGENERACY_THRESHOLD)
    if not _is_number(degeneracy) or not 0.0 <= degeneracy < 1.0:
        raise SchemaError("$.tolerances.degeneracy", "must be a number in [0, 1)")
    precision = _parse_int(obj.get("report_precision", config.DEFAULT_REPORT_PRECISION), "$.tolerances.report_precision", minimum=1)
    if precision > 17:
        raise SchemaError("$.tolerances.report_precision", "must be <= 17")
    return Tolerances(degeneracy=float(degeneracy), report_precision=precision)


def parse_spec(text: Union[str, bytes]) -> ProblemSpec:
    """Parse and validate a problem specification.

    Args:
        text: JSON document

    Returns:
        ProblemSpec

    Raises:
        SchemaError: malformed document, unknown field, invalid value
        DimensionMismatch: explicit matrix or weight list of the wrong size
    """
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SchemaError("$", f"invalid JSON: {e}") from e

    _check_keys(
        doc,
        "$",
        ("dimension", "hamiltonian", "state"),
        ("schema_version", "estimator", "times", "orders", "include_even_order_2", "tolerances"),
    )
    version = doc.get("schema_version", config.SCHEMA_VERSION)
    if version != config.SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"unsupported version {version!r}")

    dimension = _parse_int(doc["dimension"], "$.dimension", minimum=2)
    include_even = doc.get("include_even_order_2", False)
    if not isinstance(include_even, bool):
        raise SchemaError("$.include_even_order_2", "expected a boolean")

    hamiltonian = _parse_hamiltonian(doc["hamiltonian"], dimension)
    state = _parse_state(doc["state"], dimension)
    estimator = _parse_estimator(doc.get("estimator"), dimension, hamiltonian)
    if include_even and estimator is None:
        raise SchemaError("$.include_even_order_2", "the even term needs an estimator")

    spec = ProblemSpec(
        dimension=dimension,
        hamiltonian=hamiltonian,
        state=state,
        estimator=estimator,
        times=_parse_times(doc.get("times", [0.0])),
        orders=_parse_orders(doc.get("orders", list(config.DEFAULT_ORDERS)), include_even),
        include_even_order_2=include_even,
        tolerances=_parse_tolerances(doc.get("tolerances")),
        schema_version=version,
    )
    logger.debug(f"parse_spec: dimension {dimension}, orders {spec.orders}, {len(spec.times)} times")
    return spec


def _encode_matrix(rows: MatrixRows) -> List[List[List[float]]]:
    return [[[entry.real, entry.imag] for entry in row] for row in rows]


def spec_to_dict(spec: ProblemSpec) -> Dict[str, Any]:
    hamiltonian: Dict[str, Any] = {"kind": spec.hamiltonian.kind}
    if spec.hamiltonian.kind == "explicit":
        hamiltonian["matrix"] = _encode_matrix(spec.hamiltonian.matrix)
    elif spec.hamiltonian.kind == "gue":
        hamiltonian["seed"] = spec.hamiltonian.seed

    state: Dict[str, Any] = {"kind": spec.state.kind}
    if spec.state.kind == "explicit":
        state["matrix"] = _encode_matrix(spec.state.matrix)
    elif spec.state.kind == "diagonal":
        state["weights"] = list(spec.state.weights)
    else:
        state["seed"] = spec.state.seed

    estimator: Optional[Dict[str, Any]] = None
    if spec.estimator is not None:
        estimator = {"kind": spec.estimator.kind}
        if spec.estimator.kind == "explicit":
            estimator["matrix"] = _encode_matrix(spec.estimator.matrix)

    return {
        "schema_version": spec.schema_version,
        "dimension": spec.dimension,
        "hamiltonian": hamiltonian,
        "state": state,
        "estimator": estimator,
        "times": list(spec.times),
        "orders": list(spec.orders),
        "include_even_order_2": spec.include_even_order_2,
        "tolerances": {
            "degeneracy": spec.tolerances.degeneracy,
            "report_precision": spec.tolerances.report_precision,
        },
    }


def serialize_spec(spec: ProblemSpec) -> str:
    """Canonical JSON text; parse_spec(serialize_spec(s)) == s."""
    return json.dumps(spec_to_dict(spec), sort_keys=True, indent=2)
