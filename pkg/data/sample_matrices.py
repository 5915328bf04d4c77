"""Generate random matrix documents for the sample command."""
import json
import logging
from pathlib import Path
from typing import Any, Dict

import numpy as np

import config
from services.states import random_hamiltonian, random_mixed, random_pure

logger = logging.getLogger(__name__)

ENSEMBLES = ("gue", "ginibre", "pure_haar")


def generate_matrix(dim: int, ensemble: str, seed: int) -> np.ndarray:
    """Draw one matrix from the named ensemble."""
    if ensemble == "gue":
        return random_hamiltonian(dim, seed).matrix
    if ensemble == "ginibre":
        return random_mixed(dim, seed).matrix
    if ensemble == "pure_haar":
        return random_pure(dim, seed).matrix
    raise ValueError(f"Unknown ensemble {ensemble!r}, expected one of {ENSEMBLES}")


def sample_document(dim: int, ensemble: str, seed: int) -> Dict[str, Any]:
    """Matrix document whose ``matrix`` field can be pasted into a spec."""
    matrix = generate_matrix(dim, ensemble, seed)
    return {
        "schema_version": config.SCHEMA_VERSION,
        "ensemble": ensemble,
        "seed": seed,
        "dimension": dim,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in matrix],
    }


def write_sample(dim: int, ensemble: str, seed: int, filename: str) -> Dict[str, Any]:
    """Write a sample document to ``filename``."""
    document = sample_document(dim, ensemble, seed)
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Generated {ensemble} sample (dim {dim}, seed {seed}) in {filename}")
    return document


if __name__ == "__main__":
    write_sample(4, "ginibre", 7, "sample_state.json")
