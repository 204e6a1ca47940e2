import json
import os
from typing import Any, Dict, Optional

from src.config import PROJECT_ROOT
from src.data.schemas import CountsTable
from src.data.trial_log import counts_from_table
from src.utils.logger import logger

# Counts published with the ion-trap experiment.
REFERENCE_PATH = os.path.join(PROJECT_ROOT, "src", "data", "reference_counts.json")


def load_reference_data(json_path: Optional[str] = None) -> Dict[str, Any]:
    """Load the raw reference document (rows, provenance and reported figures)."""
    if json_path is None:
        json_path = REFERENCE_PATH
    with open(json_path, encoding="utf-8") as f:
        data = json.load(f)
    logger.debug(f"Loaded reference data from {json_path}")
    return data


def reference_counts(json_path: Optional[str] = None) -> CountsTable:
    """The sixteen published counts as a CountsTable."""
    data = load_reference_data(json_path)
    rows = {(row["x"], row["y"]): row["counts"] for row in data["rows"]}
    counts = counts_from_table(rows)
    for row in data["rows"]:
        if counts.total(row["x"], row["y"]) != row["total"]:
            raise ValueError(
                f"Reference row {(row['x'], row['y'])} does not add up to {row['total']}"
            )
    return counts


def reference_rotations_deg(json_path: Optional[str] = None) -> Dict[str, tuple]:
    """Measurement phases per input, as listed in the rotation column of the published data."""
    data = load_reference_data(json_path)
    phi_a = {row["x"]: row["rotations_deg"][0] for row in data["rows"]}
    phi_b = {row["y"]: row["rotations_deg"][1] for row in data["rows"]}
    return {"phi_a": (phi_a[0], phi_a[1]), "phi_b": (phi_b[0], phi_b[1])}


def reported_values(json_path: Optional[str] = None) -> Dict[str, Any]:
    return load_reference_data(json_path)["reported"]
