"""Report rendering to JSON and CSV."""
import csv
import dataclasses
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

import config
from services.compute_service import RunReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "time_index",
    "time",
    "order",
    "gram_determinant",
    "normalizer",
    "u",
    "term",
    "cumulative",
    "degenerate",
]


class ReportService:
    """Service for turning run and suite reports into files."""

    def __init__(self, precision: int = config.DEFAULT_REPORT_PRECISION):
        """Initialize Report Service.

        Args:
            precision: significant digits kept for every float
        """
        self.precision = precision

    def round_float(self, value: float) -> float:
        if not np.isfinite(value):
            return float(value)
        return float(f"{value:.{self.precision}g}")

    def to_jsonable(self, obj: Any) -> Any:
        """Recursively convert dataclasses, tuples-keyed dicts and numpy values."""
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: self.to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, dict):
            return {self._key(k): self.to_jsonable(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple, set)):
            items = sorted(obj) if isinstance(obj, set) else obj
            return [self.to_jsonable(v) for v in items]
        if isinstance(obj, np.ndarray):
            return self.to_jsonable(obj.tolist())
        if isinstance(obj, (bool, np.bool_)):
            return bool(obj)
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        if isinstance(obj, (float, np.floating)):
            return self.round_float(float(obj))
        if isinstance(obj, complex):
            return [self.round_float(obj.real), self.round_float(obj.imag)]
        return obj

    @staticmethod
    def _key(key: Any) -> str:
        if isinstance(key, tuple):
            return ",".join(str(k) for k in key)
        return str(key)

    def to_json(self, report: Any) -> str:
        return json.dumps(self.to_jsonable(report), indent=2, sort_keys=True)

    def csv_rows(self, report: RunReport) -> List[Dict[str, Any]]:
        rows = []
        for record in report.records:
            bound = record.bound
            for n in bound.orders:
                rows.append(
                    {
                        "time_index": record.index,
                        "time": self.round_float(record.time),
                        "order": n,
                        "gram_determinant": self.round_float(bound.d_values[n]),
                        "normalizer": "" if bound.n_values[n] is None else self.round_float(bound.n_values[n]),
                        "u": "" if bound.u_values[n] is None else self.round_float(bound.u_values[n]),
                        "term": self.round_float(bound.terms[n]),
                        "cumulative": self.round_float(bound.cumulative_by_order[n]),
                        "degenerate": n in bound.degenerate_orders,
                    }
                )
        return rows

    def to_csv(self, report: RunReport) -> str:
        """One row per (time, odd order)."""
        rows = self.csv_rows(report)
        if not rows:
            raise ValueError("Cannot generate CSV from an empty report")
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        return buffer.getvalue()

    def render(self, report: Any, fmt: str = "json") -> str:
        if fmt not in config.REPORT_FORMATS:
            raise ValueError(f"Unknown report format {fmt!r}")
        if fmt == "csv":
            if not isinstance(report, RunReport):
                raise ValueError("CSV output is only available for compute reports")
            return self.to_csv(report)
        return self.to_json(report)

    def write(self, report: Any, path: Optional[str] = None, fmt: str = "json") -> str:
        """Render ``report`` and write it to ``path`` (stdout when None).

        Returns:
            The rendered text
        """
        text = self.render(report, fmt)
        if path is None:
            print(text)
            return text
        try:
            target = Path(path)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text + "\n", encoding="utf-8")
            logger.info(f"Wrote {fmt} report to {target}")
        except OSError as e:
            logger.error(f"Failed to write report to {path}: {e}")
            raise
        return text
