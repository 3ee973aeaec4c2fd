"""CSV and JSON report emission."""

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .config import format_float
from .exceptions import ConfigurationError, EmptyReportError, NumericalError

logger = logging.getLogger(__name__)

Row = Tuple[Any, ...]


@dataclass
class ExperimentResult:
    """Rows of one experiment plus the provenance written above them."""

    kind: str
    columns: Tuple[str, ...]
    rows: List[Row]
    header: Dict[str, Any] = field(default_factory=dict)
    scenario: Optional[Dict[str, Any]] = None
    details: Any = None


def _check_finite(result: ExperimentResult) -> None:
    for row in result.rows:
        for column, value in zip(result.columns, row):
            if isinstance(value, float) and not math.isfinite(value):
                raise NumericalError(column, f"{result.kind} report value {value}")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def render_csv(result: ExperimentResult) -> str:
    """Provenance lines ``# key = value``, then the header row and data rows."""
    buffer = io.StringIO()
    for key, value in result.header.items():
        buffer.write(f"# {key} = {_cell(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        if len(row) != len(result.columns):
            raise ValueError(
                f"row has {len(row)} cells, expected {len(result.columns)}"
            )
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def render_json(result: ExperimentResult) -> str:
    """JSON mirror with the resolved scenario embedded."""
    document = {
        "kind": result.kind,
        "header": {key: _cell(value) for key, value in result.header.items()},
        "columns": list(result.columns),
        "rows": [
            {column: value for column, value in zip(result.columns, row)}
            for row in result.rows
        ],
        "scenario": result.scenario,
    }
    return json.dumps(document, indent=2) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle, temp_name = tempfile.mkstemp(
            dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
        )
        try:
            with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
                stream.write(text)
            os.replace(temp_name, path)
        except BaseException:
            if os.path.exists(temp_name):
                os.unlink(temp_name)
            raise
    except OSError as exc:
        raise ConfigurationError(f"cannot write report {path}: {exc}", "--out") from exc


def emit_report(
    result: ExperimentResult,
    out_dir: Union[str, Path],
    formats: Sequence[str] = ("csv", "json"),
    stem: Optional[str] = None,
) -> List[Path]:
    """Write the report files; nothing is written when validation fails."""
    if not result.rows:
        raise EmptyReportError(f"No rows to emit for the {result.kind} report")
    _check_finite(result)
    renderers = {"csv": render_csv, "json": render_json}
    unknown = [fmt for fmt in formats if fmt not in renderers]
    if unknown:
        raise ConfigurationError(f"unknown report formats {unknown}; use csv or json")

    rendered = {fmt: renderers[fmt](result) for fmt in formats}
    directory = Path(out_dir)
    name = stem or result.kind
    written = []
    for fmt, text in rendered.items():
        path = directory / f"{name}.{fmt}"
        _atomic_write(path, text)
        written.append(path)
        logger.info("wrote %s (%d rows)", path, len(result.rows))
    return written
