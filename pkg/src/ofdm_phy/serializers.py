"""Serializers for the ofdm_phy package.

This module writes run reports as CSV tables and JSON sidecars. CSV output is
byte-stable: ``\\n`` line endings, ``.`` decimal separator and every float
formatted with 12 significant digits.
"""

import csv
import io
import json
import math
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Any, TypeVar, cast

import numpy as np
from pydantic import BaseModel

from .harness import RunReport

M = TypeVar("M", bound=BaseModel)

# Float cells: 12 significant digits
FLOAT_FORMAT = ".12g"


class EnhancedJSONEncoder(json.JSONEncoder):
    """JSON encoder for report sidecars.

    Complex values become ``[re, im]`` pairs, the same form channel taps use
    in scenario files. numpy scalars and arrays become plain numbers and
    lists; enums, datetimes and paths become strings.
    """

    def default(self, obj: Any) -> Any:
        """Convert one value json cannot encode natively."""
        match obj:
            case BaseModel():
                return obj.model_dump()
            case complex() | np.complexfloating():
                return [float(obj.real), float(obj.imag)]
            case np.ndarray() if np.iscomplexobj(obj):
                return [[float(v.real), float(v.imag)] for v in obj.ravel()]
            case np.ndarray() | np.generic():
                return obj.tolist()
            case Enum():
                return obj.value
            case datetime() | date():
                return obj.isoformat()
            case Path():
                return str(obj)
        return super().default(obj)


def _dump(obj: Any, exclude_none: bool = False) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(exclude_none=exclude_none)
    if isinstance(obj, list):
        return [_dump(item, exclude_none) for item in obj]
    return obj


def to_json(
    obj: BaseModel | list[BaseModel] | dict[str, Any],
    pretty: bool = False,
    sort_keys: bool = False,
    encode_json: bool = True,
    **kwargs: Any,
) -> str | dict[str, Any]:
    """Serialize a report (or any model, list of models or dict).

    Non-finite floats are written as ``Infinity``/``NaN`` so that an
    ``inf`` SINR at zero offset survives a round trip through the sidecar.

    Args:
        obj: What to serialize
        pretty: Indent with two spaces
        sort_keys: Sort object keys
        encode_json: Return the JSON text; if False, return the plain data
        **kwargs: Passed to ``json.dumps``

    Returns:
        JSON text, or the dumped data when ``encode_json`` is False

    Examples:
        >>> sidecar = to_json(run_experiment(config), pretty=True)

    """
    data = _dump(obj)
    if not encode_json:
        return data
    return json.dumps(data, cls=EnhancedJSONEncoder, indent=2 if pretty else None, sort_keys=sort_keys, **kwargs)


def from_json(
    json_data: str | dict[str, Any] | list[dict[str, Any]], model_class: type[M], many: bool = False
) -> M | list[M]:
    """Validate JSON text or parsed data into ``model_class``.

    Raises:
        ValueError: If ``many`` is set and the data is not a list, or if
            validation fails (pydantic's ValidationError)

    Examples:
        >>> report = from_json(Path("runs/fig5.report.json").read_text(), RunReport)

    """
    data = json.loads(json_data) if isinstance(json_data, str) else json_data
    if not many:
        return model_class.model_validate(data)
    if not isinstance(data, list):
        raise ValueError("Expected a list of data when many=True")
    return [model_class.model_validate(item) for item in data]


def model_to_dict(
    obj: BaseModel | list[BaseModel], exclude_none: bool = False
) -> dict[str, Any] | list[dict[str, Any]]:
    """Dump a model (or list of models) to plain Python data."""
    return cast(dict[str, Any] | list[dict[str, Any]], _dump(obj, exclude_none))


def format_cell(value: Any) -> str:
    """Render one CSV cell: ints verbatim, floats with 12 significant digits."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool | int | np.integer):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, FLOAT_FORMAT)


def to_csv(report: RunReport, include_header: bool = True, include_notes: bool = True) -> str:
    """Render a report's table as CSV.

    Notes come first as ``# `` comment lines, then the header row with the
    unit-carrying column names, then one row per point.

    Args:
        report: The run report
        include_header: Whether to include the header row
        include_notes: Whether to include the ``#`` note lines

    Returns:
        CSV text with ``\\n`` line endings

    """
    output = io.StringIO(newline="")
    if include_notes:
        for note in report.notes:
            output.write(f"# {note}\n")
    writer = csv.writer(output, lineterminator="\n")
    if include_header:
        writer.writerow(report.columns)
    writer.writerows([format_cell(v) for v in row] for row in report.rows)
    return output.getvalue()


def from_csv(csv_data: str, has_header: bool = True) -> tuple[list[str], list[list[str]]]:
    r"""Parse a report CSV back into its header and raw string rows.

    Args:
        csv_data: CSV text, possibly starting with ``#`` note lines
        has_header: Whether the CSV has a header row

    Returns:
        Tuple of (column names, rows of cell strings)

    Examples:
        >>> columns, rows = from_csv("# note\nepsilon,ber\n0.1,0\n")

    """
    lines = [line for line in csv_data.splitlines() if line and not line.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        return [], []
    if has_header:
        return rows[0], rows[1:]
    return [], rows


def sidecar_path(out_path: str | Path) -> Path:
    """JSON sidecar next to a CSV: ``runs/a.csv`` -> ``runs/a.report.json``."""
    path = Path(out_path)
    return path.with_name(f"{path.stem}.report.json")


def write_report(report: RunReport, out_path: str | Path) -> tuple[Path, Path]:
    """Write the CSV table and its JSON sidecar.

    Returns:
        Tuple of (CSV path, sidecar path)

    """
    csv_path = Path(out_path)
    if csv_path.parent and not csv_path.parent.exists():
        csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(report))
    meta_path = sidecar_path(csv_path)
    meta_path.write_text(to_json(report, pretty=True), encoding="utf-8")
    return csv_path, meta_path
