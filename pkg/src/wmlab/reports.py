"""Line-oriented ``key=value`` reports.

Nested keys are flattened with dots and floats are written with fixed precision. Every report carries
a single ``timestamp=`` line, which is the only line allowed to differ between reproduced runs.
"""

from collections.abc import Mapping, Sequence
from datetime import datetime
from pathlib import Path
from typing import Any

import pandas as pd

from wmlab.types import PathLike
from wmlab.utils.dict import flatten_nested_dict
from wmlab.utils.io import ResultWriter

TIMESTAMP_KEY = "timestamp"
FLOAT_PRECISION = 6


def format_value(value: Any) -> str:
    match value:
        case None:
            return "none"
        case bool():
            return "true" if value else "false"
        case float():
            return f"{value:.{FLOAT_PRECISION}f}"
        case list() | tuple():
            return ",".join(format_value(v) for v in value)
        case _:
            return str(value).replace("\n", " ")


def render_report(data: Mapping[str, Any], timestamp: str | None = None) -> str:
    timestamp = timestamp or datetime.now().isoformat(timespec="seconds")
    lines = [f"{TIMESTAMP_KEY}={timestamp}"]
    lines.extend(f"{k}={format_value(v)}" for k, v in flatten_nested_dict(data).items())
    return "".join(line + "\n" for line in lines)


def write_report(
    writer: ResultWriter,
    name: str,
    data: Mapping[str, Any],
    timestamp: str | None = None,
) -> str:
    return writer.write_text_file(
        name,
        render_report(data, timestamp),
        extension_to_add="txt",
        content_description=f"{name} report",
    )


def read_report(path: PathLike) -> dict[str, str]:
    result = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            result[key] = value
    return result


def without_timestamp(report_text: str) -> str:
    """The report without its timestamp line, for reproducibility comparisons."""
    return "".join(
        line + "\n"
        for line in report_text.splitlines()
        if not line.startswith(f"{TIMESTAMP_KEY}=")
    )


SUMMARY_KEYS = [
    "verdict",
    "wer",
    "cer",
    "ber",
    "clean_after.cer",
    "owner_extraction.verdict",
    "owner_extraction.ber",
]


def summary_table(
    report_paths: Sequence[PathLike], keys: Sequence[str] = SUMMARY_KEYS
) -> pd.DataFrame:
    """One row per report with the given keys; keys a report lacks are left empty."""
    rows = []
    for path in report_paths:
        report = read_report(path)
        rows.append({"report": Path(path).stem, **{k: report.get(k, "") for k in keys}})
    df = pd.DataFrame(rows, columns=["report", *keys])
    return df.loc[:, (df != "").any(axis=0)]
