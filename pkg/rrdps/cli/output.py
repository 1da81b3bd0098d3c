from __future__ import annotations

import csv
import io
import logging
import os
import sys
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """CSV cell text; floats use repr so values round-trip exactly."""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(row[column]) for column in header])
    return buffer.getvalue()


def write_csv(
    header: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    path: Path | None = None,
) -> None:
    """Write to ``path`` atomically, or to stdout when no path is given."""
    text = render_csv(header, rows)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("wrote %s", path)
