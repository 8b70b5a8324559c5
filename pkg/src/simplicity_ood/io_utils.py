"""Artifact emission helpers: atomic writes and canonical number formatting.

Every artifact ends with a trailing newline; CSV floats carry 17
significant digits so re-runs are byte-comparable; JSON keys are sorted.
Non-finite values must be converted to JSON-safe encodings ("inf" strings
or null) before dumping.
"""

import json
import os
import tempfile


def fmt(value: float) -> str:
    """17-significant-digit decimal rendering (round-trips doubles)."""
    return f"{value:.17g}"


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
