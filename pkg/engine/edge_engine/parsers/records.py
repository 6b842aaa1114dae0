"""
Shared field handling for the trace readers: timestamp detection and
conversion of raw field mappings into validated TraceRecords.
"""

import logging
import re
from datetime import datetime, timezone
from typing import Any, Dict, Literal, Optional, Union

from pydantic import ValidationError

from ..errors import TraceFormatError
from ..models import Diagnostic, TraceRecord

logger = logging.getLogger(__name__)

_EPOCH_RE = re.compile(r"^\s*-?\d+\s*$")

TimestampForm = Literal["epoch", "rfc3339"]


class TimestampReader:
    """Converts timestamps to UTC epoch seconds, locking onto one form per file.

    The first readable timestamp decides whether the file uses integer epoch
    seconds or RFC 3339 text; any later timestamp in the other form is fatal.
    """

    def __init__(self):
        self.form: Optional[TimestampForm] = None

    def _lock(self, form: TimestampForm, line: int) -> None:
        if self.form is None:
            self.form = form
            logger.debug(f"Timestamp form detected at line {line}: {form}")
        elif self.form != form:
            raise TraceFormatError(
                f"line {line}: mixed timestamp forms in one file ({self.form} then {form})"
            )

    def read(self, value: Any, line: int) -> int:
        if isinstance(value, bool):
            raise ValueError("invalid timestamp")
        if isinstance(value, int):
            self._lock("epoch", line)
            return value
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError("invalid timestamp")
            self._lock("epoch", line)
            return int(value)
        if not isinstance(value, str):
            raise ValueError("invalid timestamp")

        if _EPOCH_RE.match(value):
            self._lock("epoch", line)
            return int(value.strip())

        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            parsed = datetime.fromisoformat(text)
        except ValueError:
            raise ValueError("invalid timestamp")
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        self._lock("rfc3339", line)
        return int(parsed.astimezone(timezone.utc).timestamp())


def _describe(error: ValidationError) -> str:
    parts = []
    for err in error.errors():
        msg = str(err.get("msg", "invalid value"))
        loc = ".".join(str(p) for p in err.get("loc", ()))
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        elif err.get("type") == "missing":
            msg = f"missing field '{loc}'"
        elif loc:
            msg = f"{loc}: {msg}"
        parts.append(msg)
    return "; ".join(parts)


def build_record(
    fields: Dict[str, Any], line: int, timestamps: TimestampReader
) -> Union[TraceRecord, Diagnostic]:
    """Validate one line's fields; problems become a Diagnostic instead of raising."""
    data = dict(fields)
    if data.get("timestamp") in (None, ""):
        return Diagnostic(line, "missing field 'timestamp'")
    try:
        data["timestamp"] = timestamps.read(data.get("timestamp"), line)
    except ValueError as e:
        return Diagnostic(line, str(e))
    try:
        return TraceRecord(**data)
    except ValidationError as e:
        return Diagnostic(line, _describe(e))
