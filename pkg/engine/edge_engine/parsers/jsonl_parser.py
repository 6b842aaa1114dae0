import io
import json
import logging
from typing import BinaryIO, Iterable, TextIO

from ..errors import TraceFormatError
from ..models import RECORD_FIELDS, Diagnostic, ParseResult, TraceRecord
from .records import TimestampReader, build_record

logger = logging.getLogger(__name__)

_TEXT_FIELDS = ("user_id", "operator", "cell_id", "lac", "app")


def parse_jsonl(stream: BinaryIO) -> ParseResult:
    """Read a JSONL trace: one object per line with the CSV column names as keys."""
    result = ParseResult()
    timestamps = TimestampReader()
    text = io.TextIOWrapper(stream, encoding="utf-8")
    try:
        for line_no, raw in enumerate(text, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                _skip(result, Diagnostic(line_no, f"invalid JSON: {e.msg}"))
                continue
            if not isinstance(obj, dict):
                _skip(result, Diagnostic(line_no, "expected a JSON object"))
                continue

            unknown = sorted(set(obj) - set(RECORD_FIELDS))
            if unknown:
                _skip(result, Diagnostic(line_no, f"unknown field(s): {', '.join(unknown)}"))
                continue

            # Identifiers are opaque text even when a producer emits them as numbers.
            for key in _TEXT_FIELDS:
                if isinstance(obj.get(key), int) and not isinstance(obj.get(key), bool):
                    obj[key] = str(obj[key])

            outcome = build_record(obj, line_no, timestamps)
            if isinstance(outcome, TraceRecord):
                result.records.append(outcome)
            else:
                _skip(result, outcome)
    except UnicodeDecodeError as e:
        raise TraceFormatError(f"input is not valid UTF-8: {e}") from e
    finally:
        text.detach()

    logger.info(f"Parsed {len(result.records)} records from JSONL ({result.malformed_count} malformed)")
    return result


def _skip(result: ParseResult, diagnostic: Diagnostic) -> None:
    logger.warning(f"Skipping malformed record: {diagnostic}")
    result.diagnostics.append(diagnostic)


def write_jsonl(records: Iterable[TraceRecord], stream: TextIO) -> int:
    count = 0
    for record in records:
        stream.write(json.dumps(record.model_dump(), separators=(",", ":")) + "\n")
        count += 1
    return count
