import csv
import io
import logging
from typing import BinaryIO, Iterable, TextIO

from ..errors import TraceFormatError
from ..models import RECORD_FIELDS, Diagnostic, ParseResult, TraceRecord
from .records import TimestampReader, build_record

logger = logging.getLogger(__name__)


def _text_stream(stream: BinaryIO) -> TextIO:
    return io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")


def parse_csv(stream: BinaryIO) -> ParseResult:
    """Read a CSV trace with the fixed, header-validated column order."""
    result = ParseResult()
    timestamps = TimestampReader()
    text = _text_stream(stream)
    try:
        reader = csv.reader(text)
        header = None
        for row in reader:
            if not row:
                continue
            if header is None:
                header = [cell.strip() for cell in row]
                if tuple(header) != RECORD_FIELDS:
                    raise TraceFormatError(
                        f"line {reader.line_num}: invalid CSV header {','.join(header)!r}, "
                        f"expected {','.join(RECORD_FIELDS)!r}"
                    )
                continue

            line = reader.line_num
            if len(row) != len(RECORD_FIELDS):
                result.diagnostics.append(_diagnose(line, f"expected {len(RECORD_FIELDS)} fields, got {len(row)}"))
                continue

            outcome = build_record(dict(zip(RECORD_FIELDS, (c.strip() for c in row))), line, timestamps)
            if isinstance(outcome, TraceRecord):
                result.records.append(outcome)
            else:
                logger.warning(f"Skipping malformed record: {outcome}")
                result.diagnostics.append(outcome)
    except UnicodeDecodeError as e:
        raise TraceFormatError(f"input is not valid UTF-8: {e}") from e
    except csv.Error as e:
        raise TraceFormatError(f"unreadable CSV stream: {e}") from e
    finally:
        text.detach()

    logger.info(f"Parsed {len(result.records)} records from CSV ({result.malformed_count} malformed)")
    return result


def _diagnose(line: int, message: str) -> Diagnostic:
    diagnostic = Diagnostic(line, message)
    logger.warning(f"Skipping malformed record: {diagnostic}")
    return diagnostic


def write_csv(records: Iterable[TraceRecord], stream: TextIO) -> int:
    """Write records with a header row; timestamps as epoch seconds. Returns the row count."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    count = 0
    for record in records:
        writer.writerow([
            record.timestamp, record.user_id, repr(record.lat), repr(record.lon), record.operator,
            record.cell_id, record.lac, record.app, record.bytes_up, record.bytes_down,
        ])
        count += 1
    return count
