from pathlib import Path
from typing import BinaryIO, Callable, Iterable, TextIO, Union

from ..models import ParseResult, TraceRecord
from .csv_parser import parse_csv, write_csv
from .jsonl_parser import parse_jsonl, write_jsonl

TRACE_FORMATS = ("csv", "jsonl")


def get_parser(trace_format: str) -> Callable[[BinaryIO], ParseResult]:
    if trace_format == "csv":
        return parse_csv
    elif trace_format == "jsonl":
        return parse_jsonl
    else:
        raise ValueError(f"Unsupported trace format: {trace_format}")


def get_writer(trace_format: str) -> Callable[[Iterable[TraceRecord], TextIO], int]:
    if trace_format == "csv":
        return write_csv
    elif trace_format == "jsonl":
        return write_jsonl
    else:
        raise ValueError(f"Unsupported trace format: {trace_format}")


def detect_format(path: Union[str, Path]) -> str:
    """Trace format from the file extension (``.jsonl``/``.ndjson`` vs. anything else)."""
    suffix = Path(path).suffix.lower()
    return "jsonl" if suffix in (".jsonl", ".ndjson") else "csv"


def parse_records(stream: BinaryIO, trace_format: str = "csv") -> ParseResult:
    """Parse a UTF-8 byte stream in the declared format."""
    return get_parser(trace_format)(stream)


def read_trace(path: Union[str, Path], trace_format: str = None) -> ParseResult:
    trace_format = trace_format or detect_format(path)
    with open(path, "rb") as f:
        return parse_records(f, trace_format)


__all__ = [
    "TRACE_FORMATS", "detect_format", "get_parser", "get_writer",
    "parse_csv", "parse_jsonl", "parse_records", "read_trace",
    "write_csv", "write_jsonl",
]
