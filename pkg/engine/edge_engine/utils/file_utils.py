"""
Output file helpers. Every artifact is written to a temporary file in the
target directory and renamed into place, so readers never observe a
partially written file.
"""

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, TextIO, Union


def _current_umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


@contextmanager
def atomic_write(path: Union[str, Path], newline: str = "") -> Iterator[TextIO]:
    """Open a UTF-8 text stream that replaces ``path`` when the block exits cleanly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline=newline) as f:
            yield f
        # mkstemp creates 0600; give outputs the mode a plain open() would.
        os.chmod(tmp, 0o666 & ~_current_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(data: Any, path: Union[str, Path]) -> None:
    with atomic_write(path) as f:
        f.write(json.dumps(data, sort_keys=True, indent=2, separators=(",", ": ")))
        f.write("\n")
