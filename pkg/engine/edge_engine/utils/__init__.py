from .file_utils import atomic_write, write_json_atomic

__all__ = ["atomic_write", "write_json_atomic"]
