"""Output helpers shared by the CSV writers."""

from __future__ import annotations

from contextlib import contextmanager


@contextmanager
def open_text(target):
    """Yield a writable text handle for a path, or pass an open handle through."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh
