"""
Atomic file output: write to a temporary file next to the target, then rename.
"""
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

logger = logging.getLogger(__name__)


@contextmanager
def atomic_open(path, mode="w"):
    """Open a temporary file that replaces ``path`` only if the block succeeds.

    Args:
        path (str | Path): Final destination
        mode (str, optional): "w" for text or "wb" for bytes. Defaults to "w".

    Yields:
        file: Writable file object
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as handle:
            yield handle
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
        logger.debug(f"Wrote {path}")
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_text_atomic(path, text):
    """Write a text file atomically.

    Args:
        path (str | Path): Destination
        text (str): File contents

    Returns:
        Path: The written path
    """
    with atomic_open(path, "w") as handle:
        handle.write(text)
    return Path(path)
