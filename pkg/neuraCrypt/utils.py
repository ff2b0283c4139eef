from __future__ import annotations

import contextlib
import json
import logging
import os
import pathlib
import tempfile
from typing import Any, Iterator

logger = logging.getLogger("neuraCrypt.Utils")

try:
    import ujson as fast_json
except ImportError:  # pragma: no cover - optional extra
    fast_json = None


def absolute_file_paths(
    directory: pathlib.Path | str, suffixes: tuple[str, ...] = ()
) -> Iterator[pathlib.Path]:
    """Yield the files directly under ``directory`` in name order."""
    try:
        for path in sorted(pathlib.Path(directory).iterdir()):
            if path.is_file() and (not suffixes or path.suffix.lower() in suffixes):
                yield path.absolute()
    except FileNotFoundError as e:
        logger.warning("%s - %s", e.strerror, e.filename)


def atomic_write_bytes(path: pathlib.Path | str, payload: bytes) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as file:
            file.write(payload)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
    logger.trace("Wrote %s bytes to %s", len(payload), path)
    return path


def atomic_write_text(path: pathlib.Path | str, text: str) -> pathlib.Path:
    return atomic_write_bytes(path, text.encode("utf8"))


def dumps(obj: Any, indent: int = 2) -> str:
    if fast_json is not None:
        return fast_json.dumps(
            obj, indent=indent, ensure_ascii=False, escape_forward_slashes=False
        )
    return json.dumps(obj, indent=indent, ensure_ascii=False)


def loads(text: str) -> Any:
    if fast_json is not None:
        try:
            return fast_json.loads(text)
        except ValueError:
            # ujson carries no position information, re-raise through json
            pass
    return json.loads(text)


def read_json(path: pathlib.Path | str) -> Any:
    return loads(pathlib.Path(path).read_text(encoding="utf8"))


def write_json(path: pathlib.Path | str, obj: Any) -> pathlib.Path:
    return atomic_write_text(path, dumps(obj) + "\n")
