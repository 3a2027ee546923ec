"""Bundled fixtures and atomic file output."""

import os
import tempfile
from importlib import resources

FIXTURES = ("gcg_payoff_matrix.csv", "rps.csv")


def fixture_path(name):
    """Filesystem path of a bundled fixture, e.g. ``fixture_path("rps.csv")``."""
    if name not in FIXTURES:
        raise FileNotFoundError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return str(resources.files("stylerank") / "fixtures" / name)


def resolve_input(path):
    """Accept ``fixture:NAME`` as a shorthand for a bundled fixture."""
    path = str(path)
    if path.startswith("fixture:"):
        return fixture_path(path[len("fixture:"):])
    return path


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8") if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
