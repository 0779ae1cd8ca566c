# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""Exceptions, package logger and data-source helpers shared by all marssim modules."""

__all__ = [
    "ConfigError",
    "ConfigMismatchError",
    "MarsSimError",
    "MarsSimWarning",
    "SimulationError",
    "TraceError",
    "debug_",
    "info_",
    "is_url",
    "logger",
    "open_source",
    "set_log_level",
]

import io
import logging
import re
from pathlib import Path

import requests


# ======================================================================
# Exceptions
# ======================================================================
class MarsSimError(Exception):
    """Base exception for marssim errors."""


class ConfigError(MarsSimError):
    """Invalid configuration: the message names the field or invariant at fault."""


class TraceError(MarsSimError):
    """Malformed request or command trace."""


class ConfigMismatchError(MarsSimError):
    """Two runs that should share a configuration do not."""


class SimulationError(MarsSimError):
    """The co-simulation cannot make progress."""


class MarsSimWarning(Warning):
    """Custom warning for recoverable marssim oddities."""


# ======================================================================
# Utility functions
# ======================================================================
def is_url(strg):
    """
    Check if a string is a http(s) URL.

    Parameters
    ----------
    strg : str
        String to check.

    Returns
    -------
    bool
        True if the string is a URL, False otherwise.

    Examples
    --------
    >>> is_url("https://example.com/trace.csv")
    True
    >>> is_url("trace.csv")
    False
    """
    return isinstance(strg, str) and re.match(r"http[s]?:[\/]{2}", strg) is not None


def open_source(source, mode="r"):
    """
    Open a file-like object from a path, a URL or in-memory content.

    Parameters
    ----------
    source : str, Path, bytes
        The data source. Strings starting with ``http://`` or ``https://`` are
        fetched with `requests`.
    mode : str, optional
        ``"r"`` (text, default) or ``"rb"``.

    Returns
    -------
    tuple
        The opened file object and the source name (or None for raw content).

    Raises
    ------
    TraceError
        If the path does not exist or the URL cannot be fetched.
    """
    content = None
    name = None
    encoding = "utf-8"

    if is_url(source):
        try:
            r = requests.get(source, allow_redirects=True, timeout=10)
            r.raise_for_status()
        except requests.RequestException as e:
            raise TraceError(f"Cannot fetch {source}: {e}") from e
        content = r.content
        encoding = r.encoding or encoding
        name = Path(source).name

    elif isinstance(source, bytes):
        content = source

    else:
        name = Path(source)
        if not name.exists():
            raise TraceError(f"File not found: {name}")

    if content is not None:
        fid = io.BytesIO(content) if mode == "rb" else io.StringIO(content.decode(encoding))
    else:
        fid = open(name, mode=mode)  # noqa: SIM115

    return fid, name


# ======================================================================
# Logger setup
# ======================================================================

# Create logger for the package
logger = logging.getLogger("marssim")

# Set default level
logger.setLevel(logging.INFO)

# Create console handler if not already attached
if not logger.handlers:
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG)
    formatter = logging.Formatter("%(name)s - %(levelname)s - %(message)s")
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)


def set_log_level(level):
    """
    Set the package logger level.

    Parameters
    ----------
    level : int or str
        A `logging` level, e.g. ``logging.DEBUG`` or ``"WARNING"``.
    """
    logger.setLevel(level)


# Convenience methods


def info_(msg):
    """
    Log an info message.

    Parameters
    ----------
    msg : str
        Message to log.
    """
    logger.info(msg)


def debug_(msg):
    """
    Log a debug message.

    Parameters
    ----------
    msg : str
        Message to log.
    """
    logger.debug(msg)
