import logging

import pytest

from marssim.core.addressing import MemoryMap
from marssim.core.addressing import encode
from marssim.core.traffic import MemoryRequest
from marssim.core.traffic import RequestStream
from marssim.core.utils import set_log_level
from marssim.plugin.manager import reset_plugin_manager

DEFAULT_MAP = MemoryMap.preset("default")


@pytest.fixture(autouse=True)
def _fresh_state():
    # the plugin manager and the package logger are process-wide
    reset_plugin_manager()
    set_log_level(logging.INFO)
    yield
    reset_plugin_manager()
    set_log_level(logging.INFO)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Point MARSSIM_OUTPUT_ROOT at a temporary directory."""
    monkeypatch.setenv("MARSSIM_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def dram_addr(channel=0, bank=0, row=0, column=0, mmap=DEFAULT_MAP):
    """Physical address of a DRAM coordinate under ``mmap``."""
    from marssim.core.addressing import DramCoordinate

    return encode(DramCoordinate(channel, 0, bank, row, column), mmap)


def stream_of(addrs, writes=None, kind="texture"):
    """RequestStream of the given addresses, seq 0..N-1."""
    writes = writes if writes is not None else [False] * len(addrs)
    return RequestStream.from_requests(
        MemoryRequest(i, a, w, kind, 0) for i, (a, w) in enumerate(zip(addrs, writes, strict=True))
    )


def page_stream(pages, line=0):
    """One request per listed page, at line ``line`` of the page."""
    return stream_of([(p << 12) + 64 * line for p in pages])
