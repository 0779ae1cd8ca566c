# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""
Built-in graphics workload presets.

The WL presets feed 64 leaves (an 8 x 8 arbitration tree) with about 1000
requests per source at scale 1, so a three-seed run of all five stays near one
million requests. LOCALITY feeds 24 leaves (3 x 8) with long single-source
walks. Stream kinds live in separate page regions:

=========  ===============
kind       first page
=========  ===============
texture    0x10000
color      0x20000
stencil    0x30000
depth      0x40000
hiz        0x50000
=========  ===============
"""

from functools import partial

from marssim.core.traffic import MergeTreeSpec
from marssim.core.traffic import StreamSpec
from marssim.plugin.hookspecs import hookimpl

REGION_BASE = {
    "texture": 0x10000,
    "color": 0x20000,
    "stencil": 0x30000,
    "depth": 0x40000,
    "hiz": 0x50000,
}

BASE_JITTER_PAGES = 64
SOURCE_JITTER_PAGES = 7

# name -> list of (kind, read_fraction, requests_per_page, pages_per_source, order)
_STREAMS = {
    "WL1": [("texture", 1.0, 96, 10, "sequential")],
    "WL2": [
        ("stencil", 0.5, 32, 24, "strided(4)"),
        ("color", 0.4, 64, 16, "sequential"),
    ],
    "WL3": [("color", 0.0, 64, 16, "sequential")],
    "WL4": [
        ("hiz", 1.0, 32, 32, "shuffled"),
        ("depth", 1.0, 64, 16, "sequential"),
    ],
    "WL5": [("hiz", 0.5, 48, 20, "shuffled")],
    # single-source windows up to 16384 requests stay full
    "LOCALITY": [("texture", 1.0, 96, 512, "sequential")],
}

TREES = {name: "gpu64" for name in _STREAMS} | {"LOCALITY": "gpu24"}


def _stream(kind, read_fraction, rpp, pages, order, scale, source_jitter):
    pages = max(1, round(pages * scale))
    return StreamSpec(
        stream_kind=kind,
        read_fraction=read_fraction,
        base_page=REGION_BASE[kind],
        pages_per_source=pages,
        requests_per_page=rpp,
        intra_page_order=order,
        # one free page between slots
        source_spacing=pages + 1 + source_jitter,
        base_jitter_pages=BASE_JITTER_PAGES,
        source_jitter_pages=source_jitter,
    )


def build_preset(name, scale=1.0):
    """Return ``(specs, tree)`` of a built-in preset."""
    tree = MergeTreeSpec.preset(TREES[name])
    # locality walks keep their slots fixed
    jitter = 0 if name == "LOCALITY" else SOURCE_JITTER_PAGES
    specs = [_stream(*s, scale, jitter) for s in _STREAMS[name]]
    return specs, tree


class BuiltinWorkloadPlugin:
    """Serves the WL1 to WL5 presets and the LOCALITY study."""

    @hookimpl
    def marssim_workload_presets(self):
        return {name: partial(build_preset, name) for name in _STREAMS}
