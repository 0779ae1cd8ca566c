# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""Plugin manager collecting workload presets from built-in and installed plugins."""

__all__ = ["ENTRY_POINT_GROUP", "get_plugin_manager", "reset_plugin_manager", "workload_presets"]

import pluggy

from marssim.core.utils import ConfigError
from marssim.core.utils import debug_
from marssim.plugin import hookspecs
from marssim.plugin.workloadplugin import BuiltinWorkloadPlugin

ENTRY_POINT_GROUP = "marssim.workloads"

_manager = None


def get_plugin_manager():
    """Return the shared plugin manager, creating it on first use."""
    global _manager
    if _manager is None:
        pm = pluggy.PluginManager("marssim")
        pm.add_hookspecs(hookspecs.WorkloadSpecs)
        pm.register(BuiltinWorkloadPlugin(), name="builtin-workloads")
        n = pm.load_setuptools_entrypoints(ENTRY_POINT_GROUP)
        debug_(f"plugin manager ready ({n} external workload plugin(s))")
        _manager = pm
    return _manager


def reset_plugin_manager():
    """Forget the shared manager; the next call rebuilds it."""
    global _manager
    _manager = None


def workload_presets():
    """
    Merge the presets of every registered plugin.

    Raises
    ------
    ConfigError
        If two plugins provide the same preset name.
    """
    presets = {}
    for provided in get_plugin_manager().hook.marssim_workload_presets():
        for name, builder in provided.items():
            if name in presets:
                raise ConfigError(f"workload preset {name!r} is provided by more than one plugin")
            presets[name] = builder
    return presets
