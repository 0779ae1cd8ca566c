# ======================================================================================
# Copyright (©) 2025 marssim developers.
# CeCILL-B FREE SOFTWARE LICENSE AGREEMENT
# See full LICENSE agreement in the root directory.
# ======================================================================================
"""Hook specifications implemented by marssim plugins."""

from pluggy import HookimplMarker
from pluggy import HookspecMarker

hookspec = HookspecMarker("marssim")
hookimpl = HookimplMarker("marssim")


class WorkloadSpecs:
    """Hooks a workload plugin can implement."""

    @hookspec
    def marssim_workload_presets(self):
        """
        Return the workload presets provided by the plugin.

        Returns
        -------
        dict
            Preset name mapped to a callable ``builder(scale)`` returning
            ``(list of StreamSpec, MergeTreeSpec)``.
        """
