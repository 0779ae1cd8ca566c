# ruff: noqa: F401
from .__version__ import __version__
from .core.addressing import DramCoordinate
from .core.addressing import MemoryMap
from .core.addressing import decode
from .core.addressing import encode
from .core.addressing import page_id
from .core.dram import DramConfig
from .core.dram import MemorySystem
from .core.dram import check_protocol
from .core.dram import simulate
from .core.dram import simulate_pipeline
from .core.mars import MarsConfig
from .core.mars import MarsState
from .core.mars import baseline_passthrough
from .core.mars import run_reorder
from .core.metrics import RunMetrics
from .core.metrics import compare
from .core.metrics import locality
from .core.traffic import MemoryRequest
from .core.traffic import MergeTreeSpec
from .core.traffic import RequestStream
from .core.traffic import StreamSpec
from .core.traffic import generate_workload
from .core.traffic import merge
from .core.traffic import workload_preset
from .core.utils import ConfigError
from .core.utils import ConfigMismatchError
from .core.utils import MarsSimError
from .core.utils import MarsSimWarning
from .core.utils import SimulationError
from .core.utils import TraceError
