"""Flow-based workflow engine for cyclic and conditional computation graphs.

Nodes run concurrently in isolated execution contexts and exchange data
only through bounded, typed channels::

    from flowcycle import Workflow, LoadData, LogResult

    wf = Workflow("hello")
    src = wf.add(LoadData, data=[1, 2, 3])
    sink = wf.add(LogResult)
    wf.connect(src.out, sink.inp)
    report = wf.execute()
"""

from .channels import (
    Channel,
    ChannelClosed,
    ChannelClosedAndEmpty,
    FileSet,
    MissingFile,
    StagingCorrupt,
    StagingFull,
)
from .commands import CommandSpec, MockQueue, QueueJob, run_command
from .errors import *  # noqa: F401,F403
from .graph import (
    DEFAULT_CAPACITY,
    WILDCARD,
    ExposedParameter,
    Input,
    Node,
    Output,
    Parameter,
    PortType,
    ValidationReport,
    Workflow,
    registry,
    validate,
)
from .io import (
    FlagSchema,
    SystemConfig,
    deserialize,
    dump,
    dumps,
    expose_cli,
    export_dot,
    load,
    load_system_config,
    loads,
    serialize,
)
from .nodes import (
    Accumulate,
    ConditionalRouter,
    Copy,
    LoadData,
    LogResult,
    Merge,
    Passthrough,
    QueueSubmit,
    RoundRobinDistribute,
    RunCommand,
    Sleep,
)
from .patterns import make_batched, make_iterative, make_parallel
from .runtime import ExecutionReport, NodeStatus, Outcome, RunConfig, execute
from . import demos  # noqa: F401 - registers demo node kinds

__version__ = "0.1.0"
