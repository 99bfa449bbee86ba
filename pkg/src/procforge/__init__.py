"""procforge: software process enactment on a simulated hybrid cloud."""

from .cloud import (
    CloudInstance,
    CloudKind,
    CloudSim,
    CloudSpec,
    MachineType,
    SimClock,
    TaskProfile,
    task_duration,
)
from .engine import ActivityState, EnactmentEngine, InstanceStatus, ProcessInstance
from .model import (
    Activity,
    ActivityKind,
    ArtifactSpec,
    Edge,
    ElasticityPolicy,
    ProcessModel,
    ResourceDemand,
    Role,
    ScalingType,
    Violation,
    expand_subworkflows,
    parse_process,
    serialize_process,
    topological_levels,
    validate,
)
from .provenance import ArtifactVersion, EventRecord, ProvenanceStore, Replayer, replay, state_digest
from .runtime import WorkflowRuntime
from .scheduler import (
    EXHAUSTED,
    PlacementDecision,
    SchedulingProblem,
    feasible_options,
    next_scale,
    on_timeout,
    plan_placements,
)

__version__ = "0.1.0"
