"""Process enactment: instantiating models and driving activity lifecycles.

The engine is a single logical state machine per process instance. Every
mutation goes through one of the command methods below, emits append-only
events through the provenance store, and enforces the legal transition
relation. Readiness is precondition-driven: an activity fires only when
its input artifacts exist and its incoming edges are satisfied; branches
not taken at a decision point are transitively skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional

from .cloud import CloudKind
from .errors import (
    ConstraintViolation,
    IllegalState,
    InvalidModel,
    MissingExternalInput,
    RoleMismatch,
    SchemaError,
    UnknownDecisionLabel,
)
from .model import (
    Activity,
    ActivityKind,
    ProcessModel,
    Violation,
    confidential_artifact_ids,
    is_effectively_confidential,
    validate,
)
from .scheduler import PlacementDecision


class ActivityState(str, Enum):
    PENDING = "Pending"
    READY = "Ready"
    SCHEDULED = "Scheduled"
    RUNNING = "Running"
    AWAITING_HUMAN = "AwaitingHuman"
    TIMED_OUT = "TimedOut"
    COMPLETED = "Completed"
    FAILED = "Failed"
    SKIPPED = "Skipped"


TERMINAL_STATES = frozenset({ActivityState.COMPLETED, ActivityState.FAILED, ActivityState.SKIPPED})

LEGAL_TRANSITIONS = frozenset({
    (ActivityState.PENDING, ActivityState.READY),
    (ActivityState.PENDING, ActivityState.SKIPPED),
    (ActivityState.READY, ActivityState.SCHEDULED),
    (ActivityState.READY, ActivityState.AWAITING_HUMAN),
    (ActivityState.SCHEDULED, ActivityState.RUNNING),
    (ActivityState.RUNNING, ActivityState.COMPLETED),
    (ActivityState.RUNNING, ActivityState.TIMED_OUT),
    (ActivityState.RUNNING, ActivityState.FAILED),
    (ActivityState.TIMED_OUT, ActivityState.SCHEDULED),
    (ActivityState.TIMED_OUT, ActivityState.FAILED),
    (ActivityState.AWAITING_HUMAN, ActivityState.COMPLETED),
})


class InstanceStatus(str, Enum):
    RUNNING = "Running"
    COMPLETED = "Completed"
    FAILED = "Failed"


# event kinds
EV_INSTANTIATED = "Instantiated"
EV_BECAME_READY = "BecameReady"
EV_DISPATCHED = "Dispatched"
EV_STARTED = "Started"
EV_HUMAN_COMPLETED = "HumanCompleted"
EV_TASK_COMPLETED = "TaskCompleted"
EV_TIMED_OUT = "TimedOut"
EV_RESCALED = "Rescaled"
EV_SKIPPED = "Skipped"
EV_FAILED = "Failed"
EV_INSTANCE_COMPLETED = "InstanceCompleted"


@dataclass
class ActivityInstance:
    """Runtime record of one activity within a process instance."""

    activity_id: str
    state: ActivityState = ActivityState.PENDING
    attempt: int = 0
    placement: Optional[PlacementDecision] = None
    decision_label: Optional[str] = None
    started_at_s: Optional[int] = None
    finished_at_s: Optional[int] = None
    consumed: tuple = ()  # (artifact_id, version) pairs read when work began


@dataclass
class ProcessInstance:
    instance_id: str
    model: ProcessModel  # flattened
    activity_states: dict = field(default_factory=dict)
    available_artifacts: set = field(default_factory=set)
    status: InstanceStatus = InstanceStatus.RUNNING
    sim_time_s: int = 0


@dataclass(frozen=True)
class StatusSummary:
    instance_id: str
    status: InstanceStatus
    counts: dict
    sim_time_s: int
    cost_ref: str  # attribution key for cost queries


def require_transition(current: ActivityState, target: ActivityState) -> None:
    if (current, target) not in LEGAL_TRANSITIONS:
        raise IllegalState(f"illegal transition {current.value} -> {target.value}")


def placement_payload(placement: PlacementDecision) -> dict:
    return {
        "cloud_id": placement.cloud_id,
        "machine_type": placement.machine_type,
        "instance_count": placement.instance_count,
        "estimated_duration_s": placement.estimated_duration_s,
        "estimated_cost": str(placement.estimated_cost),
    }


def external_content(artifact_id: str) -> bytes:
    return json.dumps({"artifact": artifact_id, "external": True},
                      sort_keys=True, separators=(",", ":")).encode()


def produced_content(artifact_id: str, instance_id: str, activity_id: str, attempt: int,
                     consumed: Iterable[tuple]) -> bytes:
    """Deterministic stand-in bytes for a simulated tool's output."""
    doc = {
        "artifact": artifact_id,
        "instance": instance_id,
        "activity": activity_id,
        "attempt": attempt,
        "consumed": [list(c) for c in consumed],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


class EnactmentEngine:
    """Applies commands to process instances and records every step.

    ``store`` must provide ``append_event`` and ``put_artifact``; ``clock``
    provides ``now_s``. Cloud kinds are needed for the defensive
    confidentiality re-check at dispatch time.
    """

    def __init__(self, store, clock, cloud_kinds: Optional[Mapping[str, CloudKind]] = None):
        self.store = store
        self.clock = clock
        self.cloud_kinds = dict(cloud_kinds or {})
        self.instances: dict[str, ProcessInstance] = {}
        self._counter = 0

    # -- helpers ---------------------------------------------------------------

    def _emit(self, instance: ProcessInstance, kind: str, payload: dict):
        instance.sim_time_s = self.clock.now_s
        return self.store.append_event(instance.instance_id, self.clock.now_s, kind, payload)

    def _scoped(self, instance: ProcessInstance, artifact_id: str) -> str:
        return f"{instance.instance_id}:{artifact_id}"

    def _require_active(self, instance: ProcessInstance) -> None:
        if instance.status is not InstanceStatus.RUNNING:
            raise IllegalState(f"instance {instance.instance_id} is {instance.status.value}")

    def _transition(self, ai: ActivityInstance, target: ActivityState) -> None:
        require_transition(ai.state, target)
        ai.state = target

    def _latest_versions(self, instance: ProcessInstance, artifact_ids: Iterable[str]) -> tuple:
        consumed = []
        for aid in sorted(set(artifact_ids)):
            versions = [v for (name, v) in instance.available_artifacts if name == aid]
            if versions:
                consumed.append((aid, max(versions)))
        return tuple(consumed)

    def _publish_outputs(self, instance: ProcessInstance, activity: Activity, ai: ActivityInstance) -> list:
        published = []
        for aid in sorted(activity.outputs):
            content = produced_content(aid, instance.instance_id, activity.activity_id, ai.attempt, ai.consumed)
            record = self.store.put_artifact(
                self._scoped(instance, aid), content,
                producer=f"{instance.instance_id}:{activity.activity_id}#{ai.attempt}",
                created_at_s=self.clock.now_s,
                consumed=[(self._scoped(instance, a), v) for (a, v) in ai.consumed],
            )
            instance.available_artifacts.add((aid, record.version))
            published.append([aid, record.version])
        return published

    # -- commands -----------------------------------------------------------------

    def instantiate(self, model: ProcessModel, external_inputs: Iterable[str],
                    instance_id: Optional[str] = None) -> ProcessInstance:
        """Create a process instance with every activity Pending.

        The model must validate cleanly and all declared-external artifacts
        must be supplied; they are stored at version 1 before any activity
        can fire.
        """
        violations = validate(model)
        for act in model.activities:
            if act.kind is ActivityKind.SUBWORKFLOW:
                violations.append(Violation(
                    "UnexpandedSubWorkflow", act.activity_id,
                    "flatten subworkflows before instantiation"))
        if violations:
            raise InvalidModel(violations)

        supplied = set(external_inputs)
        declared = {a.artifact_id for a in model.artifacts if a.external}
        unknown = sorted(supplied - declared)
        if unknown:
            raise SchemaError(f"not declared external: {', '.join(unknown)}")
        missing = sorted(declared - supplied)
        if missing:
            raise MissingExternalInput(f"external input(s) not supplied: {', '.join(missing)}")

        if instance_id is None:
            self._counter += 1
            instance_id = f"i-{self._counter:04d}"
        instance = ProcessInstance(
            instance_id=instance_id,
            model=model,
            activity_states={a.activity_id: ActivityInstance(a.activity_id) for a in model.activities},
            sim_time_s=self.clock.now_s,
        )
        self.instances[instance_id] = instance

        for aid in sorted(supplied):
            record = self.store.put_artifact(
                self._scoped(instance, aid), external_content(aid),
                producer="external", created_at_s=self.clock.now_s, consumed=[],
            )
            instance.available_artifacts.add((aid, record.version))
        self._emit(instance, EV_INSTANTIATED, {
            "model_id": model.model_id,
            "external_inputs": sorted(supplied),
        })
        self._refresh(instance)
        self._check_completion(instance)
        return instance

    def ready_set(self, instance: ProcessInstance) -> set:
        """Activities whose preconditions hold and that await dispatch or a human."""
        out = set()
        for aid, ai in instance.activity_states.items():
            if ai.state in (ActivityState.PENDING, ActivityState.READY, ActivityState.AWAITING_HUMAN):
                if ai.state is ActivityState.AWAITING_HUMAN or self._preconditions_met(instance, aid):
                    out.add(aid)
        return out

    def _edge_status(self, instance: ProcessInstance, edge) -> str:
        """'dead' edges can never fire; 'satisfied' ones have fired; else 'open'."""
        src = instance.activity_states[edge.from_activity]
        if src.state is ActivityState.SKIPPED:
            return "dead"
        if src.state is ActivityState.COMPLETED:
            if edge.guard is not None and edge.guard != src.decision_label:
                return "dead"
            return "satisfied"
        if src.state is ActivityState.FAILED:
            return "dead"
        return "open"

    def _preconditions_met(self, instance: ProcessInstance, activity_id: str) -> bool:
        activity = instance.model.activity(activity_id)
        available = {name for (name, _) in instance.available_artifacts}
        if any(aid not in available for aid in activity.inputs):
            return False
        statuses = [self._edge_status(instance, e) for e in instance.model.incoming(activity_id)]
        if not statuses:
            return True
        if any(s == "open" for s in statuses):
            return False
        # all incoming decided; needs at least one live path, else it gets skipped
        return any(s == "satisfied" for s in statuses)

    def _refresh(self, instance: ProcessInstance) -> None:
        # transitively skip branches whose every incoming edge is dead
        changed = True
        while changed:
            changed = False
            for aid in sorted(instance.activity_states):
                ai = instance.activity_states[aid]
                if ai.state is not ActivityState.PENDING:
                    continue
                statuses = [self._edge_status(instance, e) for e in instance.model.incoming(aid)]
                if statuses and all(s == "dead" for s in statuses):
                    self._transition(ai, ActivityState.SKIPPED)
                    ai.finished_at_s = self.clock.now_s
                    self._emit(instance, EV_SKIPPED, {"activity": aid})
                    changed = True
        # promote satisfied activities; manual work goes straight to the worklist
        for aid in sorted(instance.activity_states):
            ai = instance.activity_states[aid]
            if ai.state is ActivityState.PENDING and self._preconditions_met(instance, aid):
                self._transition(ai, ActivityState.READY)
                if instance.model.activity(aid).kind is ActivityKind.MANUAL:
                    self._transition(ai, ActivityState.AWAITING_HUMAN)
                    ai.started_at_s = self.clock.now_s
                self._emit(instance, EV_BECAME_READY, {"activity": aid})

    def _check_completion(self, instance: ProcessInstance) -> None:
        if instance.status is not InstanceStatus.RUNNING:
            return
        states = [ai.state for ai in instance.activity_states.values()]
        if all(s in (ActivityState.COMPLETED, ActivityState.SKIPPED) for s in states):
            instance.status = InstanceStatus.COMPLETED
            self._emit(instance, EV_INSTANCE_COMPLETED, {"status": InstanceStatus.COMPLETED.value})

    def dispatch(self, instance: ProcessInstance, activity_id: str,
                 placement: PlacementDecision) -> ProcessInstance:
        """Hand a ready automated activity to the clouds (Ready -> Scheduled)."""
        self._require_active(instance)
        activity = instance.model.activity(activity_id)
        ai = instance.activity_states[activity_id]
        if activity.kind is not ActivityKind.AUTOMATED:
            raise IllegalState(f"'{activity_id}' is {activity.kind.value}, not automated")
        if ai.state is not ActivityState.READY:
            raise IllegalState(f"'{activity_id}' is {ai.state.value}, expected Ready")
        self._check_placement_constraints(instance, activity, placement)
        self._transition(ai, ActivityState.SCHEDULED)
        ai.placement = placement
        self._emit(instance, EV_DISPATCHED, {
            "activity": activity_id,
            "attempt": ai.attempt,
            "placement": placement_payload(placement),
        })
        return instance

    def _check_placement_constraints(self, instance: ProcessInstance, activity: Activity,
                                     placement: PlacementDecision) -> None:
        confidential = is_effectively_confidential(activity, confidential_artifact_ids(instance.model))
        kind = self.cloud_kinds.get(placement.cloud_id)
        if confidential and kind is not CloudKind.PRIVATE:
            raise ConstraintViolation(
                f"confidential activity '{activity.activity_id}' cannot run on cloud '{placement.cloud_id}'")

    def begin_activity(self, instance: ProcessInstance, activity_id: str,
                       placement: Optional[PlacementDecision] = None) -> ProcessInstance:
        """Mark a scheduled activity Running once its instance group is up."""
        self._require_active(instance)
        activity = instance.model.activity(activity_id)
        ai = instance.activity_states[activity_id]
        if ai.state is not ActivityState.SCHEDULED:
            raise IllegalState(f"'{activity_id}' is {ai.state.value}, expected Scheduled")
        self._transition(ai, ActivityState.RUNNING)
        if placement is not None:
            ai.placement = placement
        ai.started_at_s = self.clock.now_s
        ai.consumed = self._latest_versions(instance, activity.inputs)
        payload = {
            "activity": activity_id,
            "attempt": ai.attempt,
            "consumed": [list(c) for c in ai.consumed],
        }
        if ai.placement is not None:
            payload["placement"] = placement_payload(ai.placement)
        self._emit(instance, EV_STARTED, payload)
        return instance

    def complete_manual_task(self, instance: ProcessInstance, activity_id: str,
                             actor_role: str, decision_label: Optional[str] = None) -> ProcessInstance:
        """Record a human finishing a manual task or making a decision."""
        self._require_active(instance)
        activity = instance.model.activity(activity_id)
        ai = instance.activity_states[activity_id]
        if ai.state is not ActivityState.AWAITING_HUMAN:
            raise IllegalState(f"'{activity_id}' is {ai.state.value}, expected AwaitingHuman")
        if actor_role != activity.role_id:
            raise RoleMismatch(f"'{activity_id}' belongs to role '{activity.role_id}', not '{actor_role}'")
        guards = sorted({e.guard for e in instance.model.outgoing(activity_id) if e.guard is not None})
        if guards:
            if decision_label not in guards:
                raise UnknownDecisionLabel(
                    f"'{activity_id}' expects one of: {', '.join(guards)}; got {decision_label!r}")
        elif decision_label is not None:
            raise UnknownDecisionLabel(f"'{activity_id}' takes no decision label")

        ai.consumed = self._latest_versions(instance, activity.inputs)
        ai.decision_label = decision_label
        self._transition(ai, ActivityState.COMPLETED)
        ai.finished_at_s = self.clock.now_s
        outputs = self._publish_outputs(instance, activity, ai)
        payload = {"activity": activity_id, "role": actor_role,
                   "consumed": [list(c) for c in ai.consumed], "outputs": outputs}
        if decision_label is not None:
            payload["decision_label"] = decision_label
        self._emit(instance, EV_HUMAN_COMPLETED, payload)
        self._refresh(instance)
        self._check_completion(instance)
        return instance

    def on_task_result(self, instance: ProcessInstance, activity_id: str, result: str) -> ProcessInstance:
        """Apply a simulated task outcome: 'Succeeded' or 'TimedOut'."""
        self._require_active(instance)
        activity = instance.model.activity(activity_id)
        ai = instance.activity_states[activity_id]
        if ai.state is not ActivityState.RUNNING:
            raise IllegalState(f"'{activity_id}' is {ai.state.value}, expected Running")
        if result == "Succeeded":
            self._transition(ai, ActivityState.COMPLETED)
            ai.finished_at_s = self.clock.now_s
            outputs = self._publish_outputs(instance, activity, ai)
            self._emit(instance, EV_TASK_COMPLETED, {
                "activity": activity_id, "attempt": ai.attempt, "outputs": outputs,
            })
            self._refresh(instance)
            self._check_completion(instance)
        elif result == "TimedOut":
            self._transition(ai, ActivityState.TIMED_OUT)
            self._emit(instance, EV_TIMED_OUT, {"activity": activity_id, "attempt": ai.attempt})
        else:
            raise ValueError(f"unknown task result {result!r}")
        return instance

    def apply_rescale(self, instance: ProcessInstance, activity_id: str,
                      new_count: int, new_timeout_s: int) -> ProcessInstance:
        """Grow a timed-out activity's instance group and re-schedule it."""
        self._require_active(instance)
        ai = instance.activity_states[activity_id]
        if ai.state is not ActivityState.TIMED_OUT:
            raise IllegalState(f"'{activity_id}' is {ai.state.value}, expected TimedOut")
        self._transition(ai, ActivityState.SCHEDULED)
        ai.attempt += 1
        self._emit(instance, EV_RESCALED, {
            "activity": activity_id,
            "attempt": ai.attempt,
            "instance_count": new_count,
            "timeout_s": new_timeout_s,
        })
        return instance

    def fail_activity(self, instance: ProcessInstance, activity_id: str, reason: str) -> ProcessInstance:
        """Terminal failure; the whole instance fails with the activity."""
        self._require_active(instance)
        ai = instance.activity_states[activity_id]
        self._transition(ai, ActivityState.FAILED)
        ai.finished_at_s = self.clock.now_s
        self._emit(instance, EV_FAILED, {"activity": activity_id, "reason": reason})
        instance.status = InstanceStatus.FAILED
        self._emit(instance, EV_INSTANCE_COMPLETED, {"status": InstanceStatus.FAILED.value})
        return instance

    # -- queries -----------------------------------------------------------------

    def instance_status(self, instance: ProcessInstance) -> StatusSummary:
        counts: dict[str, int] = {}
        for ai in instance.activity_states.values():
            counts[ai.state.value] = counts.get(ai.state.value, 0) + 1
        return StatusSummary(
            instance_id=instance.instance_id,
            status=instance.status,
            counts=dict(sorted(counts.items())),
            sim_time_s=instance.sim_time_s,
            cost_ref=instance.instance_id,
        )
