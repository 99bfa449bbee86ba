"""Orchestration: one serialized command stream over engine, clouds and store.

The runtime owns the simulation clock. Commands (register a model, create
an instance, complete a task, advance time) are applied under a single
lock; after every command it pumps each running instance, dispatching
ready automated activities through the scheduler, provisioning instance
groups, and reacting to fired simulation events (group ready, task done,
timeout and rescale). Reads serialize snapshots under the same lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Optional

from .cloud import (
    DEFAULT_PROFILE,
    EVENT_TASK_OUTCOME,
    EVENT_VM_GROUP_READY,
    OUTCOME_SUCCEEDED,
    CloudSim,
    CloudSpec,
    SimClock,
    SimEvent,
    TaskProfile,
)
from .engine import (
    EV_BECAME_READY,
    EV_DISPATCHED,
    EV_FAILED,
    EV_HUMAN_COMPLETED,
    EV_INSTANTIATED,
    EV_RESCALED,
    EV_SKIPPED,
    EV_STARTED,
    EV_TASK_COMPLETED,
    EV_TIMED_OUT,
    ActivityState,
    EnactmentEngine,
    InstanceStatus,
    ProcessInstance,
)
from .errors import InvalidModel, NotFound
from .model import (
    ActivityKind,
    ProcessModel,
    confidential_artifact_ids,
    expand_subworkflows,
    parse_process,
    topological_levels,
    validate,
)
from .provenance import ProvenanceStore
from .scheduler import (
    CloudCapacity,
    PlacementRequest,
    SchedulingProblem,
    feasible_options,
    on_timeout,
    plan_placements,
)


@dataclass
class _Round:
    """One provisioned (or capacity-starved) elastic round of an activity."""

    instance_id: str
    activity_id: str
    attempt: int
    placement: Optional[object] = None
    vm_ids: tuple = ()
    awaiting_capacity: bool = False
    count: int = 0
    timeout_s: Optional[int] = None


class WorkflowRuntime:
    """The workflow-management layer: models in, enacted instances out."""

    def __init__(self, clouds: Iterable[CloudSpec], store: ProvenanceStore,
                 default_profile: TaskProfile = DEFAULT_PROFILE):
        self.clock = SimClock()
        self.sim = CloudSim(clouds, self.clock)
        self.store = store
        self.engine = EnactmentEngine(
            store=store, clock=self.clock,
            cloud_kinds={cid: spec.kind for cid, spec in self.sim.clouds.items()},
        )
        self.default_profile = default_profile
        self.models: dict[str, ProcessModel] = {}
        self.flat_models: dict[str, ProcessModel] = {}
        self.levels: dict[str, dict[str, int]] = {}
        self.profiles: dict[str, dict[str, TaskProfile]] = {}
        self._rounds: dict[tuple, _Round] = {}
        self._vm_owner: dict[str, str] = {}
        self._lock = threading.RLock()

    # -- commands -------------------------------------------------------------

    def register_model(self, document: str) -> ProcessModel:
        """Parse, validate and file a model; subworkflow refs resolve at instantiation."""
        with self._lock:
            model = parse_process(document)
            violations = validate(model)
            if violations:
                raise InvalidModel(violations)
            self.models[model.model_id] = model
            return model

    def create_instance(self, model_id: str, external_inputs: Iterable[str],
                        profiles: Optional[dict[str, TaskProfile]] = None) -> ProcessInstance:
        with self._lock:
            model = self.models.get(model_id)
            if model is None:
                raise NotFound(f"model '{model_id}' is not registered")
            flat = expand_subworkflows(model, self.models)
            violations = validate(flat)
            if violations:
                raise InvalidModel(violations)
            instance = self.engine.instantiate(flat, external_inputs)
            iid = instance.instance_id
            self.flat_models[iid] = flat
            self.profiles[iid] = dict(profiles or {})
            self.levels[iid] = {
                aid: level
                for level, ids in enumerate(topological_levels(flat))
                for aid in ids
            }
            self._pump_all()
            return instance

    def complete_task(self, instance_id: str, activity_id: str, role: str,
                      decision_label: Optional[str] = None) -> ProcessInstance:
        with self._lock:
            instance = self._instance(instance_id)
            if activity_id not in instance.activity_states:
                raise NotFound(f"instance '{instance_id}' has no activity '{activity_id}'")
            self.engine.complete_manual_task(instance, activity_id, role, decision_label)
            self._pump_all()
            return instance

    def advance_time(self, seconds: int) -> dict:
        """Advance the simulation clock, firing and reacting to due events."""
        with self._lock:
            target = self.clock.now_s + int(seconds)
            fired = self.clock.advance(target, handler=self._handle_event)
            self._pump_all()
            self.sim.assert_capacity_invariant()
            return {"now_s": self.clock.now_s, "fired": len(fired)}

    def run_to_quiescence(self, max_steps: int = 10_000) -> None:
        """Keep advancing to the next due event until nothing is pending."""
        with self._lock:
            for _ in range(max_steps):
                nxt = self.clock.next_fire_time()
                if nxt is None:
                    return
                self.advance_time(nxt - self.clock.now_s)
            raise RuntimeError("simulation did not quiesce")

    # -- internals ---------------------------------------------------------------

    def _instance(self, instance_id: str) -> ProcessInstance:
        instance = self.engine.instances.get(instance_id)
        if instance is None:
            raise NotFound(f"instance '{instance_id}' does not exist")
        return instance

    def profile_for(self, instance_id: str, activity_id: str) -> TaskProfile:
        return self.profiles.get(instance_id, {}).get(activity_id, self.default_profile)

    def _capacity_view(self) -> tuple:
        return tuple(
            CloudCapacity(spec=self.sim.clouds[cid], free_cpus=self.sim.free_cpus(cid))
            for cid in sorted(self.sim.clouds)
        )

    def _handle_event(self, t: int, event: SimEvent) -> None:
        self.sim.handle(event)
        tag = event.data.get("tag", {})
        iid = tag.get("instance")
        if iid is None:
            return
        instance = self.engine.instances.get(iid)
        if instance is None:
            return
        aid, attempt = tag["activity"], tag["attempt"]
        rnd = self._rounds.get((iid, aid, attempt))
        if event.kind == EVENT_VM_GROUP_READY:
            if instance.status is not InstanceStatus.RUNNING:
                # instance failed before the group came up; release it unused
                self.sim.apply_task_outcome(event.data["vm_ids"])
                return
            self.engine.begin_activity(instance, aid, placement=rnd.placement if rnd else None)
            vms = [self.sim.instances[v] for v in event.data["vm_ids"]]
            self.sim.run_task(vms, self.profile_for(iid, aid), rnd.timeout_s if rnd else None,
                              tag={"instance": iid, "activity": aid, "attempt": attempt})
        elif event.kind == EVENT_TASK_OUTCOME:
            if instance.status is not InstanceStatus.RUNNING:
                return
            ai = instance.activity_states[aid]
            if ai.state is not ActivityState.RUNNING or ai.attempt != attempt:
                return  # stale outcome from an abandoned round
            if event.data["outcome"] == OUTCOME_SUCCEEDED:
                self.engine.on_task_result(instance, aid, "Succeeded")
            else:
                self.engine.on_task_result(instance, aid, "TimedOut")
                self._rescale(instance, aid)
            self._pump_all()

    def _rescale(self, instance: ProcessInstance, activity_id: str) -> None:
        activity = instance.model.activity(activity_id)
        ai = instance.activity_states[activity_id]
        directive = on_timeout(activity, activity.elasticity, ai.attempt)
        if directive is None:
            self.engine.fail_activity(instance, activity_id, "elastic rounds exhausted")
            return
        self.engine.apply_rescale(instance, activity_id, directive["new_count"], directive["new_timeout_s"])
        self._rounds[(instance.instance_id, activity_id, ai.attempt)] = _Round(
            instance_id=instance.instance_id, activity_id=activity_id, attempt=ai.attempt,
            awaiting_capacity=True, count=directive["new_count"], timeout_s=directive["new_timeout_s"],
        )
        self._try_provision_round(instance, activity_id, ai.attempt)

    def _try_provision_round(self, instance: ProcessInstance, activity_id: str, attempt: int) -> bool:
        rnd = self._rounds[(instance.instance_id, activity_id, attempt)]
        if not rnd.awaiting_capacity:
            return True
        activity = instance.model.activity(activity_id)
        request = PlacementRequest(activity=activity,
                                   profile=self.profile_for(instance.instance_id, activity_id),
                                   attempt=attempt)
        options = feasible_options(request, self._capacity_view(),
                                   confidential_artifact_ids(instance.model))
        if not options:
            return False
        placement = options[0]
        rnd.placement = placement
        rnd.awaiting_capacity = False
        self._provision(instance, activity_id, attempt, placement, rnd.timeout_s)
        return True

    def _provision(self, instance: ProcessInstance, activity_id: str, attempt: int,
                   placement, timeout_s: Optional[int]) -> None:
        tag = {"instance": instance.instance_id, "activity": activity_id, "attempt": attempt}
        vms = self.sim.provision(placement.cloud_id, placement.machine_type,
                                 placement.instance_count, tag=tag)
        key = (instance.instance_id, activity_id, attempt)
        rnd = self._rounds.get(key) or _Round(instance.instance_id, activity_id, attempt)
        rnd.placement = placement
        rnd.vm_ids = tuple(vm.vm_id for vm in vms)
        rnd.timeout_s = timeout_s
        rnd.awaiting_capacity = False
        self._rounds[key] = rnd
        for vm in vms:
            self._vm_owner[vm.vm_id] = instance.instance_id

    def _pump_all(self) -> None:
        for iid in sorted(self.engine.instances):
            self._pump(self.engine.instances[iid])

    def _pump(self, instance: ProcessInstance) -> None:
        if instance.status is not InstanceStatus.RUNNING:
            return
        # capacity-starved rescale rounds take priority over fresh dispatches
        for key in sorted(self._rounds):
            rnd = self._rounds[key]
            if rnd.instance_id == instance.instance_id and rnd.awaiting_capacity:
                self._try_provision_round(instance, rnd.activity_id, rnd.attempt)

        ready_auto = sorted(
            aid for aid in self.engine.ready_set(instance)
            if instance.model.activity(aid).kind is ActivityKind.AUTOMATED
            and instance.activity_states[aid].state is ActivityState.READY
        )
        if not ready_auto:
            return
        requests = tuple(
            PlacementRequest(
                activity=instance.model.activity(aid),
                profile=self.profile_for(instance.instance_id, aid),
                attempt=instance.activity_states[aid].attempt,
            )
            for aid in ready_auto
        )
        problem = SchedulingProblem(
            ready=requests,
            clouds=self._capacity_view(),
            confidential_artifacts=confidential_artifact_ids(instance.model),
        )
        plan = plan_placements(problem)
        for aid in sorted(plan.placements):
            placement = plan.placements[aid]
            activity = instance.model.activity(aid)
            timeout_s = int(round(activity.elasticity.timeout_hours * 3600)) if activity.elasticity else None
            self.engine.dispatch(instance, aid, placement)
            self._provision(instance, aid, instance.activity_states[aid].attempt, placement, timeout_s)
        # deferred activities stay Ready and are retried on the next pump

    # -- queries --------------------------------------------------------------

    def worklist(self, role: Optional[str] = None, instance_id: Optional[str] = None) -> list[dict]:
        with self._lock:
            items = []
            for iid in sorted(self.engine.instances):
                if instance_id is not None and iid != instance_id:
                    continue
                instance = self.engine.instances[iid]
                if instance.status is not InstanceStatus.RUNNING:
                    continue
                for aid in sorted(instance.activity_states):
                    ai = instance.activity_states[aid]
                    if ai.state is not ActivityState.AWAITING_HUMAN:
                        continue
                    activity = instance.model.activity(aid)
                    if role is not None and activity.role_id != role:
                        continue
                    items.append({
                        "task_id": f"{iid}:{aid}",
                        "instance_id": iid,
                        "activity_id": aid,
                        "role": activity.role_id,
                        "guard_options": sorted({e.guard for e in instance.model.outgoing(aid)
                                                 if e.guard is not None}),
                        "waiting_since_s": ai.started_at_s,
                    })
            return items

    def instance_costs(self, instance_id: str) -> dict:
        per_cloud: dict[str, Decimal] = {}
        for vm_id, owner in self._vm_owner.items():
            if owner != instance_id:
                continue
            vm = self.sim.instances[vm_id]
            per_cloud[vm.cloud_id] = per_cloud.get(vm.cloud_id, Decimal(0)) + self.sim.instance_cost(vm_id)
        total = sum(per_cloud.values(), Decimal(0))
        return {"per_cloud": {cid: str(per_cloud[cid]) for cid in sorted(per_cloud)},
                "total": str(total)}

    def snapshot(self, instance_id: str) -> dict:
        """The canonical instance view served over the API."""
        with self._lock:
            instance = self._instance(instance_id)
            levels = self.levels.get(instance_id, {})
            activities = {}
            for aid in sorted(instance.activity_states):
                ai = instance.activity_states[aid]
                activity = instance.model.activity(aid)
                placement = None
                if ai.placement is not None:
                    placement = {
                        "cloud_id": ai.placement.cloud_id,
                        "machine_type": ai.placement.machine_type,
                        "instance_count": ai.placement.instance_count,
                        "estimated_duration_s": ai.placement.estimated_duration_s,
                        "estimated_cost": str(ai.placement.estimated_cost),
                    }
                activities[aid] = {
                    "kind": activity.kind.value,
                    "role": activity.role_id,
                    "state": ai.state.value,
                    "attempt": ai.attempt,
                    "decision_label": ai.decision_label,
                    "level": levels.get(aid),
                    "placement": placement,
                    "started_at_s": ai.started_at_s,
                    "finished_at_s": ai.finished_at_s,
                }
            return {
                "instance_id": instance_id,
                "model_id": instance.model.model_id,
                "status": instance.status.value,
                "sim_time_s": instance.sim_time_s,
                "activities": activities,
                "edges": [
                    {"from": e.from_activity, "to": e.to_activity, "guard": e.guard}
                    for e in instance.model.edges
                ],
                "artifacts": sorted([list(p) for p in instance.available_artifacts]),
                "costs": self.instance_costs(instance_id),
                "last_seq": self.store.last_seq,
            }

    def export_report(self, instance_id: str) -> dict:
        """Diagnostics document: per-activity timelines, placements and costs."""
        with self._lock:
            instance = self._instance(instance_id)
            events = self.store.read_events(instance_id=instance_id)
            timelines: dict[str, list] = {aid: [] for aid in instance.activity_states}
            attempts: dict[str, list] = {aid: [] for aid in instance.activity_states}
            placements: dict[str, list] = {aid: [] for aid in instance.activity_states}
            manual = {a.activity_id for a in instance.model.activities if a.kind is ActivityKind.MANUAL}
            state_of_kind = {
                EV_DISPATCHED: "Scheduled",
                EV_STARTED: "Running",
                EV_TASK_COMPLETED: "Completed",
                EV_HUMAN_COMPLETED: "Completed",
                EV_TIMED_OUT: "TimedOut",
                EV_RESCALED: "Scheduled",
                EV_SKIPPED: "Skipped",
                EV_FAILED: "Failed",
            }
            for event in events:
                aid = event.payload.get("activity")
                if aid is None or aid not in timelines:
                    continue
                if event.kind == EV_BECAME_READY:
                    state = "AwaitingHuman" if aid in manual else "Ready"
                elif event.kind in state_of_kind:
                    state = state_of_kind[event.kind]
                else:
                    continue
                timelines[aid].append({"t": event.sim_time_s, "state": state})
                if event.kind == EV_STARTED:
                    placement = event.payload.get("placement") or {}
                    attempts[aid].append(placement.get("instance_count", 1))
                    placements[aid].append({
                        "attempt": event.payload.get("attempt", 0),
                        "cloud_id": placement.get("cloud_id"),
                        "machine_type": placement.get("machine_type"),
                        "instance_count": placement.get("instance_count"),
                    })
            summary = self.engine.instance_status(instance)
            return {
                "instance_id": instance_id,
                "model_id": instance.model.model_id,
                "status": instance.status.value,
                "sim_time_s": instance.sim_time_s,
                "state_counts": summary.counts,
                "activities": {
                    aid: {
                        "state": instance.activity_states[aid].state.value,
                        "attempt": instance.activity_states[aid].attempt,
                        "decision_label": instance.activity_states[aid].decision_label,
                        "timeline": timelines[aid],
                        "attempts": attempts[aid],
                        "placements": placements[aid],
                    }
                    for aid in sorted(instance.activity_states)
                },
                "costs": self.instance_costs(instance_id),
            }

    def costs(self, cloud_id: Optional[str] = None) -> dict:
        with self._lock:
            per_cloud = {cid: str(self.sim.accrued_cost(cloud_id=cid)) for cid in sorted(self.sim.clouds)}
            if cloud_id is not None:
                if cloud_id not in self.sim.clouds:
                    raise NotFound(f"unknown cloud '{cloud_id}'")
                per_cloud = {cloud_id: per_cloud[cloud_id]}
            return {"per_cloud": per_cloud, "total": str(self.sim.accrued_cost())}
