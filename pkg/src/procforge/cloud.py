"""Discrete-event simulation of public and private clouds.

The simulator owns the only clock in the system. Provisioning, task
completion and timeouts are events on that clock; nothing depends on wall
time, so identical command sequences replay bit-exactly. Money is handled
as :class:`decimal.Decimal` end to end to keep billing sums exact.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Optional

from .errors import (
    CapacityExceeded,
    ClockRegression,
    InstanceNotRunning,
    MixedClouds,
    UnknownMachineType,
)


class CloudKind(str, Enum):
    PUBLIC = "public"
    PRIVATE = "private"


class VmState(str, Enum):
    PROVISIONING = "Provisioning"
    RUNNING = "Running"
    TERMINATED = "Terminated"


@dataclass(frozen=True)
class MachineType:
    name: str
    cpus: int
    memory_gb: float
    price_per_hour: Decimal


@dataclass(frozen=True)
class CloudSpec:
    """One cloud: a machine catalog plus capacity and provisioning latency.

    ``capacity_cpus`` is None for an effectively unbounded public cloud;
    private clouds must be finite.
    """

    cloud_id: str
    kind: CloudKind
    catalog: tuple[MachineType, ...]
    capacity_cpus: Optional[int] = None
    provisioning_latency_s: int = 120

    def machine(self, name: str) -> MachineType:
        for m in self.catalog:
            if m.name == name:
                return m
        raise UnknownMachineType(f"cloud '{self.cloud_id}' has no machine type '{name}'")


@dataclass
class CloudInstance:
    vm_id: str
    cloud_id: str
    machine_type: str
    state: VmState = VmState.PROVISIONING
    started_at_s: Optional[int] = None      # when it became Running; billing starts here
    terminated_at_s: Optional[int] = None


@dataclass(frozen=True)
class TaskProfile:
    """Single-node duration plus how (un)parallelizable the work is."""

    base_duration_s: int
    serial_fraction: float = 0.0
    sync_overhead_s_per_node: float = 0.0


DEFAULT_PROFILE = TaskProfile(base_duration_s=1800, serial_fraction=0.0, sync_overhead_s_per_node=0.0)

SECONDS_PER_HOUR = 3600


def task_duration(profile: TaskProfile, n: int) -> int:
    """Duration of a task on n nodes, in whole seconds (rounded up).

    d(n) = serial part + parallelizable part / n + per-node sync overhead.
    Adding nodes shrinks the middle term but grows the last one, so past
    some n the task gets slower again. Exact rational arithmetic keeps the
    ceiling free of float noise.
    """
    if n < 1:
        raise ValueError("node count must be at least 1")
    serial = Fraction(str(profile.serial_fraction))
    base = Fraction(profile.base_duration_s)
    overhead = Fraction(str(profile.sync_overhead_s_per_node))
    duration = serial * base + (1 - serial) * base / n + overhead * (n - 1)
    return int(math.ceil(duration))


def ceil_hours(seconds: int) -> int:
    return -(-seconds // SECONDS_PER_HOUR)


# ---------------------------------------------------------------------------
# event clock
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimEvent:
    kind: str
    data: dict


class SimClock:
    """Virtual clock with a stable event queue.

    Events fire in (fire_time, insertion order); the insertion counter makes
    simultaneous events deterministic.
    """

    def __init__(self) -> None:
        self.now_s = 0
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._insertions = 0

    def schedule(self, fire_time_s: int, event: SimEvent) -> None:
        if fire_time_s < self.now_s:
            raise ClockRegression(f"cannot schedule at {fire_time_s} before now {self.now_s}")
        heapq.heappush(self._heap, (fire_time_s, self._insertions, event))
        self._insertions += 1

    def next_fire_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def advance(self, until_s: int, handler: Optional[Callable[[int, SimEvent], None]] = None) -> list[tuple[int, SimEvent]]:
        """Fire everything due up to ``until_s`` and move the clock there.

        A handler may schedule further events; those fire too while they
        fall inside the window. Returns the fired (time, event) pairs.
        """
        if until_s < self.now_s:
            raise ClockRegression(f"cannot advance to {until_s} before now {self.now_s}")
        fired: list[tuple[int, SimEvent]] = []
        while self._heap and self._heap[0][0] <= until_s:
            fire_time, _, event = heapq.heappop(self._heap)
            self.now_s = fire_time
            fired.append((fire_time, event))
            if handler is not None:
                handler(fire_time, event)
        self.now_s = until_s
        return fired


# ---------------------------------------------------------------------------
# the simulator
# ---------------------------------------------------------------------------

EVENT_VM_GROUP_READY = "vm-group-ready"
EVENT_TASK_OUTCOME = "task-outcome"

OUTCOME_SUCCEEDED = "Succeeded"
OUTCOME_TIMED_OUT = "TimedOut"


class CloudSim:
    """Tracks simulated instances across clouds and bills them by the hour."""

    def __init__(self, clouds: Iterable[CloudSpec], clock: Optional[SimClock] = None):
        self.clock = clock or SimClock()
        self.clouds: dict[str, CloudSpec] = {}
        for spec in clouds:
            if spec.cloud_id in self.clouds:
                raise ValueError(f"duplicate cloud_id '{spec.cloud_id}'")
            if spec.kind is CloudKind.PRIVATE and spec.capacity_cpus is None:
                raise ValueError(f"private cloud '{spec.cloud_id}' requires finite capacity_cpus")
            if not spec.catalog:
                raise ValueError(f"cloud '{spec.cloud_id}' has an empty catalog")
            self.clouds[spec.cloud_id] = spec
        self.instances: dict[str, CloudInstance] = {}
        self._vm_counter = 0
        self._task_counter = 0

    # -- capacity ------------------------------------------------------------

    def committed_cpus(self, cloud_id: str) -> int:
        spec = self._cloud(cloud_id)
        total = 0
        for vm in self.instances.values():
            if vm.cloud_id == cloud_id and vm.state is not VmState.TERMINATED:
                total += spec.machine(vm.machine_type).cpus
        return total

    def free_cpus(self, cloud_id: str) -> Optional[int]:
        spec = self._cloud(cloud_id)
        if spec.capacity_cpus is None:
            return None
        return spec.capacity_cpus - self.committed_cpus(cloud_id)

    def _cloud(self, cloud_id: str) -> CloudSpec:
        try:
            return self.clouds[cloud_id]
        except KeyError:
            raise UnknownMachineType(f"unknown cloud '{cloud_id}'") from None

    # -- lifecycle -------------------------------------------------------------

    def provision(self, cloud_id: str, machine_type: str, count: int, tag: Optional[dict] = None) -> list[CloudInstance]:
        """Create ``count`` instances; they become Running after the cloud's latency.

        Private clouds enforce their cpu capacity against all non-terminated
        instances. One group-ready event covers the whole batch.
        """
        if count < 1:
            raise ValueError("count must be positive")
        spec = self._cloud(cloud_id)
        machine = spec.machine(machine_type)
        if spec.capacity_cpus is not None:
            needed = machine.cpus * count
            free = spec.capacity_cpus - self.committed_cpus(cloud_id)
            if needed > free:
                raise CapacityExceeded(
                    f"cloud '{cloud_id}': requested {needed} cpus but only {free} of {spec.capacity_cpus} free")
        group = []
        for _ in range(count):
            self._vm_counter += 1
            vm = CloudInstance(vm_id=f"vm-{self._vm_counter:04d}", cloud_id=cloud_id, machine_type=machine_type)
            self.instances[vm.vm_id] = vm
            group.append(vm)
        self.clock.schedule(
            self.clock.now_s + spec.provisioning_latency_s,
            SimEvent(EVENT_VM_GROUP_READY, {"vm_ids": [vm.vm_id for vm in group], "tag": tag or {}}),
        )
        return group

    def mark_group_running(self, vm_ids: Iterable[str]) -> None:
        """Apply a vm-group-ready event: Provisioning -> Running, billing starts."""
        for vm_id in vm_ids:
            vm = self.instances[vm_id]
            if vm.state is not VmState.PROVISIONING:
                raise InstanceNotRunning(f"{vm_id} is {vm.state.value}, expected Provisioning")
            vm.state = VmState.RUNNING
            vm.started_at_s = self.clock.now_s

    def run_task(self, vms: list[CloudInstance], profile: TaskProfile, timeout_s: Optional[int],
                 tag: Optional[dict] = None) -> dict:
        """Execute a task on a Running instance group of one cloud.

        Schedules the outcome event: success at now + d(n) when that fits
        the timeout, otherwise a timeout at now + timeout_s. The group is
        terminated when the outcome fires (see :meth:`apply_task_outcome`).
        """
        if not vms:
            raise InstanceNotRunning("task needs at least one running instance")
        clouds = {vm.cloud_id for vm in vms}
        if len(clouds) > 1:
            raise MixedClouds(f"task spans clouds {sorted(clouds)}")
        for vm in vms:
            if vm.state is not VmState.RUNNING:
                raise InstanceNotRunning(f"{vm.vm_id} is {vm.state.value}")
        duration = task_duration(profile, len(vms))
        if timeout_s is not None and duration > timeout_s:
            outcome, delay = OUTCOME_TIMED_OUT, timeout_s
        else:
            outcome, delay = OUTCOME_SUCCEEDED, duration
        self._task_counter += 1
        record = {
            "task_id": f"task-{self._task_counter:04d}",
            "outcome": outcome,
            "fire_at_s": self.clock.now_s + delay,
            "duration_s": duration,
            "vm_ids": [vm.vm_id for vm in vms],
            "tag": tag or {},
        }
        self.clock.schedule(record["fire_at_s"], SimEvent(EVENT_TASK_OUTCOME, dict(record)))
        return record

    def apply_task_outcome(self, vm_ids: Iterable[str]) -> None:
        """Terminate a task's instance group at the current sim time."""
        for vm_id in vm_ids:
            vm = self.instances[vm_id]
            if vm.state is VmState.RUNNING:
                vm.state = VmState.TERMINATED
                vm.terminated_at_s = self.clock.now_s

    def handle(self, event: SimEvent) -> None:
        """Default bookkeeping for the simulator's own event kinds."""
        if event.kind == EVENT_VM_GROUP_READY:
            self.mark_group_running(event.data["vm_ids"])
        elif event.kind == EVENT_TASK_OUTCOME:
            self.apply_task_outcome(event.data["vm_ids"])

    # -- billing -------------------------------------------------------------

    def billed_seconds(self, vm: CloudInstance) -> int:
        if vm.started_at_s is None:
            return 0
        end = vm.terminated_at_s if vm.terminated_at_s is not None else self.clock.now_s
        return max(0, end - vm.started_at_s)

    def instance_cost(self, vm_id: str) -> Decimal:
        vm = self.instances[vm_id]
        price = self._cloud(vm.cloud_id).machine(vm.machine_type).price_per_hour
        return Decimal(ceil_hours(self.billed_seconds(vm))) * price

    def accrued_cost(self, cloud_id: Optional[str] = None, vm_id: Optional[str] = None) -> Decimal:
        """Ceiling-hour cost of one vm, one cloud, or everything."""
        if vm_id is not None:
            return self.instance_cost(vm_id)
        total = Decimal(0)
        for vm in self.instances.values():
            if cloud_id is None or vm.cloud_id == cloud_id:
                total += self.instance_cost(vm.vm_id)
        return total

    def assert_capacity_invariant(self) -> None:
        for cloud_id, spec in self.clouds.items():
            if spec.capacity_cpus is not None:
                used = self.committed_cpus(cloud_id)
                if used > spec.capacity_cpus:
                    raise CapacityExceeded(f"cloud '{cloud_id}' over capacity: {used} > {spec.capacity_cpus}")


# ---------------------------------------------------------------------------
# topology file
# ---------------------------------------------------------------------------

def parse_topology(text: str) -> list[CloudSpec]:
    """Parse the YAML cloud topology document into CloudSpec values."""
    import yaml

    from .errors import ModelSyntaxError, SchemaError

    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelSyntaxError(f"unparseable topology document: {exc}") from exc
    if not isinstance(doc, list):
        raise SchemaError("topology document must be a list of clouds")
    specs = []
    for i, raw in enumerate(doc):
        if not isinstance(raw, dict):
            raise SchemaError(f"clouds[{i}]: expected a mapping")
        allowed = {"cloud_id", "kind", "capacity_cpus", "provisioning_latency_s", "catalog"}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise SchemaError(f"clouds[{i}]: unknown key(s) {', '.join(unknown)}")
        try:
            kind = CloudKind(raw.get("kind"))
        except ValueError:
            raise SchemaError(f"clouds[{i}]: kind must be public or private")
        catalog = []
        for j, m in enumerate(raw.get("catalog") or []):
            if not isinstance(m, dict) or set(m) != {"name", "cpus", "memory_gb", "price_per_hour"}:
                raise SchemaError(f"clouds[{i}].catalog[{j}]: expected name, cpus, memory_gb, price_per_hour")
            catalog.append(MachineType(
                name=str(m["name"]),
                cpus=int(m["cpus"]),
                memory_gb=float(m["memory_gb"]),
                price_per_hour=Decimal(str(m["price_per_hour"])),
            ))
        capacity = raw.get("capacity_cpus")
        specs.append(CloudSpec(
            cloud_id=str(raw.get("cloud_id")),
            kind=kind,
            catalog=tuple(catalog),
            capacity_cpus=int(capacity) if capacity is not None else None,
            provisioning_latency_s=int(raw.get("provisioning_latency_s", 120)),
        ))
    return specs


def default_catalog() -> tuple[MachineType, ...]:
    return (
        MachineType("small", 1, 2.0, Decimal("0.05")),
        MachineType("medium", 2, 4.0, Decimal("0.10")),
        MachineType("large", 4, 8.0, Decimal("0.20")),
    )


def default_topology() -> list[CloudSpec]:
    return [
        CloudSpec("public", CloudKind.PUBLIC, default_catalog(), capacity_cpus=None),
        CloudSpec("private", CloudKind.PRIVATE, default_catalog(), capacity_cpus=8),
    ]
