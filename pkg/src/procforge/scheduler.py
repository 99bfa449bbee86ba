"""Placement planning and the scale-up-on-timeout controller.

Planning is greedy: activities are ordered earliest-deadline-first so the
scarce private capacity goes to the most constrained work, then each one
takes its cheapest feasible (cloud, machine) pair. Confidential work, or
work touching confidential artifacts, never leaves private clouds.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Optional

from .cloud import CloudKind, CloudSpec, TaskProfile, ceil_hours, task_duration
from .errors import IllegalState
from .model import Activity, ActivityKind, ElasticityPolicy, ScalingType, is_effectively_confidential


@dataclass(frozen=True)
class PlacementDecision:
    activity_id: str
    cloud_id: str
    machine_type: str
    instance_count: int
    estimated_duration_s: int
    estimated_cost: Decimal


@dataclass(frozen=True)
class CloudCapacity:
    """A cloud plus how many cpus it has left right now (None = unbounded)."""

    spec: CloudSpec
    free_cpus: Optional[int]


@dataclass(frozen=True)
class PlacementRequest:
    activity: Activity
    profile: TaskProfile
    attempt: int = 0


@dataclass(frozen=True)
class SchedulingProblem:
    ready: tuple[PlacementRequest, ...]
    clouds: tuple[CloudCapacity, ...]
    confidential_artifacts: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SchedulingPlan:
    placements: dict
    deferred: tuple[str, ...]

    @property
    def total_cost(self) -> Decimal:
        return sum((p.estimated_cost for p in self.placements.values()), Decimal(0))


EXHAUSTED = "Exhausted"


def next_scale(policy: ElasticityPolicy, attempt_k: int):
    """Instance count for elastic round k, or ``EXHAUSTED``.

    Exponential doubles per round, linear adds the initial count; both cap
    at max_instances. The policy is spent once the round budget is used or
    the previous round had already hit the cap before capping.
    """
    if attempt_k < 0:
        raise ValueError("attempt_k must be non-negative")
    if attempt_k >= policy.max_rounds:
        return EXHAUSTED
    if attempt_k > 0 and _uncapped(policy, attempt_k - 1) >= policy.max_instances:
        return EXHAUSTED
    return min(_uncapped(policy, attempt_k), policy.max_instances)


def _uncapped(policy: ElasticityPolicy, k: int) -> int:
    if policy.scaling_type is ScalingType.EXPONENTIAL:
        return policy.initial_instances * (2 ** k)
    return policy.initial_instances * (k + 1)


def on_timeout(activity: Activity, policy: ElasticityPolicy, attempt_k: int):
    """Rescale directive after round ``attempt_k`` timed out, or None to fail.

    The next round keeps the policy's timeout; only the instance count grows.
    """
    if policy is None:
        raise IllegalState(f"activity '{activity.activity_id}' has no elasticity policy")
    count = next_scale(policy, attempt_k + 1)
    if count == EXHAUSTED:
        return None
    return {"new_count": count, "new_timeout_s": int(round(policy.timeout_hours * 3600))}


def round_instance_counts(policy: ElasticityPolicy) -> list[int]:
    """The full escalation sequence a policy can run through."""
    counts = []
    for k in range(policy.max_rounds):
        n = next_scale(policy, k)
        if n == EXHAUSTED:
            break
        counts.append(n)
    return counts


# ---------------------------------------------------------------------------
# feasibility and planning
# ---------------------------------------------------------------------------

def placement_count(activity: Activity, attempt: int):
    """How many instances this activity runs on at the given attempt."""
    if activity.elasticity is None:
        return 1
    return next_scale(activity.elasticity, attempt)


def feasible_options(
    request: PlacementRequest,
    clouds: tuple[CloudCapacity, ...],
    confidential_artifacts: frozenset[str] = frozenset(),
) -> list[PlacementDecision]:
    """All placements that satisfy the request's constraints, cheapest first.

    The instance count is fixed by the elasticity policy at the current
    attempt (1 without a policy), and an elastic activity only runs on its
    policy's machine type. An empty list means infeasible right now.
    """
    activity = request.activity
    count = placement_count(activity, request.attempt)
    if count == EXHAUSTED:
        return []
    demand = activity.demand
    if demand is None:
        return []
    confidential = is_effectively_confidential(activity, confidential_artifacts)
    duration = task_duration(request.profile, count)
    if activity.deadline_hours is not None and duration > activity.deadline_hours * 3600:
        return []

    options = []
    for cap in sorted(clouds, key=lambda c: c.spec.cloud_id):
        if confidential and cap.spec.kind is not CloudKind.PRIVATE:
            continue
        for machine in sorted(cap.spec.catalog, key=lambda m: m.name):
            if activity.elasticity is not None and machine.name != activity.elasticity.machine_type:
                continue
            if machine.cpus * count < demand.cpus or machine.memory_gb < demand.memory_gb:
                continue
            if cap.free_cpus is not None and machine.cpus * count > cap.free_cpus:
                continue
            cost = Decimal(count) * Decimal(ceil_hours(duration)) * machine.price_per_hour
            options.append(PlacementDecision(
                activity_id=activity.activity_id,
                cloud_id=cap.spec.cloud_id,
                machine_type=machine.name,
                instance_count=count,
                estimated_duration_s=duration,
                estimated_cost=cost,
            ))
    options.sort(key=_preference_key)
    return options


def _preference_key(option: PlacementDecision):
    return (option.estimated_cost, option.estimated_duration_s, option.cloud_id, option.machine_type)


def edf_order(requests: tuple[PlacementRequest, ...]) -> list[PlacementRequest]:
    """Earliest deadline first; deadline-free activities last, ids break ties."""
    return sorted(
        requests,
        key=lambda r: (
            r.activity.deadline_hours if r.activity.deadline_hours is not None else float("inf"),
            r.activity.activity_id,
        ),
    )


def plan_placements(problem: SchedulingProblem) -> SchedulingPlan:
    """Greedy min-cost placement over the problem's free-capacity snapshot.

    Activities that fit nowhere are deferred rather than failed; they can be
    retried once capacity frees up.
    """
    free = {cap.spec.cloud_id: cap.free_cpus for cap in problem.clouds}
    specs = {cap.spec.cloud_id: cap.spec for cap in problem.clouds}
    placements: dict[str, PlacementDecision] = {}
    deferred: list[str] = []
    for request in edf_order(problem.ready):
        snapshot = tuple(
            CloudCapacity(spec=specs[cid], free_cpus=free[cid]) for cid in sorted(specs)
        )
        options = feasible_options(request, snapshot, problem.confidential_artifacts)
        if not options:
            deferred.append(request.activity.activity_id)
            continue
        best = options[0]
        placements[request.activity.activity_id] = best
        if free[best.cloud_id] is not None:
            free[best.cloud_id] -= specs[best.cloud_id].machine(best.machine_type).cpus * best.instance_count
    return SchedulingPlan(placements=placements, deferred=tuple(deferred))


def exhaustive_min_cost(problem: SchedulingProblem):
    """Joint-optimal assignment by brute force; the small-problem oracle.

    Returns (total_cost, assignment dict) or None when no joint feasible
    assignment exists. Exponential in the activity count: test use only.
    """
    requests = sorted(problem.ready, key=lambda r: r.activity.activity_id)
    unconstrained = tuple(
        CloudCapacity(spec=cap.spec, free_cpus=cap.spec.capacity_cpus) for cap in problem.clouds
    )
    specs = {cap.spec.cloud_id: cap.spec for cap in problem.clouds}
    base_free = {cap.spec.cloud_id: cap.free_cpus for cap in problem.clouds}
    per_activity = [
        feasible_options(r, unconstrained, problem.confidential_artifacts) for r in requests
    ]
    if any(not options for options in per_activity):
        return None

    best: Optional[tuple[Decimal, dict]] = None

    def recurse(i: int, free: dict, chosen: dict, cost: Decimal) -> None:
        nonlocal best
        if best is not None and cost > best[0]:
            return
        if i == len(requests):
            if best is None or cost < best[0]:
                best = (cost, dict(chosen))
            return
        for option in per_activity[i]:
            need = specs[option.cloud_id].machine(option.machine_type).cpus * option.instance_count
            remaining = free[option.cloud_id]
            if remaining is not None and need > remaining:
                continue
            if remaining is not None:
                free[option.cloud_id] = remaining - need
            chosen[requests[i].activity.activity_id] = option
            recurse(i + 1, free, chosen, cost + option.estimated_cost)
            del chosen[requests[i].activity.activity_id]
            free[option.cloud_id] = remaining

    recurse(0, dict(base_free), {}, Decimal(0))
    return best
