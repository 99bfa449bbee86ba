"""Software process models: activities, roles, artifacts and guarded edges.

A process model is a DAG of activities. Each activity is a manual task or
decision point owned by a role, an automated tool run with a resource
demand (optionally elastic), or a reference to another model that gets
flattened in before enactment. Everything in this module is a pure value
transformation; nothing here touches clocks, clouds or storage.

Validation is two-staged:

* :func:`parse_process` rejects structurally broken documents
  (``SyntaxError`` / ``SchemaError`` codes), including duplicate ids and
  unknown keys.
* :func:`validate` returns semantic :class:`Violation` values (cycles,
  dangling references, producer rules, guard rules) without raising.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional

import yaml

from .errors import (
    AmbiguousBoundary,
    CyclicModel,
    ModelSyntaxError,
    RecursiveSubWorkflow,
    SchemaError,
    UnresolvedReference,
)


class ActivityKind(str, Enum):
    MANUAL = "manual"
    AUTOMATED = "automated"
    SUBWORKFLOW = "subworkflow"


class ScalingType(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ResourceDemand:
    """Compute footprint of one automated activity.

    ``cpus`` is the total cpu count the task needs across the instance
    group; ``memory_gb`` must be satisfied by every node individually.
    """

    cpus: int
    memory_gb: float


#: Demand assumed for automated activities that do not declare one.
DEFAULT_DEMAND = ResourceDemand(cpus=1, memory_gb=1.0)


@dataclass(frozen=True)
class ElasticityPolicy:
    """Scale-up-on-timeout parameters for one automated activity."""

    machine_type: str
    initial_instances: int
    timeout_hours: float
    scaling_type: ScalingType
    max_rounds: int
    max_instances: int


@dataclass(frozen=True)
class Role:
    role_id: str
    name: str


@dataclass(frozen=True)
class ArtifactSpec:
    artifact_id: str
    name: str
    confidential: bool = False
    external: bool = False


@dataclass(frozen=True)
class Activity:
    activity_id: str
    kind: ActivityKind
    role_id: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    confidential: bool = False
    demand: Optional[ResourceDemand] = None
    elasticity: Optional[ElasticityPolicy] = None
    deadline_hours: Optional[float] = None
    model_ref: Optional[str] = None  # subworkflow only


@dataclass(frozen=True)
class Edge:
    from_activity: str
    to_activity: str
    guard: Optional[str] = None


@dataclass(frozen=True)
class ProcessModel:
    model_id: str
    name: str
    activities: tuple[Activity, ...] = ()
    artifacts: tuple[ArtifactSpec, ...] = ()
    roles: tuple[Role, ...] = ()
    edges: tuple[Edge, ...] = ()

    def activity(self, activity_id: str) -> Activity:
        for act in self.activities:
            if act.activity_id == activity_id:
                return act
        raise KeyError(activity_id)

    def incoming(self, activity_id: str) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.to_activity == activity_id)

    def outgoing(self, activity_id: str) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.from_activity == activity_id)


@dataclass(frozen=True)
class Violation:
    """One broken invariant; validation reports values instead of raising."""

    code: str
    subject: str
    message: str


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = ("model_id", "name", "roles", "artifacts", "activities", "edges")
_ACTIVITY_KEYS = (
    "id", "kind", "role", "inputs", "outputs", "confidential",
    "demand", "elasticity", "deadline_hours", "ref",
)
_DEMAND_KEYS = ("cpus", "memory_gb")
_ELASTICITY_KEYS = (
    "machine_type", "initial_instances", "timeout_hours",
    "scaling_type", "max_rounds", "max_instances",
)
_EDGE_KEYS = ("from", "to", "guard")
_ROLE_KEYS = ("id", "name")
_ARTIFACT_KEYS = ("id", "name", "confidential", "external")


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"{where}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(entry: dict, allowed: Iterable[str], where: str) -> None:
    unknown = sorted(set(entry) - set(allowed))
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _str_field(entry: dict, key: str, where: str, required: bool = True) -> Optional[str]:
    if key not in entry or entry[key] is None:
        if required:
            raise SchemaError(f"{where}: missing required key '{key}'")
        return None
    value = entry[key]
    if not isinstance(value, str) or not value:
        raise SchemaError(f"{where}: '{key}' must be a non-empty string")
    return value


def _bool_field(entry: dict, key: str, where: str, default: bool = False) -> bool:
    if key not in entry:
        return default
    value = entry[key]
    if not isinstance(value, bool):
        raise SchemaError(f"{where}: '{key}' must be a boolean")
    return value


def _int_field(entry: dict, key: str, where: str) -> int:
    if key not in entry:
        raise SchemaError(f"{where}: missing required key '{key}'")
    value = entry[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: '{key}' must be an integer")
    return value

def _number_field(entry: dict, key: str, where: str, required: bool = True) -> Optional[float]:
    if key not in entry or entry[key] is None:
        if required:
            raise SchemaError(f"{where}: missing required key '{key}'")
        return None
    value = entry[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: '{key}' must be a number")
    return float(value)


def _id_list(entry: dict, key: str, where: str) -> tuple[str, ...]:
    if key not in entry or entry[key] is None:
        return ()
    value = entry[key]
    if not isinstance(value, list) or any(not isinstance(x, str) or not x for x in value):
        raise SchemaError(f"{where}: '{key}' must be a list of non-empty strings")
    return tuple(value)


def _parse_demand(raw, where: str) -> ResourceDemand:
    entry = _require_mapping(raw, where)
    _check_keys(entry, _DEMAND_KEYS, where)
    cpus = _int_field(entry, "cpus", where)
    memory_gb = _number_field(entry, "memory_gb", where)
    return ResourceDemand(cpus=cpus, memory_gb=memory_gb)


def _parse_elasticity(raw, where: str) -> ElasticityPolicy:
    entry = _require_mapping(raw, where)
    _check_keys(entry, _ELASTICITY_KEYS, where)
    scaling = _str_field(entry, "scaling_type", where)
    try:
        scaling_type = ScalingType(scaling)
    except ValueError:
        raise SchemaError(f"{where}: scaling_type must be one of linear, exponential")
    return ElasticityPolicy(
        machine_type=_str_field(entry, "machine_type", where),
        initial_instances=_int_field(entry, "initial_instances", where),
        timeout_hours=_number_field(entry, "timeout_hours", where),
        scaling_type=scaling_type,
        max_rounds=_int_field(entry, "max_rounds", where),
        max_instances=_int_field(entry, "max_instances", where),
    )


def _parse_activity(raw, index: int) -> Activity:
    where = f"activities[{index}]"
    entry = _require_mapping(raw, where)
    _check_keys(entry, _ACTIVITY_KEYS, where)
    activity_id = _str_field(entry, "id", where)
    where = f"activity '{activity_id}'"
    kind_raw = _str_field(entry, "kind", where)
    try:
        kind = ActivityKind(kind_raw)
    except ValueError:
        raise SchemaError(f"{where}: kind must be one of manual, automated, subworkflow")

    model_ref = _str_field(entry, "ref", where, required=False)
    if kind is ActivityKind.SUBWORKFLOW and model_ref is None:
        raise SchemaError(f"{where}: subworkflow activities require 'ref'")
    if kind is not ActivityKind.SUBWORKFLOW and model_ref is not None:
        raise SchemaError(f"{where}: 'ref' is only valid on subworkflow activities")

    demand = None
    if "demand" in entry and entry["demand"] is not None:
        demand = _parse_demand(entry["demand"], f"{where}.demand")
    elif kind is ActivityKind.AUTOMATED:
        demand = DEFAULT_DEMAND

    elasticity = None
    if "elasticity" in entry and entry["elasticity"] is not None:
        elasticity = _parse_elasticity(entry["elasticity"], f"{where}.elasticity")

    return Activity(
        activity_id=activity_id,
        kind=kind,
        role_id=_str_field(entry, "role", where),
        inputs=_id_list(entry, "inputs", where),
        outputs=_id_list(entry, "outputs", where),
        confidential=_bool_field(entry, "confidential", where),
        demand=demand,
        elasticity=elasticity,
        deadline_hours=_number_field(entry, "deadline_hours", where, required=False),
        model_ref=model_ref,
    )


def parse_process(text: str) -> ProcessModel:
    """Parse a process definition document into a :class:`ProcessModel`.

    Raises ``ModelSyntaxError`` for unparseable input and ``SchemaError``
    for structural problems (missing/unknown keys, wrong types, duplicate
    ids). Semantic invariants are left to :func:`validate`.
    """
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise ModelSyntaxError(f"unparseable process document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelSyntaxError("process document must be a mapping")
    _check_keys(doc, _TOP_KEYS, "document")
    for key in _TOP_KEYS:
        if key not in doc:
            raise SchemaError(f"document: missing required key '{key}'")

    model_id = _str_field(doc, "model_id", "document")
    name = _str_field(doc, "name", "document")

    roles = []
    for i, raw in enumerate(_as_list(doc["roles"], "roles")):
        entry = _require_mapping(raw, f"roles[{i}]")
        _check_keys(entry, _ROLE_KEYS, f"roles[{i}]")
        rid = _str_field(entry, "id", f"roles[{i}]")
        roles.append(Role(role_id=rid, name=_str_field(entry, "name", f"roles[{i}]", required=False) or rid))

    artifacts = []
    for i, raw in enumerate(_as_list(doc["artifacts"], "artifacts")):
        entry = _require_mapping(raw, f"artifacts[{i}]")
        _check_keys(entry, _ARTIFACT_KEYS, f"artifacts[{i}]")
        aid = _str_field(entry, "id", f"artifacts[{i}]")
        artifacts.append(ArtifactSpec(
            artifact_id=aid,
            name=_str_field(entry, "name", f"artifacts[{i}]", required=False) or aid,
            confidential=_bool_field(entry, "confidential", f"artifacts[{i}]"),
            external=_bool_field(entry, "external", f"artifacts[{i}]"),
        ))

    activities = [_parse_activity(raw, i) for i, raw in enumerate(_as_list(doc["activities"], "activities"))]

    edges = []
    for i, raw in enumerate(_as_list(doc["edges"], "edges")):
        entry = _require_mapping(raw, f"edges[{i}]")
        _check_keys(entry, _EDGE_KEYS, f"edges[{i}]")
        guard = _str_field(entry, "guard", f"edges[{i}]", required=False)
        edges.append(Edge(
            from_activity=_str_field(entry, "from", f"edges[{i}]"),
            to_activity=_str_field(entry, "to", f"edges[{i}]"),
            guard=guard,
        ))

    for label, ids in (
        ("activity", [a.activity_id for a in activities]),
        ("artifact", [a.artifact_id for a in artifacts]),
        ("role", [r.role_id for r in roles]),
    ):
        dupes = sorted({x for x in ids if ids.count(x) > 1})
        if dupes:
            raise SchemaError(f"duplicate {label} id(s): {', '.join(dupes)}")

    return ProcessModel(
        model_id=model_id,
        name=name,
        activities=tuple(activities),
        artifacts=tuple(artifacts),
        roles=tuple(roles),
        edges=tuple(edges),
    )


def _as_list(value, where: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise SchemaError(f"{where}: expected a list")
    return value


# ---------------------------------------------------------------------------
# serialization (round-trips through parse_process)
# ---------------------------------------------------------------------------

def serialize_process(model: ProcessModel) -> str:
    """Emit the canonical YAML form; key order is fixed for stable diffs."""
    doc: dict = {
        "model_id": model.model_id,
        "name": model.name,
        "roles": [{"id": r.role_id, "name": r.name} for r in model.roles],
        "artifacts": [
            {"id": a.artifact_id, "name": a.name, "confidential": a.confidential, "external": a.external}
            for a in model.artifacts
        ],
        "activities": [_activity_doc(a) for a in model.activities],
        "edges": [_edge_doc(e) for e in model.edges],
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False, allow_unicode=True)


def _activity_doc(act: Activity) -> dict:
    entry: dict = {
        "id": act.activity_id,
        "kind": act.kind.value,
        "role": act.role_id,
        "inputs": list(act.inputs),
        "outputs": list(act.outputs),
        "confidential": act.confidential,
    }
    if act.demand is not None:
        entry["demand"] = {"cpus": act.demand.cpus, "memory_gb": act.demand.memory_gb}
    if act.elasticity is not None:
        pol = act.elasticity
        entry["elasticity"] = {
            "machine_type": pol.machine_type,
            "initial_instances": pol.initial_instances,
            "timeout_hours": pol.timeout_hours,
            "scaling_type": pol.scaling_type.value,
            "max_rounds": pol.max_rounds,
            "max_instances": pol.max_instances,
        }
    if act.deadline_hours is not None:
        entry["deadline_hours"] = act.deadline_hours
    if act.model_ref is not None:
        entry["ref"] = act.model_ref
    return entry


def _edge_doc(edge: Edge) -> dict:
    entry = {"from": edge.from_activity, "to": edge.to_activity}
    if edge.guard is not None:
        entry["guard"] = edge.guard
    return entry


# ---------------------------------------------------------------------------
# semantic validation
# ---------------------------------------------------------------------------

def validate(model: ProcessModel) -> list[Violation]:
    """Check every model invariant; an empty list means enactable."""
    out: list[Violation] = []
    seen: dict = {}
    for label, ids in (
        ("DuplicateActivityId", [a.activity_id for a in model.activities]),
        ("DuplicateArtifactId", [a.artifact_id for a in model.artifacts]),
        ("DuplicateRoleId", [r.role_id for r in model.roles]),
    ):
        for dup in sorted({x for x in ids if ids.count(x) > 1}):
            out.append(Violation(label, dup, f"id '{dup}' declared more than once"))

    activity_ids = {a.activity_id for a in model.activities}
    artifact_ids = {a.artifact_id for a in model.artifacts}
    role_ids = {r.role_id for r in model.roles}
    by_id = {a.activity_id: a for a in model.activities}

    for act in model.activities:
        if act.role_id not in role_ids:
            out.append(Violation("UnknownRole", act.activity_id,
                                 f"activity '{act.activity_id}' names undeclared role '{act.role_id}'"))
        for aid in (*act.inputs, *act.outputs):
            if aid not in artifact_ids:
                out.append(Violation("UnknownArtifact", act.activity_id,
                                     f"activity '{act.activity_id}' references undeclared artifact '{aid}'"))
        if act.elasticity is not None and act.kind is not ActivityKind.AUTOMATED:
            out.append(Violation("ElasticityOnNonAutomated", act.activity_id,
                                 "elasticity is only valid on automated activities"))
        if act.kind is ActivityKind.SUBWORKFLOW and act.demand is not None:
            out.append(Violation("SubWorkflowHasDemand", act.activity_id,
                                 "subworkflow activities must not declare a demand"))
        if act.kind is ActivityKind.AUTOMATED and act.demand is None:
            out.append(Violation("MissingDemand", act.activity_id,
                                 "automated activities require a resource demand"))
        if act.demand is not None and (act.demand.cpus < 1 or act.demand.memory_gb <= 0):
            out.append(Violation("InvalidDemand", act.activity_id,
                                 "demand requires cpus >= 1 and memory_gb > 0"))
        if act.deadline_hours is not None and act.deadline_hours <= 0:
            out.append(Violation("InvalidDeadline", act.activity_id,
                                 "deadline_hours must be positive"))
        pol = act.elasticity
        if pol is not None:
            if pol.initial_instances < 1 or pol.initial_instances > pol.max_instances:
                out.append(Violation("InvalidElasticity", act.activity_id,
                                     "requires 1 <= initial_instances <= max_instances"))
            if pol.max_rounds < 1:
                out.append(Violation("InvalidElasticity", act.activity_id,
                                     "max_rounds must be at least 1"))
            if pol.timeout_hours <= 0:
                out.append(Violation("InvalidElasticity", act.activity_id,
                                     "timeout_hours must be positive"))

    for edge in model.edges:
        for endpoint in (edge.from_activity, edge.to_activity):
            if endpoint not in activity_ids:
                out.append(Violation("UnknownActivity", endpoint,
                                     f"edge {edge.from_activity}->{edge.to_activity} names undeclared activity"))
        if edge.guard is not None:
            if not edge.guard:
                out.append(Violation("EmptyGuard", edge.from_activity, "guard must be non-empty"))
            src = by_id.get(edge.from_activity)
            if src is not None and src.kind is not ActivityKind.MANUAL:
                out.append(Violation("GuardOnNonManual", edge.from_activity,
                                     "guards may only appear on edges leaving manual activities"))

    # guard labels must be unique among one activity's guarded out-edges
    for act in model.activities:
        guards = [e.guard for e in model.edges if e.from_activity == act.activity_id and e.guard is not None]
        for dup in sorted({g for g in guards if guards.count(g) > 1}):
            out.append(Violation("DuplicateGuard", act.activity_id,
                                 f"guard '{dup}' used on more than one outgoing edge"))

    # non-external artifacts need exactly one producer
    producers: dict[str, list[str]] = {a.artifact_id: [] for a in model.artifacts}
    for act in model.activities:
        for aid in act.outputs:
            if aid in producers:
                producers[aid].append(act.activity_id)
    for spec in model.artifacts:
        made_by = producers[spec.artifact_id]
        if not spec.external and len(made_by) == 0:
            out.append(Violation("MissingProducer", spec.artifact_id,
                                 f"non-external artifact '{spec.artifact_id}' has no producing activity"))
        if not spec.external and len(made_by) > 1:
            out.append(Violation("MultipleProducers", spec.artifact_id,
                                 f"artifact '{spec.artifact_id}' produced by {', '.join(sorted(made_by))}"))

    cycle = _find_cycle(model)
    if cycle:
        out.append(Violation("CycleDetected", cycle[0],
                             "cycle through " + " -> ".join(cycle)))
    return out


def _find_cycle(model: ProcessModel) -> list[str]:
    adjacency: dict[str, list[str]] = {a.activity_id: [] for a in model.activities}
    for edge in model.edges:
        if edge.from_activity in adjacency and edge.to_activity in adjacency:
            adjacency[edge.from_activity].append(edge.to_activity)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {node: WHITE for node in adjacency}
    stack: list[str] = []

    def visit(node: str) -> Optional[list[str]]:
        color[node] = GREY
        stack.append(node)
        for nxt in sorted(adjacency[node]):
            if color[nxt] == GREY:
                return stack[stack.index(nxt):] + [nxt]
            if color[nxt] == WHITE:
                found = visit(nxt)
                if found:
                    return found
        color[node] = BLACK
        stack.pop()
        return None

    for node in sorted(adjacency):
        if color[node] == WHITE:
            found = visit(node)
            if found:
                return found
    return []


# ---------------------------------------------------------------------------
# sub-workflow expansion
# ---------------------------------------------------------------------------

def expand_subworkflows(model: ProcessModel, library: Mapping[str, ProcessModel]) -> ProcessModel:
    """Flatten every subworkflow activity into its referenced model.

    Child activity and artifact ids are namespaced ``<parent_id>/<child_id>``.
    Control flow reattaches at the child's unique entry (no incoming edges)
    and exit (no outgoing edges); the composite activity's declared inputs
    are added to the entry activity and its outputs to the exit activity, so
    artifact gating and production survive flattening. Roles merge by id.
    """
    return _expand(model, library, chain=())


def _expand(model: ProcessModel, library: Mapping[str, ProcessModel], chain: tuple[str, ...]) -> ProcessModel:
    if not any(a.kind is ActivityKind.SUBWORKFLOW for a in model.activities):
        return model

    activities: list[Activity] = []
    artifacts: list[ArtifactSpec] = list(model.artifacts)
    roles: list[Role] = list(model.roles)
    edges: list[Edge] = []
    entry_of: dict[str, str] = {}
    exit_of: dict[str, str] = {}

    for act in model.activities:
        if act.kind is not ActivityKind.SUBWORKFLOW:
            activities.append(act)
            continue
        ref = act.model_ref or ""
        if ref in chain or ref == model.model_id:
            raise RecursiveSubWorkflow(f"subworkflow reference chain revisits '{ref}'")
        child = library.get(ref)
        if child is None:
            raise UnresolvedReference(f"activity '{act.activity_id}' references unknown model '{ref}'")
        child = _expand(child, library, chain + (model.model_id,))

        child_ids = {c.activity_id for c in child.activities}
        entries = sorted(c for c in child_ids if not any(e.to_activity == c for e in child.edges))
        exits = sorted(c for c in child_ids if not any(e.from_activity == c for e in child.edges))
        if len(entries) != 1 or len(exits) != 1:
            raise AmbiguousBoundary(
                f"model '{ref}' has {len(entries)} entry and {len(exits)} exit activities; need exactly one of each")

        prefix = act.activity_id + "/"
        rename = {c: prefix + c for c in child_ids}
        art_rename = {a.artifact_id: prefix + a.artifact_id for a in child.artifacts}
        entry_of[act.activity_id] = rename[entries[0]]
        exit_of[act.activity_id] = rename[exits[0]]

        for spec in child.artifacts:
            artifacts.append(replace(spec, artifact_id=art_rename[spec.artifact_id]))
        present_roles = {r.role_id for r in roles}
        for role in child.roles:
            if role.role_id not in present_roles:
                roles.append(role)
                present_roles.add(role.role_id)

        for cact in child.activities:
            inputs = tuple(art_rename[a] for a in cact.inputs)
            outputs = tuple(art_rename[a] for a in cact.outputs)
            if cact.activity_id == entries[0]:
                inputs = inputs + act.inputs
            if cact.activity_id == exits[0]:
                outputs = outputs + act.outputs
            activities.append(replace(
                cact,
                activity_id=rename[cact.activity_id],
                inputs=inputs,
                outputs=outputs,
            ))
        for cedge in child.edges:
            edges.append(replace(
                cedge,
                from_activity=rename[cedge.from_activity],
                to_activity=rename[cedge.to_activity],
            ))

    for edge in model.edges:
        src = exit_of.get(edge.from_activity, edge.from_activity)
        dst = entry_of.get(edge.to_activity, edge.to_activity)
        edges.append(replace(edge, from_activity=src, to_activity=dst))

    return ProcessModel(
        model_id=model.model_id,
        name=model.name,
        activities=tuple(activities),
        artifacts=tuple(artifacts),
        roles=tuple(roles),
        edges=tuple(edges),
    )


# ---------------------------------------------------------------------------
# graph queries
# ---------------------------------------------------------------------------

def topological_levels(model: ProcessModel) -> list[list[str]]:
    """Layer activities so every edge points to a strictly later level.

    Level k holds the activities whose predecessors all sit in levels < k;
    ids within a level are sorted for determinism. Raises ``CyclicModel``
    if the edge graph is not a DAG (unreachable after a clean validate).
    """
    remaining = {a.activity_id for a in model.activities}
    preds: dict[str, set[str]] = {aid: set() for aid in remaining}
    for edge in model.edges:
        preds[edge.to_activity].add(edge.from_activity)

    levels: list[list[str]] = []
    placed: set[str] = set()
    while remaining:
        layer = sorted(aid for aid in remaining if preds[aid] <= placed)
        if not layer:
            raise CyclicModel("edge graph contains a cycle")
        levels.append(layer)
        placed.update(layer)
        remaining.difference_update(layer)
    return levels


def confidential_artifact_ids(model: ProcessModel) -> frozenset[str]:
    return frozenset(a.artifact_id for a in model.artifacts if a.confidential)


def is_effectively_confidential(activity: Activity, confidential_artifacts: frozenset[str]) -> bool:
    """Confidentiality is inherited: touching a confidential artifact taints the activity."""
    if activity.confidential:
        return True
    return any(a in confidential_artifacts for a in (*activity.inputs, *activity.outputs))
