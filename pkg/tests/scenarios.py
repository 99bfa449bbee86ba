"""Seeded random end-to-end scenarios for determinism and safety properties.

A scenario is a random layered DAG of manual and automated activities with
random demands, confidentiality flags, elasticity policies, task profiles
and scripted human decisions. Running one drives a full runtime and
captures the live state digest at every appended event, so tests can check
replay equivalence index by index.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from procforge.cloud import CloudKind, CloudSpec, SimClock, TaskProfile, default_catalog
from procforge.engine import InstanceStatus
from procforge.model import parse_process, serialize_process
from procforge.provenance import ProvenanceStore, state_digest
from procforge.runtime import WorkflowRuntime

MEMORY_CHOICES = [0.5, 1.0, 2.0, 4.0]
BASES = [600, 1500, 3000, 5400, 7200]
SERIALS = [0.0, 0.25, 0.5]
OVERHEADS = [0, 5, 30]


@dataclass
class Scenario:
    seed: int
    model_text: str
    clouds: list
    profiles: dict
    external_inputs: set
    decisions: dict  # activity_id -> label chosen when asked


def random_scenario(seed: int) -> Scenario:
    rng = random.Random(seed)
    n = rng.randint(3, 8)
    catalog = default_catalog()
    machines = {m.name: m for m in catalog}

    activity_docs = []
    edge_docs = []
    artifact_docs = [{"id": "seed-input", "external": True,
                      "confidential": rng.random() < 0.2}]
    decisions: dict[str, str] = {}
    profiles: dict[str, TaskProfile] = {}
    kinds = {}

    for i in range(n):
        aid = f"a{i:02d}"
        kind = "manual" if rng.random() < 0.35 else "automated"
        kinds[aid] = kind
        preds = []
        if i > 0:
            count = rng.randint(1, min(2, i))
            preds = sorted(rng.sample([f"a{j:02d}" for j in range(i)], count))
        inputs = [f"art-{p}" for p in preds] or ["seed-input"]
        out_id = f"art-{aid}"
        artifact_docs.append({"id": out_id, "confidential": rng.random() < 0.2})
        entry = {
            "id": aid,
            "kind": kind,
            "role": rng.choice(["dev", "qa", "ops"]),
            "inputs": inputs,
            "outputs": [out_id],
            "confidential": rng.random() < 0.15,
        }
        if kind == "automated":
            policy = None
            if rng.random() < 0.35:
                machine = rng.choice(list(machines))
                initial = rng.randint(1, 2)
                policy = {
                    "machine_type": machine,
                    "initial_instances": initial,
                    "timeout_hours": rng.choice([0.5, 1.0]),
                    "scaling_type": rng.choice(["linear", "exponential"]),
                    "max_rounds": rng.randint(1, 3),
                    "max_instances": initial * 4,
                }
                max_cpus = machines[machine].cpus * initial
                mem_cap = machines[machine].memory_gb
            else:
                max_cpus = 4
                mem_cap = 8.0
            entry["demand"] = {
                "cpus": rng.randint(1, max_cpus),
                "memory_gb": rng.choice([m for m in MEMORY_CHOICES if m <= mem_cap]),
            }
            if policy:
                entry["elasticity"] = policy
            profiles[aid] = TaskProfile(
                base_duration_s=rng.choice(BASES),
                serial_fraction=rng.choice(SERIALS),
                sync_overhead_s_per_node=rng.choice(OVERHEADS),
            )
        activity_docs.append(entry)
        for p in preds:
            edge_docs.append({"from": p, "to": aid})

    # attach guards to manual activities with several successors
    by_source: dict[str, list[dict]] = {}
    for edge in edge_docs:
        by_source.setdefault(edge["from"], []).append(edge)
    for src, edges in sorted(by_source.items()):
        if kinds[src] == "manual" and len(edges) >= 2 and rng.random() < 0.7:
            labels = [f"opt{k}" for k in range(len(edges))]
            for edge, label in zip(edges, labels):
                edge["guard"] = label
            decisions[src] = rng.choice(labels)

    import yaml

    doc = {
        "model_id": f"scenario-{seed}",
        "name": f"random scenario {seed}",
        "roles": [{"id": r} for r in ("dev", "qa", "ops")],
        "artifacts": artifact_docs,
        "activities": activity_docs,
        "edges": edge_docs,
    }
    model_text = yaml.safe_dump(doc, sort_keys=False)
    # normalize through the real parser/serializer so tests exercise both
    model_text = serialize_process(parse_process(model_text))

    clouds = [
        CloudSpec("public", CloudKind.PUBLIC, catalog, capacity_cpus=None,
                  provisioning_latency_s=rng.choice([0, 60, 120])),
        CloudSpec("private", CloudKind.PRIVATE, catalog,
                  capacity_cpus=rng.choice([4, 8, 16]),
                  provisioning_latency_s=rng.choice([0, 60, 120])),
    ]
    return Scenario(
        seed=seed,
        model_text=model_text,
        clouds=clouds,
        profiles=profiles,
        external_inputs={"seed-input"},
        decisions=decisions,
    )


@dataclass
class ScenarioRun:
    runtime: WorkflowRuntime
    instance: object
    digests: list  # (global_seq, state_digest) captured at each append


def run_scenario(scenario: Scenario, data_dir, max_commands: int = 400) -> ScenarioRun:
    """Drive a scenario to quiescence, snapshotting state at every event."""
    store = ProvenanceStore(data_dir)
    runtime = WorkflowRuntime(scenario.clouds, store)
    digests: list[tuple[int, str]] = []

    original_append = store.append_event

    def capturing_append(instance_id, sim_time_s, kind, payload):
        record = original_append(instance_id, sim_time_s, kind, payload)
        digests.append((record.global_seq, state_digest(runtime.engine.instances[instance_id])))
        return record

    store.append_event = capturing_append
    runtime.register_model(scenario.model_text)
    instance = runtime.create_instance(
        f"scenario-{scenario.seed}", scenario.external_inputs, scenario.profiles)

    for _ in range(max_commands):
        runtime.run_to_quiescence()
        if instance.status is not InstanceStatus.RUNNING:
            break
        tasks = runtime.worklist(instance_id=instance.instance_id)
        if not tasks:
            break  # starved of capacity or inputs: a legal stuck state
        progressed = False
        for task in tasks:
            aid = task["activity_id"]
            label = scenario.decisions.get(aid)
            if task["guard_options"] and label is None:
                label = task["guard_options"][0]
            if not task["guard_options"]:
                label = None
            runtime.complete_task(instance.instance_id, aid, task["role"], label)
            progressed = True
        if not progressed:
            break
    return ScenarioRun(runtime=runtime, instance=instance, digests=digests)
