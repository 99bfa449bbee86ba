"""Versioned artifact storage, the append-only event log, replay and lineage.

Layout under the data directory:

* ``events.log`` - UTF-8, one canonical JSON object per line with fields
  ``{seq, instance, t, kind, payload}``; the first line is a header
  ``{format: "procforge-log", version: 1, hash_alg}``.
* ``blobs/<first two hex>/<hash>`` - content-addressed artifact bytes.
* ``artifacts/<quoted artifact id>.json`` - per-artifact version index.

Appends are serialized by a single writer and flushed to disk before they
are acknowledged; replaying a log prefix reconstructs the exact engine
state at that point, which is what makes runs auditable.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import urllib.parse
from dataclasses import dataclass, replace as dc_replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional

from .engine import (
    EV_BECAME_READY,
    EV_DISPATCHED,
    EV_FAILED,
    EV_HUMAN_COMPLETED,
    EV_INSTANCE_COMPLETED,
    EV_INSTANTIATED,
    EV_RESCALED,
    EV_SKIPPED,
    EV_STARTED,
    EV_TASK_COMPLETED,
    EV_TIMED_OUT,
    ActivityInstance,
    ActivityState,
    InstanceStatus,
    ProcessInstance,
    require_transition,
)
from .errors import CorruptLog, HashMismatch, IllegalState, NotFound, StorageFailure
from .model import ActivityKind, ProcessModel
from .scheduler import PlacementDecision

LOG_FORMAT = "procforge-log"
LOG_VERSION = 1


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ArtifactVersion:
    artifact_id: str
    version: int
    content_hash: str
    size_bytes: int
    producer: str
    created_at_s: int
    consumed: tuple = ()  # (artifact_id, version) pairs the producer read


@dataclass(frozen=True)
class EventRecord:
    global_seq: int
    instance_id: str
    sim_time_s: int
    kind: str
    payload: dict


class ProvenanceStore:
    """File-backed store; one per data directory, one writer at a time."""

    def __init__(self, data_dir, hash_alg: str = "sha256"):
        self.data_dir = Path(data_dir)
        self.blob_dir = self.data_dir / "blobs"
        self.artifact_dir = self.data_dir / "artifacts"
        self.log_path = self.data_dir / "events.log"
        self.hash_alg = hash_alg
        self._lock = threading.Lock()
        try:
            self.blob_dir.mkdir(parents=True, exist_ok=True)
            self.artifact_dir.mkdir(parents=True, exist_ok=True)
            if self.log_path.exists():
                self._last_seq = self._scan_log()
                self._log = open(self.log_path, "a", encoding="utf-8")
            else:
                self._last_seq = 0
                self._log = open(self.log_path, "a", encoding="utf-8")
                header = {"format": LOG_FORMAT, "version": LOG_VERSION, "hash_alg": hash_alg}
                self._write_line(json.dumps(header, separators=(",", ":")))
        except OSError as exc:
            raise StorageFailure(f"cannot initialize store at {self.data_dir}: {exc}") from exc

    def close(self) -> None:
        self._log.close()

    def _scan_log(self) -> int:
        last = 0
        with open(self.log_path, encoding="utf-8") as fh:
            header_line = fh.readline()
            if header_line:
                try:
                    header = json.loads(header_line)
                except json.JSONDecodeError as exc:
                    raise CorruptLog(f"bad log header: {exc}") from exc
                if header.get("format") != LOG_FORMAT:
                    raise CorruptLog(f"unexpected log format {header.get('format')!r}")
                self.hash_alg = header.get("hash_alg", self.hash_alg)
            for line in fh:
                if line.strip():
                    last = json.loads(line)["seq"]
        return last

    def _write_line(self, line: str) -> None:
        self._log.write(line + "\n")
        self._log.flush()
        os.fsync(self._log.fileno())

    # -- event log ---------------------------------------------------------------

    def append_event(self, instance_id: str, sim_time_s: int, kind: str, payload: dict) -> EventRecord:
        """Assign the next global sequence number and persist before returning."""
        with self._lock:
            seq = self._last_seq + 1
            line = (
                f'{{"seq":{seq},"instance":{json.dumps(instance_id)},"t":{sim_time_s},'
                f'"kind":{json.dumps(kind)},"payload":{canonical_json(payload)}}}'
            )
            try:
                self._write_line(line)
            except OSError as exc:
                raise StorageFailure(f"append failed: {exc}") from exc
            self._last_seq = seq
            return EventRecord(seq, instance_id, sim_time_s, kind, payload)

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def read_events(self, instance_id: Optional[str] = None, from_seq: int = 0) -> list[EventRecord]:
        records = []
        with open(self.log_path, encoding="utf-8") as fh:
            fh.readline()  # header
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                if raw["seq"] <= from_seq:
                    continue
                if instance_id is not None and raw["instance"] != instance_id:
                    continue
                records.append(EventRecord(raw["seq"], raw["instance"], raw["t"], raw["kind"], raw["payload"]))
        return records

    # -- artifacts ------------------------------------------------------------------

    def _index_path(self, artifact_id: str) -> Path:
        return self.artifact_dir / (urllib.parse.quote(artifact_id, safe="") + ".json")

    def _load_index(self, artifact_id: str) -> list[dict]:
        path = self._index_path(artifact_id)
        if not path.exists():
            return []
        return json.loads(path.read_text(encoding="utf-8"))["versions"]

    def put_artifact(self, artifact_id: str, content: bytes, producer: str,
                     created_at_s: int = 0, consumed: Optional[Iterable[tuple]] = None) -> ArtifactVersion:
        """Store bytes and return the next version; identical bytes share a blob."""
        digest = hashlib.new(self.hash_alg, content).hexdigest()
        with self._lock:
            blob = self.blob_dir / digest[:2] / digest
            try:
                if not blob.exists():
                    blob.parent.mkdir(parents=True, exist_ok=True)
                    tmp = blob.with_suffix(".tmp")
                    tmp.write_bytes(content)
                    tmp.rename(blob)
                elif blob.read_bytes() != content:
                    raise StorageFailure(f"hash collision on {digest}")
                versions = self._load_index(artifact_id)
                record = {
                    "version": len(versions) + 1,
                    "content_hash": digest,
                    "size_bytes": len(content),
                    "producer": producer,
                    "created_at_s": created_at_s,
                    "consumed": [list(c) for c in (consumed or [])],
                }
                versions.append(record)
                self._index_path(artifact_id).write_text(
                    canonical_json({"artifact_id": artifact_id, "versions": versions}) + "\n",
                    encoding="utf-8")
            except OSError as exc:
                raise StorageFailure(f"artifact write failed: {exc}") from exc
        return self._to_version(artifact_id, record)

    @staticmethod
    def _to_version(artifact_id: str, record: dict) -> ArtifactVersion:
        return ArtifactVersion(
            artifact_id=artifact_id,
            version=record["version"],
            content_hash=record["content_hash"],
            size_bytes=record["size_bytes"],
            producer=record["producer"],
            created_at_s=record["created_at_s"],
            consumed=tuple((a, v) for a, v in record.get("consumed", [])),
        )

    def get_artifact(self, artifact_id: str, version: Optional[int] = None) -> tuple[ArtifactVersion, bytes]:
        """Fetch one version (latest when unspecified) and verify its digest."""
        versions = self._load_index(artifact_id)
        if not versions:
            raise NotFound(f"artifact '{artifact_id}' does not exist")
        if version is None:
            record = versions[-1]
        else:
            matching = [r for r in versions if r["version"] == version]
            if not matching:
                raise NotFound(f"artifact '{artifact_id}' has no version {version}")
            record = matching[0]
        blob = self.blob_dir / record["content_hash"][:2] / record["content_hash"]
        if not blob.exists():
            raise StorageFailure(f"missing blob {record['content_hash']}")
        content = blob.read_bytes()
        if hashlib.new(self.hash_alg, content).hexdigest() != record["content_hash"]:
            raise HashMismatch(f"artifact '{artifact_id}' v{record['version']} failed verification")
        return self._to_version(artifact_id, record), content

    def lineage(self, artifact_id: str, version: Optional[int] = None) -> dict:
        """Ancestry tree down to external leaves.

        Each node repeats its producing activity and the exact input
        versions it consumed; upstream versions recur once per distinct
        consumption path (a diamond shows its apex twice).
        """
        meta, _ = self.get_artifact(artifact_id, version)
        return self._lineage_node(meta, path=set())

    def _lineage_node(self, meta: ArtifactVersion, path: set) -> dict:
        key = (meta.artifact_id, meta.version)
        if key in path:
            raise CorruptLog(f"lineage cycle at {meta.artifact_id} v{meta.version}")
        node = {
            "artifact_id": meta.artifact_id,
            "version": meta.version,
            "producer": meta.producer,
            "content_hash": meta.content_hash,
            "inputs": [],
        }
        for (aid, ver) in meta.consumed:
            child, _ = self.get_artifact(aid, ver)
            node["inputs"].append(self._lineage_node(child, path | {key}))
        return node


# ---------------------------------------------------------------------------
# state digest and replay
# ---------------------------------------------------------------------------

def state_digest(instance: ProcessInstance, hash_alg: str = "sha256") -> str:
    """Hash of (activity states sorted by id, available artifacts sorted)."""
    activities = []
    for aid in sorted(instance.activity_states):
        ai = instance.activity_states[aid]
        activities.append({
            "id": aid,
            "state": ai.state.value,
            "attempt": ai.attempt,
            "decision_label": ai.decision_label,
            "placement": _placement_doc(ai.placement),
            "started_at_s": ai.started_at_s,
            "finished_at_s": ai.finished_at_s,
        })
    doc = {
        "activities": activities,
        "artifacts": sorted([list(pair) for pair in instance.available_artifacts]),
    }
    return hashlib.new(hash_alg, canonical_json(doc).encode()).hexdigest()


def _placement_doc(placement: Optional[PlacementDecision]) -> Optional[dict]:
    if placement is None:
        return None
    return {
        "cloud_id": placement.cloud_id,
        "machine_type": placement.machine_type,
        "instance_count": placement.instance_count,
        "estimated_duration_s": placement.estimated_duration_s,
        "estimated_cost": str(placement.estimated_cost),
    }


def _placement_from_payload(payload: Optional[dict]) -> Optional[PlacementDecision]:
    if payload is None:
        return None
    return PlacementDecision(
        activity_id="",  # not part of the wire payload; filled by caller
        cloud_id=payload["cloud_id"],
        machine_type=payload["machine_type"],
        instance_count=payload["instance_count"],
        estimated_duration_s=payload["estimated_duration_s"],
        estimated_cost=Decimal(payload["estimated_cost"]),
    )


class Replayer:
    """Rebuilds a process instance from its event log prefix.

    Feeding events one at a time allows comparing the reconstruction
    against live snapshots at every index. Any transition the log implies
    that the engine would not allow raises ``CorruptLog``.
    """

    def __init__(self, model: ProcessModel, instance_id: str):
        self.instance = ProcessInstance(
            instance_id=instance_id,
            model=model,
            activity_states={a.activity_id: ActivityInstance(a.activity_id) for a in model.activities},
        )

    def apply(self, event: EventRecord) -> ProcessInstance:
        inst = self.instance
        if event.instance_id != inst.instance_id:
            raise CorruptLog(f"event {event.global_seq} belongs to {event.instance_id}")
        if event.sim_time_s < inst.sim_time_s:
            raise CorruptLog(f"event {event.global_seq} goes back in time")
        inst.sim_time_s = event.sim_time_s
        payload = event.payload
        try:
            handler = getattr(self, "_on_" + event.kind, None)
            if handler is None:
                raise CorruptLog(f"unknown event kind {event.kind!r}")
            handler(payload, event.sim_time_s)
        except IllegalState as exc:
            raise CorruptLog(f"event {event.global_seq} ({event.kind}): {exc}") from exc
        return inst

    def replay_all(self, events: Iterable[EventRecord]) -> ProcessInstance:
        for event in events:
            self.apply(event)
        return self.instance

    def _activity(self, payload: dict) -> ActivityInstance:
        aid = payload["activity"]
        try:
            return self.instance.activity_states[aid]
        except KeyError:
            raise CorruptLog(f"log names unknown activity '{aid}'") from None

    def _move(self, ai: ActivityInstance, target: ActivityState) -> None:
        require_transition(ai.state, target)
        ai.state = target

    def _publish(self, outputs) -> None:
        for aid, version in outputs:
            self.instance.available_artifacts.add((aid, version))

    def _on_Instantiated(self, payload, t):
        for aid in payload["external_inputs"]:
            self.instance.available_artifacts.add((aid, 1))

    def _on_BecameReady(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.READY)
        if self.instance.model.activity(ai.activity_id).kind is ActivityKind.MANUAL:
            self._move(ai, ActivityState.AWAITING_HUMAN)
            ai.started_at_s = t

    def _on_Dispatched(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.SCHEDULED)
        placement = _placement_from_payload(payload.get("placement"))
        if placement is not None:
            ai.placement = _with_activity(placement, ai.activity_id)

    def _on_Started(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.RUNNING)
        ai.started_at_s = t
        ai.consumed = tuple((a, v) for a, v in payload.get("consumed", []))
        placement = _placement_from_payload(payload.get("placement"))
        if placement is not None:
            ai.placement = _with_activity(placement, ai.activity_id)

    def _on_HumanCompleted(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.COMPLETED)
        ai.decision_label = payload.get("decision_label")
        ai.consumed = tuple((a, v) for a, v in payload.get("consumed", []))
        ai.finished_at_s = t
        self._publish(payload.get("outputs", []))

    def _on_TaskCompleted(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.COMPLETED)
        ai.finished_at_s = t
        self._publish(payload.get("outputs", []))

    def _on_TimedOut(self, payload, t):
        self._move(self._activity(payload), ActivityState.TIMED_OUT)

    def _on_Rescaled(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.SCHEDULED)
        ai.attempt = payload["attempt"]

    def _on_Skipped(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.SKIPPED)
        ai.finished_at_s = t

    def _on_Failed(self, payload, t):
        ai = self._activity(payload)
        self._move(ai, ActivityState.FAILED)
        ai.finished_at_s = t

    def _on_InstanceCompleted(self, payload, t):
        self.instance.status = InstanceStatus(payload["status"])


def _with_activity(placement: PlacementDecision, activity_id: str) -> PlacementDecision:
    return dc_replace(placement, activity_id=activity_id)


def replay(events: Iterable[EventRecord], model: ProcessModel, instance_id: Optional[str] = None) -> ProcessInstance:
    """Reconstruct one instance from a complete event prefix."""
    events = list(events)
    if instance_id is None:
        if not events:
            raise CorruptLog("cannot replay an empty log without an instance id")
        instance_id = events[0].instance_id
    return Replayer(model, instance_id).replay_all(events)
