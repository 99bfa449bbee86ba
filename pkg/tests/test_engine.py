from __future__ import annotations

from decimal import Decimal

import pytest

from procforge.cloud import CloudKind
from procforge.engine import (
    ActivityState,
    EnactmentEngine,
    InstanceStatus,
    LEGAL_TRANSITIONS,
    require_transition,
)
from procforge.errors import (
    ConstraintViolation,
    IllegalState,
    InvalidModel,
    MissingExternalInput,
    RoleMismatch,
    SchemaError,
    UnknownDecisionLabel,
)
from procforge.model import parse_process
from procforge.provenance import ProvenanceStore
from procforge.scheduler import PlacementDecision


class FakeClock:
    def __init__(self):
        self.now_s = 0


@pytest.fixture
def store(tmp_path):
    return ProvenanceStore(tmp_path / "store")


@pytest.fixture
def engine(store):
    return EnactmentEngine(store=store, clock=FakeClock(),
                           cloud_kinds={"public": CloudKind.PUBLIC, "private": CloudKind.PRIVATE})


@pytest.fixture
def sample_model(sample_model_text):
    return parse_process(sample_model_text)


def placement(aid, cloud="private", machine="small", count=1):
    return PlacementDecision(aid, cloud, machine, count, 1800, Decimal("0.05"))


CHAIN = """\
model_id: chain
name: three step chain
roles:
  - id: dev
artifacts:
  - id: seed
    external: true
  - id: x1
  - id: x2
  - id: x3
activities:
  - id: a
    kind: automated
    role: dev
    inputs: [seed]
    outputs: [x1]
  - id: b
    kind: automated
    role: dev
    inputs: [x1]
    outputs: [x2]
  - id: c
    kind: automated
    role: dev
    inputs: [x2]
    outputs: [x3]
edges:
  - {from: a, to: b}
  - {from: b, to: c}
"""


def run_chain_step(engine, instance, aid, cloud="public"):
    engine.dispatch(instance, aid, placement(aid, cloud=cloud))
    engine.begin_activity(instance, aid)
    engine.on_task_result(instance, aid, "Succeeded")


class TestInstantiate:
    def test_sample_all_pending(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        states = {ai.state for ai in instance.activity_states.values()}
        # the source manual task is already promoted to the worklist
        assert instance.activity_states["spec-review"].state is ActivityState.AWAITING_HUMAN
        assert states <= {ActivityState.PENDING, ActivityState.AWAITING_HUMAN}
        assert len(instance.activity_states) == 6
        assert instance.available_artifacts == {("requirements", 1)}
        assert instance.status is InstanceStatus.RUNNING

    def test_missing_external_input(self, engine, sample_model):
        with pytest.raises(MissingExternalInput):
            engine.instantiate(sample_model, set())

    def test_undeclared_external_rejected(self, engine, sample_model):
        with pytest.raises(SchemaError):
            engine.instantiate(sample_model, {"requirements", "mystery"})

    def test_empty_model_immediately_completed(self, engine):
        empty = parse_process(
            "model_id: hollow\nname: nothing\nroles: []\nartifacts: []\nactivities: []\nedges: []\n")
        instance = engine.instantiate(empty, set())
        assert instance.status is InstanceStatus.COMPLETED

    def test_invalid_model_rejected(self, engine, sample_model_text):
        broken = parse_process(sample_model_text.replace("to: build", "to: bogus"))
        with pytest.raises(InvalidModel):
            engine.instantiate(broken, {"requirements"})


class TestReadySet:
    def test_chain_source_only(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        assert engine.ready_set(instance) == {"a"}

    def test_chain_step(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        run_chain_step(engine, instance, "a")
        assert engine.ready_set(instance) == {"b"}

    def test_guard_routing(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        engine.complete_manual_task(instance, "spec-review", "reviewer")
        run_chain_step(engine, instance, "build", cloud="private")
        run_chain_step(engine, instance, "model-check", cloud="private")
        engine.complete_manual_task(instance, "decision", "qa", "fail")
        assert "fix" in engine.ready_set(instance)
        assert instance.activity_states["package"].state is ActivityState.SKIPPED

    def test_unguarded_edges_always_fire(self, engine):
        doc = CHAIN.replace("kind: automated\n    role: dev\n    inputs: [seed]",
                            "kind: manual\n    role: dev\n    inputs: [seed]")
        instance = engine.instantiate(parse_process(doc), {"seed"})
        engine.complete_manual_task(instance, "a", "dev")
        assert "b" in engine.ready_set(instance)


class TestDispatch:
    def test_happy_path(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        engine.dispatch(instance, "a", placement("a", cloud="public"))
        assert instance.activity_states["a"].state is ActivityState.SCHEDULED

    def test_pending_activity_rejected(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        with pytest.raises(IllegalState):
            engine.dispatch(instance, "b", placement("b"))

    def test_confidential_on_public_rejected(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        engine.complete_manual_task(instance, "spec-review", "reviewer")
        # build reads the confidential spec artifact
        with pytest.raises(ConstraintViolation):
            engine.dispatch(instance, "build", placement("build", cloud="public"))

    def test_manual_cannot_be_dispatched(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        with pytest.raises(IllegalState):
            engine.dispatch(instance, "spec-review", placement("spec-review"))


class TestCompleteManual:
    def test_happy_path_publishes_outputs(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        engine.complete_manual_task(instance, "spec-review", "reviewer")
        assert instance.activity_states["spec-review"].state is ActivityState.COMPLETED
        assert ("spec", 1) in instance.available_artifacts

    def test_role_mismatch(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        with pytest.raises(RoleMismatch):
            engine.complete_manual_task(instance, "spec-review", "dev")

    def test_unknown_decision_label(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        engine.complete_manual_task(instance, "spec-review", "reviewer")
        run_chain_step(engine, instance, "build", cloud="private")
        run_chain_step(engine, instance, "model-check", cloud="private")
        with pytest.raises(UnknownDecisionLabel):
            engine.complete_manual_task(instance, "decision", "qa", "maybe")

    def test_label_required_when_guarded(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        engine.complete_manual_task(instance, "spec-review", "reviewer")
        run_chain_step(engine, instance, "build", cloud="private")
        run_chain_step(engine, instance, "model-check", cloud="private")
        with pytest.raises(UnknownDecisionLabel):
            engine.complete_manual_task(instance, "decision", "qa")

    def test_label_on_plain_task_rejected(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        with pytest.raises(UnknownDecisionLabel):
            engine.complete_manual_task(instance, "spec-review", "reviewer", "pass")

    def test_not_awaiting_rejected(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        with pytest.raises(IllegalState):
            engine.complete_manual_task(instance, "decision", "qa", "pass")


class TestTaskResult:
    def test_success_publishes_versioned_output(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        run_chain_step(engine, instance, "a")
        assert ("x1", 1) in instance.available_artifacts

    def test_first_timeout_surfaces_rescale(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        engine.dispatch(instance, "a", placement("a", cloud="public"))
        engine.begin_activity(instance, "a")
        engine.on_task_result(instance, "a", "TimedOut")
        ai = instance.activity_states["a"]
        assert ai.state is ActivityState.TIMED_OUT
        assert ai.attempt == 0
        engine.apply_rescale(instance, "a", 2, 3600)
        assert ai.state is ActivityState.SCHEDULED
        assert ai.attempt == 1

    def test_exhausted_rounds_fail_instance(self, engine):
        # max_rounds=3 allows attempts 0,1,2; the third timeout is fatal
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        engine.dispatch(instance, "a", placement("a", cloud="public"))
        engine.begin_activity(instance, "a")
        for expected_attempt in (1, 2):
            engine.on_task_result(instance, "a", "TimedOut")
            engine.apply_rescale(instance, "a", 2 ** expected_attempt, 3600)
            engine.begin_activity(instance, "a")
            assert instance.activity_states["a"].attempt == expected_attempt
        engine.on_task_result(instance, "a", "TimedOut")
        engine.fail_activity(instance, "a", "elastic rounds exhausted")
        assert instance.activity_states["a"].state is ActivityState.FAILED
        assert instance.status is InstanceStatus.FAILED

    def test_result_requires_running(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        with pytest.raises(IllegalState):
            engine.on_task_result(instance, "a", "Succeeded")

    def test_terminal_instance_rejects_commands(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        engine.dispatch(instance, "a", placement("a", cloud="public"))
        engine.begin_activity(instance, "a")
        engine.on_task_result(instance, "a", "TimedOut")
        engine.fail_activity(instance, "a", "boom")
        with pytest.raises(IllegalState):
            engine.dispatch(instance, "b", placement("b"))


class TestStatusSummary:
    def test_fresh_counts(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        summary = engine.instance_status(instance)
        assert summary.counts == {"AwaitingHuman": 1, "Pending": 5}
        assert sum(summary.counts.values()) == 6

    def test_after_one_completion(self, engine, sample_model):
        instance = engine.instantiate(sample_model, {"requirements"})
        engine.complete_manual_task(instance, "spec-review", "reviewer")
        summary = engine.instance_status(instance)
        assert summary.counts["Completed"] == 1
        assert sum(summary.counts.values()) == 6

    def test_terminal_instance(self, engine):
        instance = engine.instantiate(parse_process(CHAIN), {"seed"})
        for aid in "abc":
            run_chain_step(engine, instance, aid)
        summary = engine.instance_status(instance)
        assert summary.status is InstanceStatus.COMPLETED
        assert summary.counts == {"Completed": 3}
        assert engine.ready_set(instance) == set()


class TestTransitionRelation:
    def test_terminal_states_absorbing(self):
        terminal = {ActivityState.COMPLETED, ActivityState.FAILED, ActivityState.SKIPPED}
        assert not any(src in terminal for src, _ in LEGAL_TRANSITIONS)

    def test_require_transition_rejects_illegal(self):
        with pytest.raises(IllegalState):
            require_transition(ActivityState.PENDING, ActivityState.RUNNING)
        require_transition(ActivityState.PENDING, ActivityState.READY)
