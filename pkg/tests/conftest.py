from __future__ import annotations

from importlib import resources

import pytest

from procforge.cloud import parse_topology
from procforge.provenance import ProvenanceStore
from procforge.runtime import WorkflowRuntime


def bundled(name: str) -> str:
    return resources.files("procforge").joinpath(f"data/{name}").read_text()


@pytest.fixture
def sample_model_text() -> str:
    return bundled("verify-release.yaml")


@pytest.fixture
def topology_text() -> str:
    return bundled("topology.yaml")


@pytest.fixture
def make_runtime(tmp_path, topology_text):
    """Factory for isolated runtimes, each with its own data directory."""
    created = []

    def factory(topology: str | None = None, subdir: str | None = None) -> WorkflowRuntime:
        data_dir = tmp_path / (subdir or f"rt{len(created)}")
        runtime = WorkflowRuntime(
            parse_topology(topology or topology_text),
            ProvenanceStore(data_dir),
        )
        created.append(runtime)
        return runtime

    return factory
