import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from symflow import families as fam  # noqa: E402
from symflow.flow import FlowConfig, run_flow  # noqa: E402


@pytest.fixture(scope="session")
def clifford_trace_32():
    """Coarse Clifford run to blow-up, every 20th snapshot kept."""
    return run_flow(FlowConfig(snapshot_stride=20), fam.clifford_torus(1.0, 32))


@pytest.fixture(scope="session")
def graph_trace_32():
    return run_flow(FlowConfig(t_end=0.3, snapshot_stride=5), fam.symplectic_graph(0.2, 1, 1, 32))
