import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from emwave import DisturbanceEvent, build_benchmark, decompose_set, simulate  # noqa: E402


@pytest.fixture(scope="session")
def ring20():
    return build_benchmark("ring", 20)


@pytest.fixture(scope="session")
def ring20_node7(ring20):
    return simulate(ring20, DisturbanceEvent(7, 1.0, -0.05), duration=6.0)


@pytest.fixture(scope="session")
def ring20_node7_decomp(ring20_node7):
    return decompose_set(ring20_node7)


@pytest.fixture(scope="session")
def two_area_run():
    model = build_benchmark("two_area", 3, weak_tie_b=0.1)
    sig = simulate(model, DisturbanceEvent(0, 1.0, -0.01), duration=60.0)
    return model, decompose_set(sig)


@pytest.fixture(scope="session")
def ring10_rocof_run():
    model = build_benchmark("ring", 10)
    sig = simulate(model, DisturbanceEvent(0, 1.0, -0.5), duration=60.0)
    return model, sig, decompose_set(sig)
