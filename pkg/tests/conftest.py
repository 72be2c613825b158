import numpy as np
import pytest

from disfilter.experiment import reference_scenario
from disfilter.filters import converge_distributed_riccati, distributed_gains


@pytest.fixture(scope="session")
def ref_scen():
    return reference_scenario(seed=0)


@pytest.fixture(scope="session")
def modern_limit(ref_scen):
    M, S, iters, ok = converge_distributed_riccati(ref_scen.model, ref_scen.obs_models, ref_scen.C, tol=1e-10)
    assert ok
    return M, distributed_gains(M, ref_scen.obs_models)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        parts = mod.RESULTS[num]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        tr.write_line(f"[{status}] criterion {num}: {mod.NAMES[num]}")
        for part, ok, detail in parts:
            tr.write_line(f"         {'ok  ' if ok else 'FAIL'} {part}: {detail}")
