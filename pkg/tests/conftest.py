import numpy as np
import pytest

from fetalbiometry.msl import fit_linear_svm
from fetalbiometry.phantom import PhantomSpec, generate, sweep_specs
from fetalbiometry.pipeline import run_pipeline


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the SVM kernels once so timings measure the work, not numba
    rng = np.random.default_rng(0)
    fit_linear_svm(rng.normal(size=(20, 2)), np.r_[np.ones(10), -np.ones(10)], min_iter=1000)


@pytest.fixture(scope="session")
def default_phantom():
    return generate(PhantomSpec())


@pytest.fixture(scope="session")
def default_report(default_phantom):
    ph = default_phantom
    return run_pipeline(ph.volume, ph.labels, ph.probabilities)


@pytest.fixture(scope="session")
def sweep_runs():
    """The 20-volume phantom suite run once through the pipeline."""
    import time

    out = []
    for spec in sweep_specs(20):
        ph = generate(spec)
        t0 = time.perf_counter()
        rep = run_pipeline(ph.volume, ph.labels, ph.probabilities)
        out.append((ph, rep, time.perf_counter() - t0))
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
