import numpy as np
import pytest
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from semfuse.geometry import RigidTransform


def random_transform(rng, scale=10.0):
    r = Rotation.random(random_state=rng).as_matrix()
    return RigidTransform(r, rng.uniform(-scale, scale, 3))


@st.composite
def transforms(draw, scale=10.0):
    q = draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1))
    t = draw(st.lists(st.floats(-scale, scale, allow_nan=False), min_size=3, max_size=3))
    return RigidTransform.from_quaternion(q, t)


points = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3).map(np.array)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria: one PASS/FAIL line each in the terminal summary
_acceptance: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    label = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _acceptance[label] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split()[0])):
        terminalreporter.write_line(f"{_acceptance[label]}  {label}")
