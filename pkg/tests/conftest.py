import numpy as np
import pytest
import torch
from hypothesis import settings

from pinc.network import MLPConfig, init_geometric, init_kaiming

torch.set_num_threads(1)
settings.register_profile("pinc", max_examples=40, deadline=None)
settings.load_profile("pinc")


@pytest.fixture
def tiny_cfg():
    return MLPConfig(depth=2, width=16, skip_layer=1)


@pytest.fixture
def tiny_net(tiny_cfg):
    return init_kaiming(tiny_cfg, seed=3)


@pytest.fixture
def desk_net():
    return init_geometric(MLPConfig(), seed=0, radius=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA.append((str(mark.args[0]), item.name, ("PASS" if report.passed else "FAIL") + (f"  {detail}" if detail else "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, line in sorted(_CRITERIA, key=lambda r: (r[0], r[1])):
        status, _, detail = line.partition("  ")
        terminalreporter.write_line(f"{status} criterion {number} {name}" + (f"  ({detail})" if detail else ""))
