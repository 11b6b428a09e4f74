import os

import numpy as np
import pytest

from sgdtraj.dataset import ImageSet, load_mnist, mnist_available, resolve_data_dir
from sgdtraj.numeric import RngStream


def pytest_configure(config):
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(v for k, v in rep.user_properties if k == "detail")
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2]
        item.config._criteria.setdefault(marker.args[0], []).append(
            (marker.args[1], rep.outcome, detail)
        )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        for title, outcome, detail in criteria[number]:
            status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
            line = f"criterion {number}: {status}  {title}"
            if detail:
                line += f"  [{detail}]"
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return RngStream(20240611)


@pytest.fixture(scope="session")
def mnist():
    """(train, test) with deskewing, or a skip when the IDX files are absent."""
    if not mnist_available():
        pytest.skip("MNIST IDX files not found; set MNIST_DATA_DIR to run this check")
    return load_mnist(resolve_data_dir(None), deskew_images=True)


def long_runs_enabled() -> bool:
    return os.environ.get("SGDTRAJ_LONG") == "1"


def tiny_set(images, labels) -> ImageSet:
    return ImageSet(np.asarray(images, dtype=float), np.asarray(labels))
