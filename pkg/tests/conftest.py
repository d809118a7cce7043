"""Shared fixtures and the per-criterion PASS/FAIL summary of the acceptance suite."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
import pytest

from pcpgrhd.spacetime import Minkowski, sample

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            num, title = mark.args
            entry = _CRITERIA.setdefault(num, {"title": title, "outcomes": []})
            entry.setdefault("nodeids", []).append(item.nodeid)


def pytest_runtest_logreport(report):
    for entry in _CRITERIA.values():
        if report.nodeid in entry.get("nodeids", ()):
            if report.when == "call" or report.outcome != "passed":
                entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outs = entry["outcomes"]
        if not outs:
            status = "NOT RUN"
        elif all(o == "passed" for o in outs):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status:7s} {entry['title']}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def flat_sample(shape):
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    return sample(Minkowski(), 0.0, np.zeros(shape + (3,)))
