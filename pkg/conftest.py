"""
Repository-level pytest hooks: the `slow` marker and the `--runslow` switch.
"""

import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run the multi-minute training and benchmark acceptance tests",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance test (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
