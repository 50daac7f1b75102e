"""Shared fixtures and hypothesis configuration."""

import pytest

from hypothesis import HealthCheck, settings

from omx import core

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def device_a():
    return core.DEVICE_PRESETS["A"]


@pytest.fixture
def device_b():
    return core.DEVICE_PRESETS["B"]
