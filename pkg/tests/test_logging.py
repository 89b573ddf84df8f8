"""
Tests for the run-tagged JSON logging.
"""

import json

import numpy as np
import pytest

from helpers import logger_config
from helpers.logger_config import bind_run_context, clear_run_context, log_json


@pytest.fixture(autouse=True)
def run_context():
    """Fixture binding a run context for the duration of a test."""
    bind_run_context(run_id="abc", mode="fully-adaptive", iteration=None)
    yield
    clear_run_context()


def test_json_record_carries_run_context(monkeypatch):
    """Test run id and mode in the record and a skipped unset iteration."""
    monkeypatch.setattr(logger_config, "CONCISE_LOGGING", False)
    record = log_json("Iteration done", data={"dof": 10})
    assert record["runId"] == "abc"
    assert record["mode"] == "fully-adaptive"
    assert "iteration" not in record
    assert record["data"] == {"dof": 10}

    bind_run_context(iteration=3)
    assert log_json("again")["iteration"] == 3


def test_concise_line(monkeypatch):
    """Test the one-line text form with numpy payloads."""
    monkeypatch.setattr(logger_config, "CONCISE_LOGGING", True)
    line = log_json("Solved", data={"norm": np.float64(0.5), "u": np.arange(2)}, level="debug")
    assert " | DEBUG | Solved | " in line
    assert "run_id=abc" in line
    assert 'data={"norm": 0.5, "u": [0, 1]}' in line


def test_logger_emits_json(monkeypatch, caplog):
    """Test that the custom logger serializes numpy values."""
    monkeypatch.setattr(logger_config, "CONCISE_LOGGING", False)
    logger = logger_config.logger
    logger.addHandler(caplog.handler)
    try:
        logger.info("Mesh refined", data={"n": np.int64(7)})
    finally:
        logger.removeHandler(caplog.handler)
    payload = json.loads(caplog.records[-1].getMessage())
    assert payload["msg"] == "Mesh refined"
    assert payload["data"] == {"n": 7}
