import logging

import pytest
from pydantic import ValidationError

from rrdps import config
from rrdps.config import Settings, get_settings
from rrdps.enums import Command, Detector
from rrdps.log import configure_logging
from rrdps.rng import chunk_bounds, substream
from rrdps.schemas import RunConfig
from rrdps.workers import ordered_map, resolve_workers


def test_get_settings_returns_settings():
    s = get_settings()
    assert set(Settings.model_fields) == {
        "LOG_LEVEL",
        "QKD_THREADS",
        "MC_CHUNK_PULSES",
        "DEFAULT_SEED",
    }
    assert s.MC_CHUNK_PULSES == 1 << 20
    assert get_settings() is s
    # nothing reads settings at import time
    assert not hasattr(config, "settings")


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("QKD_THREADS", "3")
    monkeypatch.setenv("DEFAULT_SEED", "17")
    s = Settings()
    assert s.QKD_THREADS == 3 and s.DEFAULT_SEED == 17

    monkeypatch.setenv("QKD_THREADS", "0")
    with pytest.raises(ValidationError):
        Settings()


def test_worker_count_is_capped(monkeypatch):
    monkeypatch.setattr("rrdps.workers.get_settings", lambda: Settings(QKD_THREADS=2))
    assert resolve_workers(8) == 2
    assert resolve_workers(None) == 2
    assert resolve_workers(1) == 1


def test_worker_count_without_cap(monkeypatch):
    monkeypatch.setattr("rrdps.workers.get_settings", lambda: Settings(QKD_THREADS=None))
    assert resolve_workers(5) == 5
    assert resolve_workers(0) == 1
    assert resolve_workers(None) >= 1


def test_ordered_map_keeps_input_order():
    items = [-3, 1, -2, 7, -5]
    assert ordered_map(abs, items, workers=1) == [3, 1, 2, 7, 5]
    assert ordered_map(abs, items, workers=2) == [3, 1, 2, 7, 5]
    assert ordered_map(abs, [], workers=4) == []


def test_substreams_depend_on_seed_and_index_only():
    a = substream(42, 3).integers(0, 2**32, size=8)
    b = substream(42, 3).integers(0, 2**32, size=8)
    c = substream(42, 4).integers(0, 2**32, size=8)
    assert (a == b).all()
    assert not (a == c).all()
    substream(2**64 - 1, 0)
    with pytest.raises(ValueError):
        substream(-1, 0)
    with pytest.raises(ValueError):
        substream(2**64, 0)


def test_chunk_bounds_partition_the_trials():
    assert chunk_bounds(10, 4) == [(0, 0, 4), (1, 4, 4), (2, 8, 2)]
    assert chunk_bounds(0, 4) == []
    assert sum(size for _, _, size in chunk_bounds(1001, 7)) == 1001


def test_configure_logging_installs_one_handler():
    logger = logging.getLogger("rrdps")
    saved = list(logger.handlers)
    for handler in saved:
        logger.removeHandler(handler)
    try:
        configure_logging("debug")
        configure_logging("WARNING")
        assert len(logger.handlers) == 1
        assert logger.level == logging.WARNING
    finally:
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
        for handler in saved:
            logger.addHandler(handler)


def test_run_config_builds_protocol_params():
    run = RunConfig(command=Command.keyrate, params={"L": 64, "detector": "threshold"})
    p = run.protocol()
    assert p.L == 64 and p.detector is Detector.THRESHOLD
    assert run.seed == 0 and run.trials == 100_000 and run.output_path is None


def test_run_config_rejects_bad_fields():
    with pytest.raises(ValidationError):
        RunConfig(command=Command.keyrate, params={"colour": 1})
    with pytest.raises(ValidationError):
        RunConfig(command=Command.attack, seed=2**64)
    with pytest.raises(ValidationError):
        RunConfig(command=Command.attack, trials=0)
    with pytest.raises(ValidationError):
        RunConfig(command="plot")
