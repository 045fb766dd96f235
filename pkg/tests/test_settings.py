#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for environment configuration, logging setup and performance tracking
"""
import logging
import os
import sys
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from settings import MagicConfig, PerformanceTracker, setup_logging, track_performance


def test_config_defaults(monkeypatch):
    for name in ("MAGICKIT_CACHE", "MAGICKIT_LOG_DIR", "MAGICKIT_WORKERS", "MAGICKIT_TOL",
                 "MAGICKIT_FIXTURES"):
        monkeypatch.delenv(name, raising=False)
    cfg = MagicConfig()
    assert cfg.cache_dir == Path(".") / ".magicache"
    assert cfg.log_dir is None
    assert cfg.workers == 1
    assert cfg.tolerance == 1e-9
    assert cfg.fixture_dir is None


def test_config_reads_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("MAGICKIT_CACHE", str(tmp_path))
    monkeypatch.setenv("MAGICKIT_WORKERS", "4")
    monkeypatch.setenv("MAGICKIT_CHUNK_SIZE", "128")
    monkeypatch.setenv("MAGICKIT_TOL", "1e-7")
    cfg = MagicConfig()
    assert cfg.cache_dir == tmp_path
    assert cfg.workers == 4
    assert cfg.chunk_size == 128
    assert cfg.to_dict()["tolerance"] == 1e-7
    assert cfg.to_dict()["cache_dir"] == str(tmp_path)


def test_setup_logging_writes_a_dated_file(monkeypatch, tmp_path):
    monkeypatch.setenv("MAGICKIT_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("MAGICKIT_LOG_LEVEL", "debug")
    cfg = MagicConfig()
    setup_logging(cfg)
    try:
        logging.getLogger("magickit.test").debug("hello")
        files = list((tmp_path / "logs").glob("magickit_*.log"))
        assert len(files) == 1
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "hello" in files[0].read_text(encoding="utf-8")
    finally:
        for handler in logging.getLogger().handlers:
            handler.close()
        logging.basicConfig(handlers=[logging.StreamHandler(sys.stderr)], force=True)


def test_performance_tracker_stats():
    tracker = PerformanceTracker()
    tracker.track_call("lp", 0.002)
    tracker.track_call("lp", 0.004, success=False)
    stats = tracker.get_stats()
    assert stats["lp"]["call_count"] == 2
    assert stats["lp"]["error_count"] == 1
    assert stats["lp"]["success_rate"] == 50.0
    assert stats["lp"]["max_time_ms"] == 4.0
    assert tracker.last_duration("lp") == 0.004
    assert tracker.last_duration("unknown") is None
    assert "uptime_hours" in stats


def test_track_performance_counts_failures():
    from settings import perf_tracker

    @track_performance
    def flaky_settings_call(fail):
        if fail:
            raise ValueError("boom")
        return 1

    assert flaky_settings_call(False) == 1
    with pytest.raises(ValueError):
        flaky_settings_call(True)
    stats = perf_tracker.get_stats()["flaky_settings_call"]
    assert stats["call_count"] >= 2
    assert stats["error_count"] >= 1
