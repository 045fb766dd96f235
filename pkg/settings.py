"""
Configuration and logging setup for magickit
Values come from the environment (optionally a .env file) with sane defaults
"""

import logging
import os
import sys
import time
from collections import defaultdict
from datetime import datetime
from functools import wraps
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


# ==================== CONFIGURATION ====================
class MagicConfig:
    def __init__(self):
        self.cache_dir = Path(os.getenv('MAGICKIT_CACHE', os.path.join('.', '.magicache')))
        self.log_level = os.getenv('MAGICKIT_LOG_LEVEL', 'INFO')
        self.log_dir = os.getenv('MAGICKIT_LOG_DIR') or None
        self.workers = int(os.getenv('MAGICKIT_WORKERS', '1'))
        self.chunk_size = int(os.getenv('MAGICKIT_CHUNK_SIZE', '4096'))
        self.tolerance = float(os.getenv('MAGICKIT_TOL', '1e-9'))
        self.cut_limit = int(os.getenv('MAGICKIT_CUT_LIMIT', '10000'))
        self.fixture_dir = os.getenv('MAGICKIT_FIXTURES') or None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cache_dir": str(self.cache_dir),
            "log_level": self.log_level,
            "log_dir": self.log_dir,
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "tolerance": self.tolerance,
            "cut_limit": self.cut_limit,
            "fixture_dir": self.fixture_dir,
        }


config = MagicConfig()


def setup_logging(cfg: Optional[MagicConfig] = None) -> None:
    """Diagnostics go to standard error; a dated log file is added when a log dir is set"""
    cfg = cfg or config
    handlers = [logging.StreamHandler(sys.stderr)]
    if cfg.log_dir:
        log_dir = Path(cfg.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / f"magickit_{datetime.now().strftime('%Y%m%d')}.log"
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, cfg.log_level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


# ==================== PERFORMANCE TRACKING ====================
class PerformanceTracker:
    def __init__(self):
        self.call_times = defaultdict(list)
        self.call_counts = defaultdict(int)
        self.error_counts = defaultdict(int)
        self.start_time = datetime.now()

    def track_call(self, name: str, duration: float, success: bool = True):
        self.call_times[name].append(duration)
        self.call_counts[name] += 1
        if not success:
            self.error_counts[name] += 1

    def last_duration(self, name: str) -> Optional[float]:
        times = self.call_times.get(name)
        return times[-1] if times else None

    def get_stats(self) -> Dict[str, Any]:
        stats = {}
        for name, times in self.call_times.items():
            if times:
                calls = self.call_counts[name]
                stats[name] = {
                    "call_count": calls,
                    "error_count": self.error_counts[name],
                    "avg_time_ms": round(sum(times) / len(times) * 1000, 2),
                    "max_time_ms": round(max(times) * 1000, 2),
                    "min_time_ms": round(min(times) * 1000, 2),
                    "success_rate": round((calls - self.error_counts[name]) / calls * 100, 2),
                }
        uptime_seconds = (datetime.now() - self.start_time).total_seconds()
        stats["uptime_hours"] = round(uptime_seconds / 3600, 2)
        return stats


perf_tracker = PerformanceTracker()


def track_performance(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        success = True
        try:
            return func(*args, **kwargs)
        except Exception:
            success = False
            raise
        finally:
            perf_tracker.track_call(func.__name__, time.perf_counter() - start_time, success)
    return wrapper
