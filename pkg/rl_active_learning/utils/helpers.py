"""
Utility functions for the active learning system
"""

import os
import logging
from datetime import datetime
from typing import Optional

# Setup logging
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
logger = logging.getLogger(__name__)


def setup_logging(level: int = logging.INFO, log_file: Optional[str] = None) -> None:
    """
    Configure root logging for a run

    Args:
        level: Logging level for the root logger
        log_file: Optional file that receives a copy of every record
    """
    root = logging.getLogger()
    root.setLevel(level)

    if log_file:
        ensure_directory_exists(os.path.dirname(os.path.abspath(log_file)))
        existing = [h for h in root.handlers
                    if isinstance(h, logging.FileHandler) and h.baseFilename == os.path.abspath(log_file)]
        if not existing:
            handler = logging.FileHandler(log_file)
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root.addHandler(handler)
            logger.info(f"Logging to {log_file}")


def ensure_directory_exists(directory_path: str) -> None:
    """
    Ensure directory exists, create if it doesn't

    Args:
        directory_path: Path to directory
    """
    if directory_path and not os.path.exists(directory_path):
        os.makedirs(directory_path, exist_ok=True)
        logger.info(f"Created directory: {directory_path}")


class PerformanceTimer:
    """Simple performance timing utility"""

    def __init__(self, name: str = "Operation", level: int = logging.INFO):
        self.name = name
        self.level = level
        self.start_time = None
        self.duration = 0.0

    def __enter__(self):
        self.start_time = datetime.now()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time:
            self.duration = (datetime.now() - self.start_time).total_seconds()
            logger.log(self.level, f"{self.name} completed in {self.duration:.2f} seconds")


def log_system_info():
    """Log platform, library versions and available resources"""
    import platform
    import numpy as np
    import pandas as pd
    import psutil
    import scipy

    memory = psutil.virtual_memory()
    logger.info("=== System Information ===")
    logger.info(f"Platform: {platform.platform()}")
    logger.info(f"Python: {platform.python_version()}")
    logger.info(f"NumPy: {np.__version__}, SciPy: {scipy.__version__}, pandas: {pd.__version__}")
    logger.info(f"CPUs: {psutil.cpu_count(logical=True)}")
    logger.info(f"Memory: {memory.available / 1024 ** 3:.1f} GiB free of {memory.total / 1024 ** 3:.1f} GiB")
    logger.info("==========================")
