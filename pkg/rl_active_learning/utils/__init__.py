"""
Utility modules for the active learning system
"""

from .helpers import (
    setup_logging,
    ensure_directory_exists,
    PerformanceTimer,
    log_system_info,
)

__all__ = [
    'setup_logging',
    'ensure_directory_exists',
    'PerformanceTimer',
    'log_system_info',
]
