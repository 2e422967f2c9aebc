"""Integration backbone: event-sourced platform state, config, API, gateway."""

from .config import ConfigInvalid, PlatformConfig, load_config
from .eventlog import CorruptRecord, EventLog, EventLogRecord, StorageFailure, read_log
from .platform import Platform, UnknownDocument, UnknownSession

__all__ = [
    "ConfigInvalid",
    "PlatformConfig",
    "load_config",
    "CorruptRecord",
    "EventLog",
    "EventLogRecord",
    "StorageFailure",
    "read_log",
    "Platform",
    "UnknownDocument",
    "UnknownSession",
]
