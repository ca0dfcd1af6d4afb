"""Runnable realm harness: clocks, in-process and socket transports,
realm assembly from config, benchmarks, and the command-line interface."""

from .clock import ManualClock, WallClock
from .transport import (
    AttackerPort,
    SequentialNetwork,
    ThreadedNetwork,
    TranscriptEntry,
)

__all__ = [
    "AttackerPort",
    "ManualClock",
    "SequentialNetwork",
    "ThreadedNetwork",
    "TranscriptEntry",
    "WallClock",
]
