"""Smart-classroom backend platform.

Subsystems: dual-factor attendance (RFID scan + WiFi presence paired inside a
session window), hysteresis-based environment control, attendance-gated
retrieval Q&A, multiple-choice quiz generation, a virtual edge-device harness,
and the integration server that ties them together over an event-sourced log.
"""

__version__ = "0.1.0"
