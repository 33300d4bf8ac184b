"""Hybrid quantum-classical circuit simulation with QCQ interfaces."""

from __future__ import annotations

__version__ = "0.1.0"
