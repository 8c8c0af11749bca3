"""Simulation and worst-case security analysis of 3-state no-touch sending-or-not-sending TF-QKD."""

__version__ = "0.1.0"
