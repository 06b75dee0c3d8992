"""Pulse-level simulator and optimizer for blockade-mediated two-qubit gates."""

__version__ = "0.1.0"
