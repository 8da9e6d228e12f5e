"""Simulated radiology workstation and function-calling agent benchmark."""

__version__ = "0.1.0"
