"""Feedback stabilization of Lie-Poisson systems by controlled Lagrangians and double-bracket IDA-PBC."""

__version__ = "0.1.0"
