"""Executable time-triggered concurrent constraint calculus with IMA/TTEthernet models."""

__version__ = "0.1.0"
