"""Malicious-URL classifier over dual-granularity NPMI co-occurrence graphs."""

__version__ = "0.1.0"
