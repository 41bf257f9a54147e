"""Multi-agent hierarchical planning gym over HDDL domains."""

__version__ = "0.1.0"
