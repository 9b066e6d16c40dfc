"""Subwavelength band structures of space-time-modulated resonator lattices."""

__version__ = "0.1.0"
