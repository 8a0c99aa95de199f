"""Hierarchical (room, then position) visual localization with panoramic images."""

__version__ = "0.1.0"
