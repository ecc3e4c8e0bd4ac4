"""Exact enumeration and random generation of tree-rooted planar maps weighted by their blocks."""

__version__ = "0.1.0"
