"""Connectivity-preserving multi-robot rendezvous in nonconvex polygons."""

__version__ = "0.1.0"
