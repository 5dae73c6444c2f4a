"""Geometric kernel: polygons, contraction, visibility, geodesic hulls."""
