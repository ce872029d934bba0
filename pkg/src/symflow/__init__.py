"""Codimension-two mean curvature flow of surfaces in C^2."""
