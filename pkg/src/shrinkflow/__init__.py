"""Gaussian entropy, level-set mean curvature flow and shrinker diagnostics."""

__version__ = "0.1.0"
