"""Probabilistic semantic point clouds from fisheye cameras and a 16-beam lidar."""

__version__ = "0.1.0"
