"""Sketch-conditioned weakly-supervised object detection, desk scale."""

__version__ = "0.1.0"
