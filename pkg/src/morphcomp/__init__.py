"""Occlusion-aware thrust modelling and feed-forward compensation for morphing quadrotors."""

__version__ = "0.1.0"
