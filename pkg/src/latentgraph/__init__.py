"""Latent graphical model estimation from multimodal functional scores."""

__version__ = "0.1.0"
