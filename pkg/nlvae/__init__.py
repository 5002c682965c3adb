"""
NLVAE Zero-Shot Super-Resolution
Trains a non-local variational autoencoder on a single low-resolution image and super-resolves it.
"""

__version__ = "1.0.0"
__author__ = "NLVAE Team"
