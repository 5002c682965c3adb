"""Utility functions and constants for the NLVAE engine."""
