"""Core configuration and utilities for the NLVAE engine."""
