"""Pydantic data models (configs, reports) for the NLVAE engine."""
