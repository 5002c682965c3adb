"""Command handlers for the NLVAE engine."""
