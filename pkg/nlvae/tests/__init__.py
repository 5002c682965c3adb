"""Tests for the NLVAE engine."""
