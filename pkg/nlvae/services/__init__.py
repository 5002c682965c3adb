"""Services for the NLVAE engine."""
