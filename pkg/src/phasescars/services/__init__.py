"""Numerical services, one module per layer of the toolkit."""
