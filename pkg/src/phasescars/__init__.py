"""Time-domain scars: diagonal Wigner propagators and return probabilities."""
