"""Cauchy data mismatch, stability sweeps, vanishing rates and shape reconstruction."""
