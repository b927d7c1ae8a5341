"""Plane-stress finite elements: spaces, loads, the constrained solve and energy norms."""
