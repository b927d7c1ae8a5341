"""Airy stress functions on simply connected patches and the plate equation checks."""
