"""Shared utilities: logging, errors, atomic output, run manifest and work pools."""
