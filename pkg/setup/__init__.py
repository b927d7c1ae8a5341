"""Configuration for gpscav: environment, paths and run configuration files."""
