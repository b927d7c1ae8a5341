"""Star-shaped curves, domains, set distances and a-priori checks."""
