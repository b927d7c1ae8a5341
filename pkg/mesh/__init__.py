"""Triangle meshing of the perforated domain, mesh files and quadrature."""
