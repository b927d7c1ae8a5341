"""Plate material: Lame fields, plane-stress moduli and the constitutive maps."""
