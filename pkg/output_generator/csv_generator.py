"""
CSV generator for gpscav results.
Every file starts with a ``# gpscav <version>`` comment line and a header row;
floats are written with 17 significant digits.
"""
import csv
import logging
from pathlib import Path

import numpy as np

from setup.config_conf import VERSION
from utilities.atomic_io import atomic_open

logger = logging.getLogger(__name__)

DISPLACEMENT_HEADER = ("node", "x1", "x2", "a1", "a2")
STRESS_HEADER = ("qp", "x1", "x2", "N11", "N22", "N12")
AIRY_HEADER = ("node", "x1", "x2", "phi", "phi_1", "phi_2")
SWEEP_HEADER = ("t", "epsilon", "d_H", "d", "d_m", "Nhat_norm", "continuation", "error")
RATE_HEADER = ("r", "energy")
PROFILE_HEADER = ("rho", "value", "centers")
HISTORY_HEADER = ("iteration", "misfit")


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


class CSVGenerator:
    """Writes result tables into one output directory."""

    def __init__(self, output_dir):
        """Initialize the CSV generator.

        Args:
            output_dir (str | Path): Directory receiving the CSV files
        """
        self.output_dir = Path(output_dir)
        self.written = []

    def write_table(self, name, header, rows):
        """Write a CSV atomically.

        Args:
            name (str): File name inside the output directory
            header (tuple): Column names
            rows (iterable): Row sequences

        Returns:
            Path: The written file
        """
        path = self.output_dir / name
        count = 0
        with atomic_open(path, "w") as handle:
            handle.write(f"# gpscav {VERSION}\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
                count += 1
        logger.info(f"CSV saved to {path} ({count} rows)")
        self.written.append(path)
        return path

    def write_displacement(self, sol, name="displacement.csv"):
        """Nodal displacement at the mesh vertices."""
        displacement = getattr(sol, "displacement", sol)
        nodes = displacement.mesh.nodes
        values = displacement.values[: nodes.shape[0]]
        rows = ((i, x[0], x[1], a[0], a[1]) for i, (x, a) in enumerate(zip(nodes, values)))
        return self.write_table(name, DISPLACEMENT_HEADER, rows)

    def write_stress(self, stress, name="stress.csv"):
        """Stress resultants at every quadrature point."""
        points = stress.flat_points
        values = stress.flat_values
        rows = (
            (i, p[0], p[1], N[0, 0], N[1, 1], N[0, 1]) for i, (p, N) in enumerate(zip(points, values))
        )
        return self.write_table(name, STRESS_HEADER, rows)

    def write_airy(self, airy, name="airy.csv"):
        table = airy.nodal_table()
        rows = ((i,) + tuple(row) for i, row in enumerate(table))
        return self.write_table(name, AIRY_HEADER, rows)

    def write_sweep(self, result, name="sweep.csv"):
        rows = (row.as_tuple() + (row.continuation, row.error) for row in result.rows)
        return self.write_table(name, SWEEP_HEADER, rows)

    def write_rate(self, radii, energies, name="rate.csv"):
        return self.write_table(name, RATE_HEADER, zip(radii, energies))

    def write_profile(self, profile, name="profile.csv"):
        rows = ((p.rho, p.value, p.centers) for p in profile)
        return self.write_table(name, PROFILE_HEADER, rows)

    def write_history(self, history, name="misfit_history.csv"):
        return self.write_table(name, HISTORY_HEADER, enumerate(history))
