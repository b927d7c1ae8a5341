"""
Gnuplot script generator: one ``.gp`` file next to each CSV.
"""
import logging
from pathlib import Path

from setup.config_conf import VERSION
from utilities.atomic_io import write_text_atomic

logger = logging.getLogger(__name__)

# kind -> (x column, y columns, axis settings, plot style)
PLOT_KINDS = {
    "displacement": ("x1", ("x2",), "set size ratio -1", "points"),
    "stress": ("x1", ("x2",), "set size ratio -1", "points"),
    "airy": ("x1", ("x2",), "set size ratio -1", "points"),
    "sweep": ("epsilon", ("d_H", "d", "d_m"), "set logscale xy", "linespoints"),
    "rate": ("r", ("energy",), "set logscale xy", "linespoints"),
    "profile": ("rho", ("value",), "set logscale y", "linespoints"),
    "history": ("iteration", ("misfit",), "set logscale y", "linespoints"),
}
_COLOR_COLUMNS = {"displacement": "a1", "stress": "N11", "airy": "phi"}


class GnuplotGenerator:
    """Writes gnuplot scripts reading the CSVs written by CSVGenerator."""

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.written = []

    def generate(self, csv_path, kind, header, title=None):
        """Write ``<stem>.gp`` for a CSV.

        Args:
            csv_path (str | Path): The CSV file
            kind (str): One of PLOT_KINDS
            header (tuple): The CSV header, used to resolve column numbers
            title (str, optional): Plot title. Defaults to the file stem.

        Returns:
            Path: The script path
        """
        if kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind '{kind}'")
        csv_path = Path(csv_path)
        x_name, y_names, axes, style = PLOT_KINDS[kind]
        column = {name: i + 1 for i, name in enumerate(header)}
        title = title or csv_path.stem

        lines = [
            f"# gpscav {VERSION}",
            "set datafile separator ','",
            "set datafile commentschars '#'",
            f"set title '{title}'",
            f"set xlabel '{x_name}'",
            axes,
            "set terminal pngcairo size 900,700",
            f"set output '{csv_path.stem}.png'",
        ]
        if kind in _COLOR_COLUMNS:
            color = column[_COLOR_COLUMNS[kind]]
            lines.append(
                f"plot '{csv_path.name}' skip 2 using {column[x_name]}:{column[y_names[0]]}:{color} "
                f"with points palette pt 7 ps 0.5 title '{_COLOR_COLUMNS[kind]}'"
            )
        else:
            plots = [
                f"'{csv_path.name}' skip 2 using {column[x_name]}:{column[y]} with {style} title '{y}'"
                for y in y_names
            ]
            lines.append("plot " + ", \\\n     ".join(plots))

        path = csv_path.with_suffix(".gp")
        write_text_atomic(path, "\n".join(lines) + "\n")
        logger.debug(f"Gnuplot script saved to {path}")
        self.written.append(path)
        return path
