"""
Plain-text reports: a-priori check, fit summaries and per-command diagnostics.
"""
import logging
from pathlib import Path

from setup.config_conf import VERSION
from utilities.atomic_io import write_text_atomic

logger = logging.getLogger(__name__)


def format_fit(label, fit):
    """One summary line, or a note when the fit could not be made."""
    if fit is None:
        return f"{label}: no fit"
    return f"{label}: {fit.summary()}, n={fit.n_points}"


def format_apriori(report, title="a-priori"):
    lines = [f"[{title}]", f"passed = {report.passed}", f"geometry_passed = {report.geometry_passed}"]
    for item in report.items:
        status = "ok" if item.passed else "FAIL"
        lines.append(
            f"{item.name}: {status} value={item.value:.17g} bound={item.bound:.17g}"
            + (f" ({item.detail})" if item.detail else "")
        )
    return lines


class ReportGenerator:
    """Collects report sections and writes them as one text file."""

    def __init__(self, output_dir, command):
        self.output_dir = Path(output_dir)
        self.command = command
        self.sections = []

    def add_section(self, title, entries):
        """Add a section of ``key = value`` pairs (a dict) or preformatted lines (a list)."""
        if isinstance(entries, dict):
            lines = [f"{key} = {_value(value)}" for key, value in entries.items()]
        else:
            lines = list(entries)
        self.sections.append([f"[{title}]"] + lines)

    def add_apriori(self, report, title="a-priori"):
        self.sections.append(format_apriori(report, title))

    def add_fits(self, title, fits):
        """Add fit summaries given as (label, RateFit | None) pairs."""
        self.sections.append([f"[{title}]"] + [format_fit(label, fit) for label, fit in fits])

    def render(self):
        blocks = [f"# gpscav {VERSION} {self.command}"]
        blocks += ["\n".join(section) for section in self.sections]
        return "\n\n".join(blocks) + "\n"

    def write(self, name=None):
        """Write the report atomically.

        Returns:
            Path: The report path
        """
        path = self.output_dir / (name or f"{self.command}_report.txt")
        write_text_atomic(path, self.render())
        logger.info(f"Report saved to {path}")
        return path


def _value(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)
