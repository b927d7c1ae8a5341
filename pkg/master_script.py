#!/usr/bin/env python3
"""
Master script for gpscav.
Meshes GPS plates with cavities, solves the traction problem, checks Airy
functions and runs the stability, vanishing-rate, smallness and reconstruction
experiments. Every subcommand reads one config file and writes CSVs, gnuplot
scripts and a text report into the output directory.
"""
import argparse
import logging
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from airy.checks import field_residuals, sandwich_check
from airy.patches import boundary_rectangle_patch, interior_disk_patch
from airy.reconstruction import airy_on_patch, dirichlet_residual
from elasticity.norms import boundary_sobolev_norm, direct_stability_ratio, h1_norm, local_energy
from elasticity.solver import solve_forward, stress_field
from geometry.apriori import apriori_check
from geometry.distances import hausdorff_distance
from inverse.rates import smallness_profile, vanishing_rate
from inverse.reconstruction import reconstruct, simulate_observation
from inverse.sweep import CavityFamily, stability_sweep
from material.plate_material import convexity_report
from mesh.generator import generate_mesh
from mesh.mesh_io import read_mesh, write_mesh
from output_generator import csv_generator as tables
from output_generator.csv_generator import CSVGenerator
from output_generator.gnuplot_generator import GnuplotGenerator
from output_generator.report_generator import ReportGenerator
from setup.config_conf import DEFAULT_PATCH_RADIUS
from setup.run_config import load_run_config
from utilities.errors import ConfigError, ConstraintError, GpsCavError
from utilities.logger import setup_logging
from utilities.parallel import resolve_threads
from utilities.state_manager import StateManager

COMMANDS = ("mesh", "forward", "airy-check", "sweep", "rates", "profile", "reconstruct")
EXIT_OK = 0
EXIT_UNEXPECTED = 1


def parse_arguments(argv=None):
    """Parse command-line arguments.

    Args:
        argv (list, optional): Arguments without the program name. Defaults to sys.argv[1:].

    Returns:
        argparse.Namespace: Parsed arguments
    """
    parser = argparse.ArgumentParser(
        description="Forward and inverse experiments for plates with cavities under generalized plane stress."
    )

    parser.add_argument(
        "command",
        choices=COMMANDS,
        help="Subcommand to run"
    )

    parser.add_argument(
        "--config",
        required=True,
        help="Run configuration file (section.key = value lines)"
    )

    parser.add_argument(
        "--output",
        help="Output directory (overrides run.output_dir)"
    )

    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Enable verbose logging"
    )

    return parser.parse_args(argv)


class Outputs:
    """Writers for one run, sharing the output directory."""

    def __init__(self, output_dir, command):
        self.output_dir = Path(output_dir)
        self.csv = CSVGenerator(self.output_dir)
        self.gnuplot = GnuplotGenerator(self.output_dir)
        self.report = ReportGenerator(self.output_dir, command)

    def table(self, path, kind, header):
        self.gnuplot.generate(path, kind, header)
        return path

    @property
    def written(self):
        return self.csv.written + self.gnuplot.written


def _mesh(config, domain=None):
    """Mesh from mesh.file when given, generated from the domain otherwise."""
    if config.mesh_file is not None:
        return read_mesh(config.mesh_file)
    return generate_mesh(domain or config.domain, config["mesh.h"], config["mesh.h_cavity"], config["mesh.grading"])


def _solve(config, mesh):
    return solve_forward(
        mesh,
        config.material,
        config.traction,
        order=config["solver.order"],
        method=config["solver.method"],
        tol=config["solver.tol"],
        project=config["load.project"],
    )


def _require(config, key):
    value = config[key]
    if value is None or value == []:
        raise ConfigError("required by this subcommand", key=key)
    return value


def _first_cavity(config, key="domain.cavity"):
    cavities = config.domain.cavities
    if not cavities:
        raise ConfigError("this subcommand needs at least one cavity", key=key)
    return cavities[0]


def _apriori(config, outputs, domain=None, title="a-priori"):
    """Check the a-priori class before any mesh is built or read.

    Raises:
        ConstraintError: If a geometric constraint fails; a failing regularity
            bound only warns
    """
    report = apriori_check(domain or config.domain)
    outputs.report.add_apriori(report, title)
    if not report.geometry_passed:
        failed = ", ".join(item.name for item in report.geometry_failures())
        raise ConstraintError(f"A-priori geometric constraints fail: {failed}")
    if not report.passed:
        logging.warning("Regularity bound fails; continuing with meshing")
    return report


def command_mesh(config, outputs, threads):
    _apriori(config, outputs)
    mesh = _mesh(config)
    path = outputs.output_dir / "mesh.gpsmesh"
    write_mesh(mesh, path)
    outputs.csv.written.append(path)
    outputs.report.add_section("mesh", {
        "nodes": mesh.n_nodes,
        "triangles": mesh.n_triangles,
        "h_max": mesh.h_max,
        "min_angle_degrees": mesh.min_angle,
        "euler_characteristic": mesh.euler_characteristic,
    })


def command_forward(config, outputs, threads):
    domain = config.domain
    _apriori(config, outputs)
    mesh = _mesh(config)
    sol = _solve(config, mesh)
    stress = stress_field(sol, config.material)

    outputs.table(outputs.csv.write_displacement(sol), "displacement", tables.DISPLACEMENT_HEADER)
    outputs.table(outputs.csv.write_stress(stress), "stress", tables.STRESS_HEADER)

    norm = boundary_sobolev_norm(config.traction, mesh, -0.5).value
    entries = {
        "dofs": sol.space.n_dofs * 2,
        "residual": sol.residual_norm,
        "constraint_residual": sol.constraint_residual,
        "energy": sol.energy,
        "energy_identity_error": sol.energy_identity_error,
        "load_correction": sol.load_correction,
        "traction_norm_h-1/2": norm,
        "h1_norm": h1_norm(sol, domain.r0),
    }
    if norm > 0.0:
        entries["stability_ratio"] = direct_stability_ratio(sol, config.traction, mesh, domain.r0)
    outputs.report.add_section("forward", entries)
    r_max = float(np.linalg.norm(mesh.nodes, axis=1).max())
    convexity = convexity_report(config.material.resolved(mesh.nodes, r_max), mesh.nodes, seed=config["run.seed"])
    outputs.report.add_section("convexity", convexity)


def command_airy_check(config, outputs, threads):
    domain = config.domain
    material = config.material
    _apriori(config, outputs)
    mesh = _mesh(config)
    sol = _solve(config, mesh)
    stress = stress_field(sol, material)
    fit_factor = config["airy.fit_radius"]
    slack = config["airy.slack"]

    patches = []
    if domain.cavities:
        index = config["airy.cavity"]
        if index >= len(domain.cavities):
            raise ConfigError(f"no cavity {index} (the domain has {len(domain.cavities)})", key="airy.cavity")
        patches.append((f"boundary_{index}", boundary_rectangle_patch(mesh, domain, index, config["airy.anchor_theta"])))
    center = config["airy.patch_center"]
    if center is not None:
        radius = config["airy.patch_radius"] or DEFAULT_PATCH_RADIUS * domain.r0
        patches.append(("interior", interior_disk_patch(mesh, domain, np.array(center), radius)))
    if not patches:
        raise ConfigError("no patch to check: give a cavity or a patch center", key="airy.patch_center")

    results = []
    for label, patch in patches:
        airy = airy_on_patch(patch, stress, fit_factor=fit_factor)
        residuals = field_residuals(airy, material)
        sandwich = sandwich_check(airy, sol, material, slack=slack)
        entries = {
            "kind": patch.kind,
            "triangles": patch.mesh.n_triangles,
            "hessian_residual": airy.residual,
            "weak_residual": residuals.weak,
            "compatibility_residual": residuals.compatibility,
            "sandwich_fraction": sandwich.fraction,
            "sandwich_slack": sandwich.slack,
        }
        if patch.arc is not None:
            phi_rel, dphi_rel = dirichlet_residual(airy)
            entries["dirichlet_phi"] = phi_rel
            entries["dirichlet_phi_n"] = dphi_rel
        results.append((label, airy, entries))

    for label, airy, entries in results:
        outputs.table(outputs.csv.write_airy(airy, f"airy_{label}.csv"), "airy", tables.AIRY_HEADER)
        outputs.report.add_section(f"airy {label}", entries)


def command_sweep(config, outputs, threads):
    domain = config.domain
    base = _first_cavity(config)
    family = CavityFamily(
        base=base,
        direction=_require(config, "inverse.family_direction"),
        t_values=_require(config, "inverse.t_values"),
    )
    _apriori(config, outputs)
    result = stability_sweep(
        family,
        domain,
        config.material,
        config.traction,
        config["mesh.h"],
        order=config["solver.order"],
        samples=config["inverse.sigma_samples"],
        d0_factor=config["inverse.d0_factor"],
        h_cavity=config["mesh.h_cavity"],
        grading=config["mesh.grading"],
        threads=threads,
    )
    outputs.table(outputs.csv.write_sweep(result), "sweep", tables.SWEEP_HEADER)
    outputs.report.add_fits("fits", [("eta", result.eta), ("loglog", result.loglog), ("small_d", result.small_d)])
    outputs.report.add_section("sweep", {
        "rows": len(result.rows),
        "failed_rows": len(result.rows) - len(result.good_rows),
        "spearman_d_H_epsilon": result.spearman,
        "max_d_H_over_d": result.step3_ratio,
        "max_d_over_d_m": result.step2_ratio,
        "d0": result.d0,
    })
    if result.notes:
        outputs.report.add_section("notes", result.notes)


def command_rates(config, outputs, threads):
    domain = config.domain
    center = np.array(_require(config, "inverse.rate_center"))
    radii = np.sort(np.array(_require(config, "inverse.radii")))
    mode = config["inverse.rate_mode"]
    _apriori(config, outputs)
    sol = _solve(config, _mesh(config))
    fit = vanishing_rate(sol, center, radii, mode=mode, domain=domain)
    energies = [local_energy(sol, center, r) for r in radii]
    outputs.table(outputs.csv.write_rate(radii, energies), "rate", tables.RATE_HEADER)
    outputs.report.add_fits("vanishing rate", [(mode, fit)])


def command_profile(config, outputs, threads):
    domain = config.domain
    rho_values = _require(config, "inverse.rho_values")
    _apriori(config, outputs)
    sol = _solve(config, _mesh(config))
    profile = smallness_profile(sol, domain, rho_values, s=config["inverse.s"])
    outputs.table(outputs.csv.write_profile(profile), "profile", tables.PROFILE_HEADER)
    outputs.report.add_section("profile", [f"rho={p.rho:.17g} value={p.value:.17g} centers={p.centers}" for p in profile])


def command_reconstruct(config, outputs, threads):
    domain = config.domain
    init = _first_cavity(config)
    target = _require(config, "inverse.target")
    _apriori(config, outputs)
    _apriori(config, outputs, domain.with_cavities((target,)), title="a-priori target")
    h = config["mesh.h"]
    order = config["solver.order"]
    observation = simulate_observation(
        domain, config.material, config.traction, target, h, order=order,
        samples=config["inverse.sigma_samples"], noise=config["inverse.noise"], seed=config["run.seed"],
    )
    result = reconstruct(
        domain, config.material, config.traction, observation, init, config["inverse.reg_weight"], h,
        order=order, modes=config["inverse.modes"], max_iter=config["inverse.max_iter"], threads=threads,
        discrepancy_factor=config["inverse.discrepancy"],
    )
    outputs.table(outputs.csv.write_history(result.misfit_history), "history", tables.HISTORY_HEADER)
    d_H = hausdorff_distance(result.recovered, target)
    outputs.report.add_section("reconstruction", {
        "recovered": result.recovered.to_line(),
        "target": target.to_line(),
        "d_H": d_H,
        "d_H_over_r0": d_H / domain.r0,
        "gap": result.gap,
        "noise_level": observation.noise_level,
        "reg_weight": result.reg_weight,
        "iterations": result.iterations,
        "converged": result.converged,
    })


HANDLERS = {
    "mesh": command_mesh,
    "forward": command_forward,
    "airy-check": command_airy_check,
    "sweep": command_sweep,
    "rates": command_rates,
    "profile": command_profile,
    "reconstruct": command_reconstruct,
}


def run_command(argv=None):
    """Run one subcommand.

    Args:
        argv (list, optional): Arguments without the program name

    Returns:
        int: 0 on success, else the exit code of the error raised
    """
    args = parse_arguments(argv)

    log_level = logging.DEBUG if args.verbose else logging.INFO
    setup_logging(log_level, command=args.command)
    start_time = time.time()

    try:
        config = load_run_config(args.config)
        output_dir = Path(args.output) if args.output else config.output_dir
        threads = resolve_threads(config["run.threads"])
        logging.info(f"Running '{args.command}' with {args.config} into {output_dir} ({threads} workers)")

        outputs = Outputs(output_dir, args.command)
        HANDLERS[args.command](config, outputs, threads)
        report_path = outputs.report.write()

        state_manager = StateManager(output_dir)
        state_manager.record_outputs(args.command, config.digest, config["run.seed"], outputs.written + [report_path])
    except GpsCavError as e:
        logging.error(f"{type(e).__name__}: {e}")
        logging.error(f"Stack trace:\n{traceback.format_exc()}")
        return e.exit_code
    except Exception as e:
        logging.error(f"Unexpected error: {e}")
        logging.error(f"Stack trace:\n{traceback.format_exc()}")
        return EXIT_UNEXPECTED

    logging.info(f"'{args.command}' finished in {time.time() - start_time:.2f} seconds")
    return EXIT_OK


def main():
    """Main entry point.

    Returns:
        int: Exit code
    """
    return run_command()


if __name__ == "__main__":
    sys.exit(main())
