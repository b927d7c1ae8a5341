"""
Stability sweeps: a one-parameter family of cavities D_t = base + t * direction,
the Cauchy gap and the set distances for each member, and the fits of the
logarithmic stability law on the resulting rows.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from elasticity.norms import boundary_sobolev_norm, energy_cloud
from elasticity.solver import solve_forward
from geometry.apriori import apriori_check
from geometry.distances import auxiliary_distances
from inverse.cauchy_gap import sigma_sampling, sigma_trace, trace_gap
from inverse.fits import eta_fit, loglog_omega_fit, rank_correlation
from mesh.generator import generate_mesh
from mesh.morph import morph_mesh
from setup.config_conf import DEFAULT_D0_FACTOR, DEFAULT_ORDER, DEFAULT_SIGMA_SAMPLES
from utilities.errors import ConstraintError, DegenerateFitError, GpsCavError, MeshError
from utilities.parallel import run_parallel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CavityFamily:
    """Cavities base + t * direction in star-shape parameters, replacing cavity ``index``."""

    base: object
    direction: tuple
    t_values: tuple
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        object.__setattr__(self, "t_values", tuple(float(t) for t in self.t_values))

    def shape(self, t):
        return self.base.perturbed(self.direction, t)

    def domain_at(self, domain, t):
        cavities = list(domain.cavities) or [self.base]
        cavities[self.index] = self.shape(t)
        return domain.with_cavities(cavities)

    def validate(self, domain):
        """Check every member against the a-priori class.

        Raises:
            ConstraintError: Naming the first t whose cavity violates a geometric constraint
        """
        for t in self.t_values:
            report = apriori_check(self.domain_at(domain, t))
            if not report.geometry_passed:
                failed = ", ".join(item.name for item in report.geometry_failures())
                raise ConstraintError(f"family member t={t:.6g} violates the a-priori class: {failed}")
            if not report.passed:
                logger.warning(f"Family member t={t:.6g} fails the regularity bound; continuing")


@dataclass(frozen=True)
class SweepRow:
    t: float
    epsilon: float
    d_H: float
    d: float
    d_m: float
    traction_norm: float
    continuation: float = float("nan")
    error: str = ""

    @property
    def ok(self):
        return not self.error

    def as_tuple(self):
        return (self.t, self.epsilon, self.d_H, self.d, self.d_m, self.traction_norm)


@dataclass
class SweepResult:
    """Rows in t order with the fits over the successful ones."""

    rows: list
    eta: object = None
    loglog: object = None
    small_d: object = None
    spearman: float = float("nan")
    step3_ratio: float = float("nan")
    step2_ratio: float = float("nan")
    d0: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def good_rows(self):
        return [row for row in self.rows if row.ok]


def _continuation_energy(displacement, cavity):
    """Energy of a displacement over the part of its domain covered by another cavity."""
    cloud = energy_cloud(displacement)
    inside = cavity.contains(cloud.points)
    return float(np.sum(cloud.weights[inside] * cloud.density[inside]))


def _mesh_for(task, shape):
    """Morph the base mesh onto a family member, remeshing if the morph inverts elements."""
    if shape is None:
        return task["mesh"], task["domain"]
    try:
        return morph_mesh(task["mesh"], task["domain"], task["index"], shape)
    except MeshError as e:
        logger.warning(f"Morph failed ({e}); remeshing")
        cavities = list(task["domain"].cavities)
        cavities[task["index"]] = shape
        domain = task["domain"].with_cavities(cavities)
        return generate_mesh(domain, task["h"], task.get("h_cavity"), task.get("grading")), domain


def sweep_row(task):
    """One sweep row; failures of the solve or the geometry abort only this row."""
    t = task["t"]
    family = task["family"]
    norm = task["norm"]
    r0 = task["domain"].r0
    try:
        shape = None if t == 0.0 else family.shape(t)
        mesh, domain_t = _mesh_for(task, shape)
        sol = solve_forward(mesh, task["material"], task["traction"], task["order"])
        epsilon, _ = trace_gap(task["trace"], sigma_trace(sol, task["sampling"]), task["sampling"], r0)
        member = family.shape(t)
        distances = auxiliary_distances(family.base, member, domain_t, check=False)
        continuation = max(
            _continuation_energy(task["base_displacement"], member),
            _continuation_energy(sol.displacement, family.base),
        ) / (r0 ** 2 * norm ** 2)
    except GpsCavError as e:
        logger.error(f"Sweep row t={t:.6g} aborted: {e}")
        nan = float("nan")
        return SweepRow(t, nan, nan, nan, nan, norm, error=f"{type(e).__name__}: {e}")
    row = SweepRow(t, epsilon, distances.d_H, distances.d, distances.d_m, norm, continuation)
    logger.info(f"Row t={t:.6g}: epsilon={epsilon:.6g}, d_H={distances.d_H:.6g}, d={distances.d:.6g}")
    return row


def _fit_or_none(fit, label, notes, *args):
    try:
        return fit(*args)
    except DegenerateFitError as e:
        notes.append(f"{label}: {e}")
        logger.warning(f"No {label} fit: {e}")
        return None


def stability_sweep(
    family,
    domain,
    material,
    traction,
    h,
    order=DEFAULT_ORDER,
    samples=DEFAULT_SIGMA_SAMPLES,
    d0_factor=DEFAULT_D0_FACTOR,
    h_cavity=None,
    grading=None,
    threads=1,
):
    """Run the forward problem for every family member against the base cavity.

    Args:
        family (CavityFamily): Cavity family
        domain (DomainSpec): Domain whose cavity ``family.index`` is replaced
        material (PlateMaterial): Material
        traction (TractionSpec): Load, fixed across the sweep
        h (float): Mesh size of the base mesh
        order (int, optional): Element order
        samples (int, optional): Sigma samples for epsilon
        d0_factor (float, optional): d0 = d0_factor * r0 for the small-d fit
        h_cavity (float, optional): Graded mesh size near the cavities
        grading (float, optional): Mesh grading rate
        threads (int, optional): Worker processes for the rows

    Returns:
        SweepResult: Rows and the fits of the stability law
    """
    family.validate(domain)
    base_domain = family.domain_at(domain, 0.0)
    base_mesh = generate_mesh(base_domain, h, h_cavity, grading)
    base = solve_forward(base_mesh, material, traction, order)
    norm = boundary_sobolev_norm(traction, base_mesh, -0.5).value
    sampling = sigma_sampling(base_domain, samples)
    trace = sigma_trace(base, sampling)

    common = {
        "family": family,
        "domain": base_domain,
        "mesh": base_mesh,
        "index": family.index,
        "material": material,
        "traction": traction,
        "order": order,
        "h": h,
        "h_cavity": h_cavity,
        "grading": grading,
        "sampling": sampling,
        "trace": trace,
        "norm": norm,
        "base_displacement": base.displacement,
    }
    tasks = [dict(common, t=t) for t in family.t_values]
    logger.info(f"Sweeping {len(tasks)} family members (||N||_-1/2 = {norm:.6g})")
    rows = run_parallel(sweep_row, tasks, threads)

    result = SweepResult(rows=rows, d0=d0_factor * domain.r0)
    good = [row for row in result.good_rows if row.t != 0.0 and row.epsilon > 0.0]
    if len(good) < len(rows) - sum(1 for row in rows if row.t == 0.0):
        logger.warning(f"{len(rows) - len(result.good_rows)} sweep rows failed")
    eps = np.array([row.epsilon for row in good])
    norms = np.array([row.traction_norm for row in good])
    d_H = np.array([row.d_H for row in good])
    d = np.array([row.d for row in good])
    d_m = np.array([row.d_m for row in good])

    result.eta = _fit_or_none(eta_fit, "eta", result.notes, eps, norms, d_H)
    result.loglog = _fit_or_none(loglog_omega_fit, "loglog", result.notes, eps, norms, d)
    small = d <= result.d0
    result.small_d = _fit_or_none(
        lambda *a: eta_fit(*a, kind="small_d"), "small_d", result.notes, eps[small], norms[small], d[small]
    )
    result.spearman = rank_correlation(d_H, eps)
    if np.any(d > 0.0):
        result.step3_ratio = float(np.max(d_H[d > 0.0] / d[d > 0.0]))
    ratio_rows = small & (d_m > 0.0)
    if np.any(ratio_rows):
        result.step2_ratio = float(np.max(d[ratio_rows] / d_m[ratio_rows]))
    bound = math.sqrt(1.0 + domain.M0 ** 2)
    if np.isfinite(result.step3_ratio) and result.step3_ratio > bound * (1.0 + 1e-3):
        logger.warning(f"d_H/d = {result.step3_ratio:.4g} exceeds sqrt(1 + M0^2) = {bound:.4g}")
    if result.eta is not None:
        logger.info(f"Empirical eta: {result.eta.summary()}")
    return result

