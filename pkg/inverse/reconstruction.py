"""
Cavity reconstruction from Sigma displacement data by damped Gauss-Newton.

The unknowns are the star-shape parameters [cx, cy, rho0, a1, b1, ...] of one
cavity. The residual stacks the rigid-free misfit of the traces on Sigma
(divided by r0, so its squared norm is the squared Cauchy gap) and
sqrt(weight) times the Fourier coefficients.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from elasticity.solver import solve_forward
from geometry.apriori import apriori_check
from geometry.shapes import StarShape, rigid_basis
from inverse.cauchy_gap import sigma_sampling, sigma_trace
from mesh.generator import generate_mesh
from mesh.morph import morph_mesh
from setup.config_conf import (
    DEFAULT_DISCREPANCY_FACTOR,
    DEFAULT_FD_STEP,
    DEFAULT_MAX_ITER,
    DEFAULT_ORDER,
    DEFAULT_SIGMA_SAMPLES,
    DEFAULT_STEP_TOL,
)
from utilities.errors import ConstraintError, GpsCavError, MeshError
from utilities.parallel import run_parallel

logger = logging.getLogger(__name__)

_INITIAL_DAMPING = 1e-3
_MAX_DAMPING = 1e10
_DAMPING_UP = 10.0
_DAMPING_DOWN = 0.3
_FIXED_POINT_TOL = 1e-10
_DISCREPANCY_ROUNDS = 6
_AUTO_WEIGHT_START = 1e-2


@dataclass(frozen=True, eq=False)
class Observation:
    """Sampled displacement on Sigma with the noise level in gap units (0 for clean data)."""

    sampling: object
    values: np.ndarray
    noise_level: float = 0.0


@dataclass
class ReconstructionResult:
    recovered: StarShape
    misfit_history: list = field(default_factory=list)
    reg_weight: float = 0.0
    iterations: int = 0
    converged: bool = False
    gap: float = float("nan")


@dataclass(frozen=True, eq=False)
class ForwardModel:
    """Everything needed to map shape parameters to Sigma traces."""

    domain: object
    mesh: object
    material: object
    traction: object
    index: int
    order: int
    h: float

    def shape(self, params):
        return StarShape.from_params(params)

    def mesh_for(self, shape):
        try:
            return morph_mesh(self.mesh, self.domain, self.index, shape)[0]
        except MeshError as e:
            logger.debug(f"Morph rejected ({e}); remeshing")
            cavities = list(self.domain.cavities)
            cavities[self.index] = shape
            return generate_mesh(self.domain.with_cavities(cavities), self.h)

    def check_shape(self, shape):
        """Raise ConstraintError if ``shape`` in place of cavity ``index`` leaves the a-priori class."""
        report = apriori_check(self.domain.with_cavities(_replace(self.domain.cavities, self.index, shape)))
        if not report.geometry_passed:
            failed = ", ".join(item.name for item in report.geometry_failures())
            raise ConstraintError(f"cavity {shape.to_line()} leaves the a-priori class: {failed}")

    def trace(self, params, sampling):
        shape = self.shape(params)
        sol = solve_forward(self.mesh_for(shape), self.material, self.traction, self.order)
        return sigma_trace(sol, sampling)


def _trace_task(task):
    model, params, sampling = task
    return model.trace(params, sampling)


def rigid_projector(sampling):
    """Weighted projector removing the rigid part of a flattened trace, shape (2n, 2n)."""
    sqrt_w = np.repeat(np.sqrt(sampling.weights), 2)
    R = rigid_basis(sampling.points).reshape(-1, 3) * sqrt_w[:, None]
    Q, _ = np.linalg.qr(R)
    return Q, sqrt_w


def simulate_observation(domain, material, traction, target, h, order=DEFAULT_ORDER, index=0,
                         samples=DEFAULT_SIGMA_SAMPLES, noise=0.0, seed=0, refine=2.0):
    """Sigma data of the cavity ``target`` computed on a mesh ``refine`` times finer than h.

    Noise is Gaussian with standard deviation ``noise`` times the largest data
    magnitude, from a generator seeded with ``seed``.
    """
    cavities = list(domain.cavities) or [target]
    cavities[index] = target
    data_domain = domain.with_cavities(cavities)
    mesh = generate_mesh(data_domain, h / refine)
    sol = solve_forward(mesh, material, traction, order)
    sampling = sigma_sampling(data_domain, samples)
    values = sigma_trace(sol, sampling)
    level = 0.0
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        perturbation = noise * float(np.abs(values).max()) * rng.standard_normal(values.shape)
        values = values + perturbation
        level = math.sqrt(float(np.sum(sampling.weights[:, None] * perturbation ** 2))) / domain.r0
    logger.info(f"Observation from a mesh with h = {h / refine:.4g}: {sampling.size} samples, noise level {level:.3g}")
    return Observation(sampling=sampling, values=values, noise_level=level)


class _Objective:
    def __init__(self, model, observation, reg_weight, n_fourier_start=3):
        self.model = model
        self.observation = observation
        self.reg_weight = reg_weight
        self.start = n_fourier_start
        self.Q, self.sqrt_w = rigid_projector(observation.sampling)
        self.r0 = model.domain.r0

    def misfit_vector(self, trace):
        b = (np.asarray(trace) - self.observation.values).ravel() * self.sqrt_w / self.r0
        return b - self.Q @ (self.Q.T @ b)

    def residual(self, params, trace):
        reg = math.sqrt(self.reg_weight) * np.asarray(params[self.start:], dtype=float)
        return np.concatenate([self.misfit_vector(trace), reg])

    def regularization_jacobian(self, n):
        J = np.zeros((n - self.start, n))
        J[:, self.start:] = math.sqrt(self.reg_weight) * np.eye(n - self.start)
        return J


def _gauss_newton(objective, params, max_iter, fd_step, step_tol, threads):
    """Levenberg-Marquardt iterations with Fletcher scaling; returns (params, history, iterations, converged)."""
    model = objective.model
    sampling = objective.observation.sampling
    r0 = objective.r0
    trace = model.trace(params, sampling)
    residual = objective.residual(params, trace)
    cost = float(residual @ residual)
    history = [cost]
    damping = None
    converged = False
    iterations = 0

    while iterations < max_iter:
        step = fd_step * r0
        tasks = []
        for j in range(params.size):
            trial = params.copy()
            trial[j] += step
            tasks.append((model, trial, sampling))
        columns = run_parallel(_trace_task, tasks, threads)
        J_data = np.column_stack([(objective.misfit_vector(c) - objective.misfit_vector(trace)) / step for c in columns])
        J = np.vstack([J_data, objective.regularization_jacobian(params.size)])
        JtJ = J.T @ J
        g = J.T @ residual
        diag = np.maximum(np.diag(JtJ), np.finfo(float).eps * max(float(np.diag(JtJ).max()), 1.0))
        if damping is None:
            damping = _INITIAL_DAMPING

        accepted = False
        while damping <= _MAX_DAMPING:
            delta = np.linalg.solve(JtJ + damping * np.diag(diag), -g)
            trial = params + delta
            try:
                shape = model.shape(trial)
                model.check_shape(shape)
                trial_trace = model.trace(trial, sampling)
            except GpsCavError as e:
                logger.debug(f"Trial step rejected ({e}); damping {damping:.3g} -> {damping * _DAMPING_UP:.3g}")
                damping *= _DAMPING_UP
                continue
            trial_residual = objective.residual(trial, trial_trace)
            trial_cost = float(trial_residual @ trial_residual)
            if trial_cost < cost:
                params, trace, residual, cost = trial, trial_trace, trial_residual, trial_cost
                history.append(cost)
                damping = max(damping * _DAMPING_DOWN, 1e-12)
                accepted = True
                logger.info(
                    f"Iteration {iterations + 1}: cost {cost:.6g}, step {np.linalg.norm(delta):.3g}, "
                    f"rho0 {shape.rho0:.6g}"
                )
                break
            damping *= _DAMPING_UP
        iterations += 1
        if not accepted:
            logger.warning(f"No descent step found after {iterations} iterations; stopping")
            break
        if np.linalg.norm(delta) < step_tol * r0:
            converged = True
            break
    return params, history, iterations, converged


def reconstruct(domain, material, traction, observation, init, reg_weight, h, order=DEFAULT_ORDER, index=0,
                modes=None, max_iter=DEFAULT_MAX_ITER, fd_step=DEFAULT_FD_STEP, step_tol=DEFAULT_STEP_TOL,
                threads=1, discrepancy_factor=DEFAULT_DISCREPANCY_FACTOR):
    """Recover a cavity from Sigma data.

    Args:
        domain (DomainSpec): Domain; cavity ``index`` is the unknown
        material (PlateMaterial): Material
        traction (TractionSpec): Load used for the data
        observation (Observation): Sigma samples of the measured displacement
        init (StarShape): Initial cavity; must pass the a-priori geometric checks
        reg_weight (float | None): Tikhonov weight on the Fourier coefficients;
            None chooses it by the discrepancy principle when the data are noisy
        h (float): Mesh size of the reconstruction mesh
        order (int, optional): Element order
        index (int, optional): Cavity index
        modes (int, optional): Number of Fourier modes to recover. Defaults to those of init.
        max_iter (int, optional): Gauss-Newton iteration limit
        fd_step (float, optional): Finite-difference step in units of r0
        step_tol (float, optional): Stop once the step is below step_tol * r0
        threads (int, optional): Worker processes for the Jacobian columns
        discrepancy_factor (float, optional): Target misfit in units of the noise level

    Returns:
        ReconstructionResult: Best iterate, misfit history and the weight used

    Raises:
        ConstraintError: If init violates the a-priori class
    """
    modes = init.modes if modes is None else modes
    init_domain = domain.with_cavities(_replace(domain.cavities, index, init))
    report = apriori_check(init_domain)
    if not report.geometry_passed:
        failed = ", ".join(item.name for item in report.geometry_failures())
        raise ConstraintError(f"initial cavity violates the a-priori class: {failed}")

    params = np.pad(init.to_params(), (0, max(0, 3 + 2 * modes - init.to_params().size)))[: 3 + 2 * modes]
    mesh = generate_mesh(init_domain, h)
    model = ForwardModel(init_domain, mesh, material, traction, index, order, h)

    auto = reg_weight is None
    weight = _AUTO_WEIGHT_START if auto and observation.noise_level > 0.0 else (reg_weight or 0.0)
    objective = _Objective(model, observation, weight)

    initial = objective.misfit_vector(model.trace(params, observation.sampling))
    scale = float(np.linalg.norm(objective.misfit_vector(np.zeros_like(observation.values))))
    if float(np.linalg.norm(initial)) <= _FIXED_POINT_TOL * max(scale, np.finfo(float).tiny):
        logger.info("Initial cavity already reproduces the data")
        return ReconstructionResult(init, [float(initial @ initial)], weight, 0, True, float(np.linalg.norm(initial)))

    rounds = _DISCREPANCY_ROUNDS if auto and observation.noise_level > 0.0 else 1
    history = []
    total = 0
    for round_index in range(rounds):
        objective = _Objective(model, observation, weight)
        params, part, iterations, converged = _gauss_newton(objective, params, max_iter, fd_step, step_tol, threads)
        history.extend(part)
        total += iterations
        gap = float(np.linalg.norm(objective.misfit_vector(model.trace(params, observation.sampling))))
        if rounds == 1 or gap <= discrepancy_factor * observation.noise_level:
            break
        logger.info(f"Discrepancy round {round_index + 1}: gap {gap:.3g} above "
                    f"{discrepancy_factor:g} x noise {observation.noise_level:.3g}; weight {weight:.3g} -> {weight / 10:.3g}")
        weight /= 10.0

    if not converged:
        logger.warning(f"Reconstruction did not converge in {total} iterations; returning the best iterate")
    recovered = StarShape.from_params(params)
    logger.info(f"Recovered cavity {recovered.to_line()} (gap {gap:.3g}, weight {weight:.3g})")
    return ReconstructionResult(recovered, history, weight, total, converged, gap)


def _replace(cavities, index, shape):
    cavities = list(cavities) or [shape]
    cavities[index] = shape
    return cavities
