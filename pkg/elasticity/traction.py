"""
Boundary traction N_hat on the outer boundary: description, load vectors and
the equilibrium (compatibility) check against the rigid motions.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from elasticity.spaces import FunctionSpace
from geometry.shapes import rigid_basis
from mesh.frames import edge_geometry
from mesh.quadrature import line_rule
from utilities.errors import ConfigError, LoadError

logger = logging.getLogger(__name__)

SEGMENT_KINDS = {
    "constant": 2,
    "pressure": 1,
    "stress": 3,
    "normal_cos": 3,
    "point": 2,
}
_EQUILIBRIUM_RTOL = 1e-10


@dataclass(frozen=True)
class TractionSegment:
    """Traction density on an arclength interval of the outer boundary.

    Kinds (parameters):
        constant (t1, t2): fixed vector
        pressure (p): p n, i.e. outward tension for p > 0
        stress (S11, S22, S12): S n for a constant symmetric S
        normal_cos (p, k, phase): p cos(k theta + phase) n, theta the polar angle
        point (F1, F2): concentrated force at s_start
    """

    s_start: float
    s_end: float
    kind: str
    params: tuple
    profile: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind != "custom":
            if self.kind not in SEGMENT_KINDS:
                raise ConfigError(f"unknown traction kind '{self.kind}'", key="load.segments")
            if len(self.params) != SEGMENT_KINDS[self.kind]:
                raise ConfigError(
                    f"traction kind '{self.kind}' takes {SEGMENT_KINDS[self.kind]} parameters, got {len(self.params)}",
                    key="load.segments",
                )
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.kind == "point":
            object.__setattr__(self, "s_end", float(self.s_start))
        elif not self.s_end > self.s_start:
            raise ConfigError(f"segment interval ({self.s_start}, {self.s_end}) is empty", key="load.segments")

    @property
    def is_point(self):
        return self.kind == "point"

    def covers(self, s, perimeter):
        s = np.asarray(s, dtype=float)
        if self.s_end - self.s_start >= perimeter:
            return np.ones(s.shape, dtype=bool)
        offset = np.mod(s - self.s_start, perimeter)
        return offset <= self.s_end - self.s_start

    def density(self, s, points, normals, theta):
        """Traction vectors where the segment applies (zero elsewhere is handled by the caller)."""
        n = normals
        if self.kind == "constant":
            return np.broadcast_to(np.array(self.params), points.shape).copy()
        if self.kind == "pressure":
            return self.params[0] * n
        if self.kind == "stress":
            S11, S22, S12 = self.params
            return np.stack([S11 * n[:, 0] + S12 * n[:, 1], S12 * n[:, 0] + S22 * n[:, 1]], axis=1)
        if self.kind == "normal_cos":
            p, k, phase = self.params
            return (p * np.cos(k * theta + phase))[:, None] * n
        if self.kind == "custom":
            return np.asarray(self.profile(s, points, normals), dtype=float)
        return np.zeros(points.shape)

    def to_line(self, full=False):
        interval = "full" if full else f"{self.s_start!r} {self.s_end!r}"
        if self.is_point:
            interval = f"{self.s_start!r}"
        return f"{interval} {self.kind} " + " ".join(repr(v) for v in self.params)


@dataclass(frozen=True)
class TractionSpec:
    """Traction on the outer boundary of a domain: a sum of segments, times ``scale``."""

    domain: object
    segments: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def from_function(cls, domain, profile, s_start=0.0, s_end=None):
        """Traction given by a callable profile(s, points, normals) -> (n, 2)."""
        if s_end is None:
            s_end = s_start + domain.outer.perimeter
        return cls(domain, (TractionSegment(s_start, s_end, "custom", (), profile),))

    @classmethod
    def parse_segment(cls, domain, text):
        """Parse ``<s0> <s1> <kind> <params...>``, ``full <kind> <params...>`` or ``<s> point F1 F2``.

        Raises:
            ConfigError: If the line is malformed
        """
        tokens = text.split()
        try:
            if tokens and tokens[0] == "full":
                s0, s1 = 0.0, domain.outer.perimeter
                rest = tokens[1:]
            elif len(tokens) >= 2 and tokens[1] == "point":
                s0 = s1 = float(tokens[0])
                rest = tokens[1:]
            elif len(tokens) >= 3:
                s0, s1 = float(tokens[0]), float(tokens[1])
                rest = tokens[2:]
            else:
                raise ConfigError(f"cannot parse traction segment '{text}'", key="load.segments")
            params = tuple(float(v) for v in rest[1:])
        except ValueError as e:
            raise ConfigError(f"non-numeric value in traction segment '{text}': {e}", key="load.segments")
        if not rest:
            raise ConfigError(f"traction segment '{text}' has no kind", key="load.segments")
        return TractionSegment(s0, s1, rest[0], params)

    def scaled(self, factor):
        return TractionSpec(self.domain, self.segments, self.scale * factor)

    @property
    def is_zero(self):
        return not self.segments or self.scale == 0.0

    @property
    def point_segments(self):
        return [seg for seg in self.segments if seg.is_point]

    def density(self, points, normals):
        """Distributed traction at outer-boundary points with outward normals, shape (n, 2)."""
        points = np.atleast_2d(points)
        outer = self.domain.outer
        theta = outer.polar_angle(points)
        s = outer.arclength_at(theta)
        total = np.zeros(points.shape)
        for seg in self.segments:
            if seg.is_point:
                continue
            mask = seg.covers(s, outer.perimeter)
            if np.any(mask):
                total[mask] += seg.density(s[mask], points[mask], normals[mask], theta[mask])
        return self.scale * total

    def point_loads(self):
        """List of (position (2,), force (2,)) for the concentrated forces."""
        outer = self.domain.outer
        return [
            (outer.points(outer.theta_at(seg.s_start)), self.scale * np.array(seg.params))
            for seg in self.point_segments
        ]

    def check_support(self):
        """Verify every segment lies compactly inside Sigma.

        Raises:
            LoadError: Naming the first segment that leaves Sigma
        """
        domain = self.domain
        if domain.full_sigma:
            return
        s0, s1 = domain.sigma_interval
        perimeter = domain.outer.perimeter
        for index, seg in enumerate(self.segments):
            start = (seg.s_start - s0) % perimeter
            end = start + (seg.s_end - seg.s_start)
            inside = start > 0.0 and end < (s1 - s0) if not seg.is_point else 0.0 < start < (s1 - s0)
            if not inside:
                raise LoadError(
                    f"traction segment {index} [{seg.s_start:.6g}, {seg.s_end:.6g}] is not compactly inside "
                    f"Sigma [{s0:.6g}, {s1:.6g}]"
                )


def locate_on_outer(mesh, center, position):
    """Outer edge crossed by the ray from ``center`` through ``position`` and the edge parameter there."""
    edges = mesh.outer_edge_indices
    a = mesh.nodes[mesh.edges[edges, 0]]
    e = mesh.nodes[mesh.edges[edges, 1]] - a
    d = np.asarray(position, dtype=float) - center
    rel = a - center
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (rel[:, 0] * d[1] - rel[:, 1] * d[0]) / denom
        t = (rel[:, 0] * e[:, 1] - rel[:, 1] * e[:, 0]) / denom
    hits = np.flatnonzero((denom != 0.0) & (s >= -1e-12) & (s <= 1.0 + 1e-12) & (t > 0.0))
    if hits.size == 0:
        raise LoadError(f"no outer edge found in the direction of {position}")
    best = hits[np.argmin(np.abs(t[hits] - 1.0))]
    return int(edges[best]), float(np.clip(s[best], 0.0, 1.0))


def boundary_integral(space, edge_indices, density, n_gauss=4):
    """Consistent load vector of a boundary density on the given edges.

    Args:
        space (FunctionSpace): Scalar space (vector dofs interleaved)
        edge_indices (numpy.ndarray): Boundary edges to integrate over
        density (callable): (points, normals) -> (n, 2)
        n_gauss (int, optional): Gauss points per edge

    Returns:
        numpy.ndarray: Load vector of length 2 * n_dofs
    """
    F = np.zeros(2 * space.n_dofs)
    if len(edge_indices) == 0:
        return F
    geom = edge_geometry(space.mesh, edge_indices)
    s, w = line_rule(n_gauss)
    phi = space.edge_shape_values(s)
    dofs = space.edge_dofs(edge_indices)
    pts = geom["start"][:, None, :] + s[None, :, None] * (geom["end"] - geom["start"])[:, None, :]
    normals = np.repeat(geom["normal"][:, None, :], s.size, axis=1)
    values = density(pts.reshape(-1, 2), normals.reshape(-1, 2)).reshape(pts.shape)
    # (edges, local dofs, components)
    local = np.einsum("q,e,qa,eqc->eac", w, geom["length"], phi, values)
    for c in range(2):
        np.add.at(F, 2 * dofs + c, local[:, :, c])
    return F


def load_vector(space, traction):
    """Discrete load vector: distributed traction on the outer edges plus point forces spread over the edge they act on."""
    mesh = space.mesh
    F = boundary_integral(space, mesh.outer_edge_indices, traction.density)
    center = traction.domain.outer.center.as_array()
    for position, force in traction.point_loads():
        edge, s = locate_on_outer(mesh, center, position)
        dofs = space.edge_dofs([edge])[0]
        phi = space.edge_shape_values(s)[0]
        for dof, weight in zip(dofs, phi):
            F[2 * dof : 2 * dof + 2] += weight * force
    return F


def rigid_matrix(space):
    """Rigid basis at the dofs, interleaved, shape (2 n_dofs, 3)."""
    return rigid_basis(space.dof_coords).reshape(2 * space.n_dofs, 3)


@dataclass
class LoadEquilibrium:
    """Rigid-mode residuals of a discrete load and the optional projection."""

    force: np.ndarray
    moment: float
    scale: float
    load: np.ndarray = None
    correction: float = 0.0
    projected: np.ndarray = None

    @property
    def relative(self):
        if self.scale == 0.0:
            return 0.0
        return max(float(np.abs(self.force).max()), abs(self.moment)) / self.scale

    @property
    def balanced(self):
        return self.relative <= _EQUILIBRIUM_RTOL


def check_load_equilibrium(traction, mesh, space=None, project=False):
    """Discrete rigid-mode integrals of the load.

    Args:
        traction (TractionSpec): The load
        mesh (Mesh): Mesh with SIGMA edges
        space (FunctionSpace, optional): Space the load is assembled in. Defaults to P1.
        project (bool, optional): Also remove the rigid part of the load on Sigma

    Returns:
        LoadEquilibrium: force residual (2,), moment residual and the load scale;
        with ``project`` the equilibrated load vector and the L2(Sigma) norm of the removed part

    Raises:
        LoadError: If the support leaves Sigma or the mesh has no Sigma edges
    """
    if space is None:
        space = FunctionSpace(mesh, 1)
    sigma_edges = mesh.sigma_edge_indices
    if sigma_edges.size == 0:
        raise LoadError("mesh has no Sigma edges")
    traction.check_support()

    F = load_vector(space, traction)
    R = rigid_matrix(space)
    b = R.T @ F
    diameter = float(np.ptp(mesh.nodes, axis=0).max())
    scale = float(np.abs(F).sum()) * max(1.0, diameter)
    result = LoadEquilibrium(force=b[:2].copy(), moment=float(b[2]), scale=scale, load=F)

    if project:
        gram = np.zeros((3, 3))
        for j in range(3):
            unit = np.zeros(3)
            unit[j] = 1.0
            Fj = boundary_integral(space, sigma_edges, _rigid_density(unit))
            gram[:, j] = R.T @ Fj
        c = np.linalg.solve(gram, b)
        correction = boundary_integral(space, sigma_edges, _rigid_density(c))
        result.projected = F - correction
        result.correction = math.sqrt(max(float(c @ gram @ c), 0.0))
        logger.info(f"Projected load onto equilibrated subspace, correction norm {result.correction:.3e}")
    logger.debug(f"Load residuals: force={result.force}, moment={result.moment:.3e}, scale={scale:.3e}")
    return result


def _rigid_density(c):
    def density(points, normals):
        return rigid_basis(points) @ c

    return density
