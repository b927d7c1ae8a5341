"""
Mesh morphing: move the nodes of an existing mesh so that one cavity boundary
follows a nearby shape, keeping the connectivity.

Used by the stability sweep and the shape reconstruction, where remeshing at
every evaluation would add discretization noise to small differences.
"""
import dataclasses
import logging

import numpy as np

from geometry.distances import boundary_polyline, polyline_distance
from mesh.model import Mesh, triangle_areas
from utilities.errors import MeshError

logger = logging.getLogger(__name__)

_MIN_QUALITY = 0.05


def _smoothstep(xi):
    xi = np.clip(xi, 0.0, 1.0)
    return 1.0 - xi * xi * (3.0 - 2.0 * xi)


def transition_width(domain, index):
    """Half the distance from cavity ``index`` to the other boundaries."""
    cavity = boundary_polyline(domain.cavities[index], 1024)
    others = [boundary_polyline(domain.outer, 2048)]
    others += [boundary_polyline(c, 1024) for k, c in enumerate(domain.cavities) if k != index]
    return 0.5 * min(float(polyline_distance(cavity, poly).min()) for poly in others)


def morph_mesh(mesh, domain, index, new_shape):
    """Map the mesh of ``domain`` onto the domain with cavity ``index`` replaced.

    A node at polar angle theta about the old cavity center moves by
    w * (gamma_new(theta) - gamma_old(theta)), with w a smooth step falling
    from 1 on the cavity to 0 at the transition width.

    Args:
        mesh (Mesh): Mesh of ``domain``
        domain (DomainSpec): Geometry the mesh was generated for
        index (int): Cavity to move
        new_shape (StarShape): Replacement cavity

    Returns:
        tuple: (Mesh, DomainSpec) for the new geometry

    Raises:
        MeshError: If the morphed mesh has inverted or degenerate triangles
    """
    old_shape = domain.cavities[index]
    width = transition_width(domain, index)
    center = old_shape.center.as_array()
    new_center = new_shape.center.as_array()

    rel = mesh.nodes - center
    theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)
    r = np.hypot(rel[:, 0], rel[:, 1])
    rho_old = old_shape.radius(theta)
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    delta = (new_center - center) + (new_shape.radius(theta) - rho_old)[:, None] * direction

    weight = _smoothstep((r - rho_old) / width)
    nodes = mesh.nodes + weight[:, None] * delta

    on_cavity = np.unique(mesh.edges[mesh.cavity_edge_indices(index)].ravel())
    nodes[on_cavity] = new_center + new_shape.radius(theta[on_cavity])[:, None] * direction[on_cavity]

    area = triangle_areas(nodes, mesh.triangles)
    old_area = np.abs(mesh.areas)
    worst = int(np.argmin(area / old_area))
    if area[worst] <= _MIN_QUALITY * old_area[worst]:
        raise MeshError(
            f"morphing cavity {index} collapses triangle {worst} (area ratio {area[worst] / old_area[worst]:.3g})"
        )

    cavities = list(domain.cavities)
    cavities[index] = new_shape
    new_domain = dataclasses.replace(domain, cavities=tuple(cavities))
    morphed = Mesh(
        nodes=nodes, triangles=mesh.triangles, regions=mesh.regions, edges=mesh.edges, edge_tags=mesh.edge_tags
    )
    logger.debug(f"Morphed cavity {index}: max node shift {np.abs(weight[:, None] * delta).max():.3g}")
    return morphed, new_domain
