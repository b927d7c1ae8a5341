import math

import numpy as np
import pytest

from geometry.shapes import DomainSpec, StarShape
from mesh.frames import boundary_frame, edge_geometry
from mesh.generator import generate_mesh
from mesh.mesh_io import mesh_roundtrip, parse_mesh, write_mesh
from mesh.model import TAG_OUTER, TAG_SIGMA, tag_name
from mesh.morph import morph_mesh
from mesh.quadrature import line_rule, subdivided_rule, triangle_rule
from utilities.errors import ConstraintError, MeshError, MeshParseError


@pytest.fixture(scope="module")
def annulus_domain():
    return DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 1.0),
        cavities=(StarShape.circle(0.0, 0.0, 0.4),),
        r0=0.2,
        M0=1.0,
        M1=20.0,
    )


@pytest.fixture(scope="module")
def annulus_mesh(annulus_domain):
    return generate_mesh(annulus_domain, 0.05)


@pytest.mark.parametrize("degree", [2, 4])
def test_triangle_rule_integrates_monomial(degree):
    rule = triangle_rule(degree)
    assert rule.weights.sum() == pytest.approx(0.5)
    assert np.all(rule.weights > 0.0)
    x1, x2 = rule.points[:, 1], rule.points[:, 2]
    if degree >= 3:
        assert np.sum(rule.weights * x1 ** 2 * x2) == pytest.approx(1.0 / 60.0, rel=1e-12)
    else:
        assert np.sum(rule.weights * x1 * x2) == pytest.approx(1.0 / 24.0, rel=1e-12)


def test_line_rule_and_subdivided_rule():
    x, w = line_rule(4)
    assert np.sum(w * x ** 7) == pytest.approx(1.0 / 8.0)
    sub = subdivided_rule(4)
    assert sub.weights.sum() == pytest.approx(0.5)
    assert np.sum(sub.weights * sub.points[:, 1] ** 2) == pytest.approx(1.0 / 12.0)


def test_annulus_topology(annulus_mesh):
    assert annulus_mesh.euler_characteristic == 0
    assert annulus_mesh.cavity_indices == [0]
    assert annulus_mesh.ordered_loop(annulus_mesh.cavity_edge_indices(0)).size > 0
    assert annulus_mesh.outer_loop().size > 0


def test_annulus_quality(annulus_domain, annulus_mesh):
    assert np.all(annulus_mesh.areas > 0.0)
    assert annulus_mesh.h_max <= 0.05 * 1.5
    assert annulus_mesh.min_angle >= 20.0
    expected = annulus_domain.area()
    slack = 2.0 * annulus_mesh.h_max ** 2 * (2.0 * math.pi * 1.4)
    assert annulus_mesh.areas.sum() == pytest.approx(expected, abs=slack)


def test_boundary_nodes_lie_on_curves(annulus_mesh):
    r = np.linalg.norm(annulus_mesh.nodes[annulus_mesh.edges.ravel()], axis=1)
    assert np.all(np.isclose(r, 1.0) | np.isclose(r, 0.4))


def test_every_boundary_edge_has_one_owner(annulus_mesh):
    owners = annulus_mesh.edge_triangles
    assert owners.shape[0] == annulus_mesh.edges.shape[0]


def test_h_target_above_quarter_r0_is_rejected(annulus_domain):
    with pytest.raises(ConstraintError):
        generate_mesh(annulus_domain, 0.06)


def test_refinement_quadruples_triangles():
    domain = DomainSpec(outer=StarShape.circle(0.0, 0.0, 1.0), r0=0.4, M0=1.0, M1=20.0)
    coarse = generate_mesh(domain, 0.1)
    fine = generate_mesh(domain, 0.05)
    assert fine.n_triangles / coarse.n_triangles == pytest.approx(4.0, rel=0.2)


def test_sigma_edges_follow_interval():
    domain = DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 1.0), r0=0.4, M0=1.0, M1=20.0, sigma_interval=(0.5, 2.0)
    )
    mesh = generate_mesh(domain, 0.1)
    sigma = mesh.sigma_edge_indices
    assert sigma.size > 0
    mid = 0.5 * (mesh.nodes[mesh.edges[sigma, 0]] + mesh.nodes[mesh.edges[sigma, 1]])
    assert np.all(domain.sigma_contains(domain.outer_arclength(mid)))
    assert set(np.unique(mesh.edge_tags).tolist()) == {TAG_OUTER, TAG_SIGMA}


def test_tag_names():
    assert [tag_name(t) for t in (TAG_OUTER, TAG_SIGMA, 2)] == ["outer", "sigma", "cavity:2"]


def test_morph_moves_cavity_nodes(annulus_domain, annulus_mesh):
    grown = StarShape.circle(0.01, 0.0, 0.42)
    morphed, domain = morph_mesh(annulus_mesh, annulus_domain, 0, grown)
    nodes = np.unique(morphed.edges[morphed.cavity_edge_indices(0)].ravel())
    r = np.linalg.norm(morphed.nodes[nodes] - [0.01, 0.0], axis=1)
    np.testing.assert_allclose(r, 0.42, atol=1e-12)
    assert domain.cavities[0] == grown
    assert np.all(morphed.areas > 0.0)
    np.testing.assert_array_equal(morphed.triangles, annulus_mesh.triangles)


def test_morph_rejects_collapsing_triangles(annulus_domain, annulus_mesh):
    with pytest.raises(MeshError):
        morph_mesh(annulus_mesh, annulus_domain, 0, StarShape.circle(0.0, 0.0, 0.85))


def test_mesh_roundtrip(tmp_path, annulus_mesh):
    assert mesh_roundtrip(annulus_mesh, tmp_path / "annulus.gpsmesh").same_as(annulus_mesh)


def test_write_mesh_format(tmp_path, annulus_mesh):
    path = tmp_path / "annulus.gpsmesh"
    write_mesh(annulus_mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "gpsmesh v1"
    assert lines[1] == f"nodes {annulus_mesh.n_nodes}"
    assert any(line.endswith("cavity:0") for line in lines)


MESH_TEXT = """gpsmesh v1
nodes 3
0 0 0
1 1 0
2 0 1
triangles 1
0 0 1 {third} 0
edges 3
0 0 1 outer
1 1 2 outer
2 2 0 outer
"""


def test_parse_minimal_mesh():
    mesh = parse_mesh(MESH_TEXT.format(third=2))
    assert mesh.n_triangles == 1
    assert mesh.areas[0] == pytest.approx(0.5)


def test_parse_reports_missing_node_with_line():
    with pytest.raises(MeshParseError) as excinfo:
        parse_mesh(MESH_TEXT.format(third=5))
    assert excinfo.value.line == 7
    assert "line 7" in str(excinfo.value)


def test_parse_rejects_unknown_tag():
    with pytest.raises(MeshParseError) as excinfo:
        parse_mesh(MESH_TEXT.format(third=2).replace("2 2 0 outer", "2 2 0 inlet"))
    assert excinfo.value.line == 11


def nearest_edge(mesh, edge_indices, point):
    mid = 0.5 * (mesh.nodes[mesh.edges[edge_indices, 0]] + mesh.nodes[mesh.edges[edge_indices, 1]])
    return int(edge_indices[np.argmin(np.linalg.norm(mid - point, axis=1))])


def test_boundary_frame_orientation(annulus_mesh):
    outer = boundary_frame(annulus_mesh, nearest_edge(annulus_mesh, annulus_mesh.outer_edge_indices, (1.0, 0.0)))
    assert outer.n == pytest.approx((1.0, 0.0), abs=0.05)
    assert outer.tau == pytest.approx((0.0, 1.0), abs=0.05)
    cavity = boundary_frame(annulus_mesh, nearest_edge(annulus_mesh, annulus_mesh.cavity_edge_indices(0), (0.4, 0.0)))
    assert cavity.n == pytest.approx((-1.0, 0.0), abs=0.1)


def test_boundary_frames_are_positively_oriented(annulus_mesh):
    geom = edge_geometry(annulus_mesh)
    n, tau = geom["normal"], geom["tangent"]
    np.testing.assert_allclose(n[:, 0] * tau[:, 1] - n[:, 1] * tau[:, 0], 1.0)


def test_boundary_frame_rejects_interior_edge(annulus_mesh):
    boundary_nodes = set(annulus_mesh.edges.ravel().tolist())
    interior = next(t for t in annulus_mesh.triangles if not set(t[:2].tolist()) & boundary_nodes)
    with pytest.raises(MeshError):
        boundary_frame(annulus_mesh, (int(interior[0]), int(interior[1])))
