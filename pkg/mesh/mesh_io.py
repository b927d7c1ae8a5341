"""
Reader and writer for the gpsmesh v1 text format.

    gpsmesh v1
    nodes <N>
    <i> <x1> <x2>
    triangles <M>
    <j> <n1> <n2> <n3> <region>
    edges <K>
    <k> <n1> <n2> <tag>          tag: outer | sigma | cavity:<k>

Floats are written with 17 significant digits so that a write/read cycle is
the identity. Text after '#' is ignored when reading.
"""
import logging

import numpy as np

from mesh.model import Mesh, parse_tag, tag_name
from utilities.atomic_io import atomic_open
from utilities.errors import MeshParseError

logger = logging.getLogger(__name__)

HEADER = "gpsmesh v1"


def _fmt(value):
    return format(float(value), ".17g")


def write_mesh(mesh, path):
    """Write a mesh atomically.

    Args:
        mesh (Mesh): Mesh to write
        path (str | Path): Destination file
    """
    with atomic_open(path) as f:
        f.write(f"{HEADER}\n")
        f.write(f"nodes {mesh.n_nodes}\n")
        for i, (x1, x2) in enumerate(mesh.nodes):
            f.write(f"{i} {_fmt(x1)} {_fmt(x2)}\n")
        f.write(f"triangles {mesh.n_triangles}\n")
        for j, (tri, region) in enumerate(zip(mesh.triangles, mesh.regions)):
            f.write(f"{j} {tri[0]} {tri[1]} {tri[2]} {region}\n")
        f.write(f"edges {mesh.edges.shape[0]}\n")
        for k, (edge, tag) in enumerate(zip(mesh.edges, mesh.edge_tags)):
            f.write(f"{k} {edge[0]} {edge[1]} {tag_name(tag)}\n")
    logger.info(f"Wrote mesh ({mesh.n_nodes} nodes, {mesh.n_triangles} triangles) to {path}")


class _LineReader:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, expected):
        while self.pos < len(self.lines):
            raw = self.lines[self.pos]
            self.pos += 1
            content = raw.split("#", 1)[0].strip()
            if content:
                return self.pos, content.split()
        raise MeshParseError(f"unexpected end of file, expected {expected}", line=self.pos)


def _section(reader, name):
    line, tokens = reader.next(f"'{name} <count>'")
    if len(tokens) != 2 or tokens[0] != name:
        raise MeshParseError(f"expected '{name} <count>', got '{' '.join(tokens)}'", line=line)
    try:
        count = int(tokens[1])
    except ValueError:
        raise MeshParseError(f"invalid {name} count '{tokens[1]}'", line=line)
    if count < 0:
        raise MeshParseError(f"negative {name} count {count}", line=line)
    return count


def _row(reader, index, width, what):
    line, tokens = reader.next(f"{what} {index}")
    if len(tokens) != width:
        raise MeshParseError(f"{what} record needs {width} fields, got {len(tokens)}", line=line)
    try:
        found = int(tokens[0])
    except ValueError:
        raise MeshParseError(f"invalid {what} index '{tokens[0]}'", line=line)
    if found != index:
        raise MeshParseError(f"{what} index {found} out of sequence, expected {index}", line=line)
    return line, tokens[1:]


def _node_ref(token, n_nodes, line):
    try:
        value = int(token)
    except ValueError:
        raise MeshParseError(f"invalid node reference '{token}'", line=line)
    if not 0 <= value < n_nodes:
        raise MeshParseError(f"node reference {value} out of range [0, {n_nodes})", line=line)
    return value


def parse_mesh(text):
    """Parse gpsmesh v1 text.

    Raises:
        MeshParseError: On malformed input, with the offending line number
    """
    reader = _LineReader(text)
    line, tokens = reader.next("header")
    if " ".join(tokens) != HEADER:
        raise MeshParseError(f"expected header '{HEADER}', got '{' '.join(tokens)}'", line=line)

    n_nodes = _section(reader, "nodes")
    nodes = np.empty((n_nodes, 2))
    for i in range(n_nodes):
        line, fields = _row(reader, i, 3, "node")
        try:
            nodes[i] = [float(fields[0]), float(fields[1])]
        except ValueError:
            raise MeshParseError(f"non-numeric coordinate in '{' '.join(fields)}'", line=line)
        if not np.all(np.isfinite(nodes[i])):
            raise MeshParseError("non-finite coordinate", line=line)

    n_tri = _section(reader, "triangles")
    triangles = np.empty((n_tri, 3), dtype=np.int64)
    regions = np.empty(n_tri, dtype=np.int64)
    for j in range(n_tri):
        line, fields = _row(reader, j, 5, "triangle")
        triangles[j] = [_node_ref(v, n_nodes, line) for v in fields[:3]]
        if len(set(triangles[j].tolist())) != 3:
            raise MeshParseError(f"triangle {j} repeats a node", line=line)
        try:
            regions[j] = int(fields[3])
        except ValueError:
            raise MeshParseError(f"invalid region '{fields[3]}'", line=line)

    n_edges = _section(reader, "edges")
    edges = np.empty((n_edges, 2), dtype=np.int64)
    tags = np.empty(n_edges, dtype=np.int64)
    seen = {}
    for k in range(n_edges):
        line, fields = _row(reader, k, 4, "edge")
        a = _node_ref(fields[0], n_nodes, line)
        b = _node_ref(fields[1], n_nodes, line)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise MeshParseError(f"duplicate edge ({a}, {b}), first listed on line {seen[key]}", line=line)
        seen[key] = line
        try:
            tags[k] = parse_tag(fields[2])
        except ValueError as e:
            raise MeshParseError(str(e), line=line)
        edges[k] = (a, b)

    while reader.pos < len(reader.lines):
        reader.pos += 1
        if reader.lines[reader.pos - 1].split("#", 1)[0].strip():
            raise MeshParseError("trailing content after the edges section", line=reader.pos)

    return Mesh(nodes=nodes, triangles=triangles, regions=regions, edges=edges, edge_tags=tags)


def read_mesh(path):
    """Read a gpsmesh v1 file.

    Args:
        path (str | Path): Source file

    Returns:
        Mesh: The parsed mesh

    Raises:
        MeshParseError: On malformed input
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    mesh = parse_mesh(text)
    logger.debug(f"Read mesh with {mesh.n_nodes} nodes from {path}")
    return mesh


def mesh_roundtrip(mesh, path):
    """Write ``mesh`` to ``path`` and read it back."""
    write_mesh(mesh, path)
    return read_mesh(path)
