"""Bipartite network between publications and JEL subject codes."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable
from xml.etree import ElementTree as ET

from ..exceptions import ConfigurationError, ValidationError
from ..indicators import JEL_CODES, PublicationRecord

__all__ = ["BipartiteGraph", "build_jel_network", "export_network", "import_network_json", "NETWORK_FORMATS"]

NETWORK_FORMATS = ("dot", "graphml", "json")
# node size in exports is this multiple of the JEL share
SIZE_SCALE = 10.0


@dataclass(frozen=True)
class BipartiteGraph:
    dp_nodes: frozenset
    jel_nodes: frozenset
    edges: tuple  # sorted (pub_id, jel) pairs

    def __post_init__(self):
        for pub, jel in self.edges:
            if pub not in self.dp_nodes or jel not in self.jel_nodes:
                raise ValidationError(f"edge ({pub}, {jel}) references a missing node")

    @property
    def jel_degree(self) -> dict[str, int]:
        counts = Counter(jel for _, jel in self.edges)
        return {j: counts.get(j, 0) for j in sorted(self.jel_nodes)}

    @property
    def dp_degree(self) -> dict[str, int]:
        counts = Counter(pub for pub, _ in self.edges)
        return {p: counts.get(p, 0) for p in sorted(self.dp_nodes)}

    @property
    def jel_share(self) -> dict[str, float] | None:
        """Share of all edges per JEL code; ``None`` for a graph without edges."""
        if not self.edges:
            return None
        total = len(self.edges)
        return {j: d / total for j, d in self.jel_degree.items()}

    def summary(self) -> dict:
        multi = sum(1 for d in self.dp_degree.values() if d >= 2)
        return {
            "n_dp": len(self.dp_nodes),
            "n_jel": len(self.jel_nodes),
            "n_edges": len(self.edges),
            "jel_degree": self.jel_degree,
            "jel_share": self.jel_share,
            "n_dp_multi_field": multi,
        }


def build_jel_network(pubs: Iterable[PublicationRecord]) -> BipartiteGraph:
    """One DP node per publication, one JEL node per code used, one edge per (pub, code)."""
    dp, jel, edges = set(), set(), set()
    for p in pubs:
        dp.add(p.pub_id)
        for code in p.jel_codes:
            if code not in JEL_CODES:
                raise ValidationError(f"publication {p.pub_id}: unknown JEL code {code!r}")
            jel.add(code)
            edges.add((p.pub_id, code))
    return BipartiteGraph(frozenset(dp), frozenset(jel), tuple(sorted(edges)))


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_id(kind: str, name: str) -> str:
    return _quote(f"{kind}:{name}")


def _export_dot(g: BipartiteGraph) -> str:
    share = g.jel_share or {}
    lines = ["graph dp_jel {"]
    for p in sorted(g.dp_nodes):
        lines.append(f'  {_dot_id("dp", p)} [kind="dp", label={_quote(p)}, shape=point];')
    for j in sorted(g.jel_nodes):
        s = share.get(j, 0.0)
        lines.append(
            f'  {_dot_id("jel", j)} [kind="jel", label="{j}", share={s!r}, width={SIZE_SCALE * s!r}, fixedsize=true];'
        )
    for p, j in g.edges:
        lines.append(f"  {_dot_id('dp', p)} -- {_dot_id('jel', j)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _export_graphml(g: BipartiteGraph) -> str:
    ns = "http://graphml.graphdrawing.org/xmlns"
    root = ET.Element("graphml", xmlns=ns)
    for key, target, typ in (("kind", "node", "string"), ("share", "node", "double"), ("size", "node", "double")):
        ET.SubElement(root, "key", {"id": key, "for": target, "attr.name": key, "attr.type": typ})
    graph = ET.SubElement(root, "graph", id="dp_jel", edgedefault="undirected")
    share = g.jel_share or {}
    for p in sorted(g.dp_nodes):
        node = ET.SubElement(graph, "node", id=f"dp:{p}")
        ET.SubElement(node, "data", key="kind").text = "dp"
    for j in sorted(g.jel_nodes):
        node = ET.SubElement(graph, "node", id=f"jel:{j}")
        ET.SubElement(node, "data", key="kind").text = "jel"
        s = share.get(j, 0.0)
        ET.SubElement(node, "data", key="share").text = repr(s)
        ET.SubElement(node, "data", key="size").text = repr(SIZE_SCALE * s)
    for i, (p, j) in enumerate(g.edges):
        ET.SubElement(graph, "edge", id=f"e{i}", source=f"dp:{p}", target=f"jel:{j}")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def _export_json(g: BipartiteGraph) -> str:
    share = g.jel_share or {}
    nodes = [{"id": p, "kind": "dp", "share": None} for p in sorted(g.dp_nodes)]
    nodes += [{"id": j, "kind": "jel", "share": share.get(j)} for j in sorted(g.jel_nodes)]
    edges = [{"source": p, "target": j} for p, j in g.edges]
    return json.dumps({"nodes": nodes, "edges": edges}, indent=1) + "\n"


def export_network(graph: BipartiteGraph, format: str = "json") -> bytes:
    """Serialize to DOT, GraphML or JSON. JEL node size is proportional to its share."""
    writers = {"dot": _export_dot, "graphml": _export_graphml, "json": _export_json}
    if format not in writers:
        raise ConfigurationError(f"unknown network format {format!r}; choose from {NETWORK_FORMATS}")
    return writers[format](graph).encode("utf-8")


def import_network_json(data: bytes | str) -> BipartiteGraph:
    doc = json.loads(data)
    dp = frozenset(n["id"] for n in doc["nodes"] if n["kind"] == "dp")
    jel = frozenset(n["id"] for n in doc["nodes"] if n["kind"] == "jel")
    edges = tuple(sorted((e["source"], e["target"]) for e in doc["edges"]))
    return BipartiteGraph(dp, jel, edges)
